"""Gateway endpoints: REST for commands, one WebSocket for the event stream."""

from __future__ import annotations

import asyncio
import queue
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..fleetnet.commands import TrajectorySpec
from ..kinematics import BodyTwist
from .live import LiveFleet
from .models import (
    DispatchRequest,
    DispatchResponse,
    EstopRequest,
    EstopResponse,
    HealthResponse,
    RosterResponse,
    StatusResponse,
    TargetStatus,
)


def _statuses(records) -> list[TargetStatus]:
    return [
        TargetStatus(robot_id=r.robot_id, status=r.status, acked_at=r.acked_at)
        for r in records
    ]


def _trajectory_spec(params) -> TrajectorySpec:
    if params.kind == "line":
        return TrajectorySpec(
            "line", (params.length, params.a_max, params.v_max, 0.0, 0.0, 0.0)
        )
    if params.kind == "circle":
        return TrajectorySpec("circle", (params.diameter, params.speed, 0.0, 0.0))
    if params.kind == "waypoints":
        return TrajectorySpec(
            "waypoints", (params.a_max, params.v_max), tuple(map(tuple, params.waypoints))
        )
    return TrajectorySpec("idle")


def create_app(fleet: LiveFleet, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="mecafleet gateway", version="1.0")
    app.state.fleet = fleet

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse()

    @app.get("/api/v1/status", response_model=StatusResponse)
    def status():
        return StatusResponse(
            scenario=fleet.config.scenario.kind,
            running=fleet.running,
            mode=fleet.mode,
            sim_time=fleet.sim_time,
            tick=fleet.runner.tick_index if fleet.runner else 0,
        )

    @app.get("/api/v1/roster", response_model=RosterResponse)
    def roster():
        return fleet.roster()

    @app.post("/api/v1/dispatch", response_model=DispatchResponse)
    def dispatch(request: DispatchRequest):
        if not request.targets:
            return JSONResponse(status_code=422, content={"detail": "empty target list"})
        if fleet.mode != "sim":
            return JSONResponse(status_code=409, content={"detail": "replay session is read-only"})
        if request.command == "body_twist":
            twist = request.twist or None
            if twist is None:
                return JSONResponse(status_code=422, content={"detail": "twist params required"})
            records = fleet.dispatch_twist(
                BodyTwist(twist.vx, twist.vy, twist.omega), request.targets
            )
        elif request.command == "set_trajectory":
            if request.trajectory is None:
                return JSONResponse(status_code=422, content={"detail": "trajectory params required"})
            records = fleet.dispatch_trajectory(_trajectory_spec(request.trajectory), request.targets)
        elif request.command == "idle":
            records = fleet.dispatch_trajectory(TrajectorySpec("idle"), request.targets)
        else:
            records = fleet.dispatch_ping(request.targets)
        return DispatchResponse(command=request.command, statuses=_statuses(records))

    @app.post("/api/v1/estop", response_model=EstopResponse)
    def estop(request: EstopRequest):
        if fleet.mode != "sim":
            return JSONResponse(status_code=409, content={"detail": "replay session is read-only"})
        if request.action == "engage":
            records = fleet.estop_all()
            return EstopResponse(action="engage", applied=True, statuses=_statuses(records))
        if not request.confirm:
            return EstopResponse(
                action="release", applied=False, detail="release requires confirm=true"
            )
        records = fleet.release_all()
        return EstopResponse(action="release", applied=True, statuses=_statuses(records))

    @app.post("/api/v1/scenario/stop")
    def scenario_stop():
        fleet.stop()
        return {"v": 1, "stopped": True}

    @app.websocket("/api/v1/ws")
    async def ws_stream(ws: WebSocket):
        await ws.accept()
        q = fleet.subscribe()
        # first message: a roster snapshot so clients can render immediately
        await ws.send_json({"v": 1, "type": "roster", "data": fleet.roster().model_dump()})

        async def pump_outbound():
            while True:
                try:
                    item = await asyncio.to_thread(q.get, True, 0.25)
                except queue.Empty:
                    continue
                await ws.send_json(item)

        async def pump_inbound():
            while True:
                message = await ws.receive_json()
                kind = message.get("type")
                if kind == "estop":
                    records = await asyncio.to_thread(fleet.estop_all)
                    await ws.send_json(
                        {"v": 1, "type": "ack",
                         "data": {"command": "estop",
                                  "statuses": [s.model_dump() for s in _statuses(records)]}}
                    )
                elif kind == "estop_release" and message.get("confirm"):
                    records = await asyncio.to_thread(fleet.release_all)
                    await ws.send_json(
                        {"v": 1, "type": "ack",
                         "data": {"command": "estop_release",
                                  "statuses": [s.model_dump() for s in _statuses(records)]}}
                    )
                elif kind == "dispatch":
                    request = DispatchRequest.model_validate(message.get("data", {}))
                    response: DispatchResponse = await asyncio.to_thread(_dispatch_sync, request)
                    await ws.send_json({"v": 1, "type": "ack", "data": response.model_dump()})

        def _dispatch_sync(request: DispatchRequest) -> DispatchResponse:
            if request.command == "body_twist" and request.twist is not None:
                records = fleet.dispatch_twist(
                    BodyTwist(request.twist.vx, request.twist.vy, request.twist.omega),
                    request.targets,
                )
            elif request.command == "set_trajectory" and request.trajectory is not None:
                records = fleet.dispatch_trajectory(
                    _trajectory_spec(request.trajectory), request.targets
                )
            elif request.command == "idle":
                records = fleet.dispatch_trajectory(TrajectorySpec("idle"), request.targets)
            else:
                records = fleet.dispatch_ping(request.targets)
            return DispatchResponse(command=request.command, statuses=_statuses(records))

        outbound = asyncio.create_task(pump_outbound())
        try:
            await pump_inbound()
        except WebSocketDisconnect:
            pass
        except RuntimeError:
            pass    # socket torn down mid-receive
        finally:
            outbound.cancel()
            fleet.unsubscribe(q)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
