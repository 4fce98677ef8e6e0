"""Fleet command kinds and their packet codecs.

Command-set map (shared with the on-robot bus):

    0x10 motion     0x00 body twist, 0x01 wheel speeds, 0x02 set trajectory
    0x20 telemetry  0x00 telemetry frame
    0x3F fleet      0x00 estop, 0x01 heartbeat, 0x02 ping, 0x03 estop release

Every command body starts with [seq u32][t_sent f64]; the packet-level
16-bit seq carries the low half of the command seq.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from ..canproto import TransportPacket
from ..kinematics import BodyTwist, WheelSpeeds
from .estop import EstopReason

CMD_SET_MOTION = 0x10
CMD_SET_TELEMETRY = 0x20
CMD_SET_FLEET = 0x3F

CMD_ID_BODY_TWIST = 0x00
CMD_ID_WHEEL_SPEEDS = 0x01
CMD_ID_SET_TRAJECTORY = 0x02

CMD_ID_TELEMETRY = 0x00

CMD_ID_ESTOP = 0x00
CMD_ID_HEARTBEAT = 0x01
CMD_ID_PING = 0x02
CMD_ID_ESTOP_RELEASE = 0x03

_BODY_HEADER = struct.Struct("<Id")  # command seq, t_sent


class CommandKind(Enum):
    BODY_TWIST = "body_twist"
    WHEEL_SPEEDS = "wheel_speeds"
    SET_TRAJECTORY = "set_trajectory"
    ESTOP = "estop"
    ESTOP_RELEASE = "estop_release"
    PING = "ping"
    HEARTBEAT = "heartbeat"


_KIND_TO_TOPIC = {
    CommandKind.BODY_TWIST: (CMD_SET_MOTION, CMD_ID_BODY_TWIST),
    CommandKind.WHEEL_SPEEDS: (CMD_SET_MOTION, CMD_ID_WHEEL_SPEEDS),
    CommandKind.SET_TRAJECTORY: (CMD_SET_MOTION, CMD_ID_SET_TRAJECTORY),
    CommandKind.ESTOP: (CMD_SET_FLEET, CMD_ID_ESTOP),
    CommandKind.HEARTBEAT: (CMD_SET_FLEET, CMD_ID_HEARTBEAT),
    CommandKind.PING: (CMD_SET_FLEET, CMD_ID_PING),
    CommandKind.ESTOP_RELEASE: (CMD_SET_FLEET, CMD_ID_ESTOP_RELEASE),
}
_TOPIC_TO_KIND = {v: k for k, v in _KIND_TO_TOPIC.items()}


@dataclass(frozen=True, slots=True)
class BodyTwistCommand:
    twist: BodyTwist

    def pack(self) -> bytes:
        return struct.pack("<fff", self.twist.vx, self.twist.vy, self.twist.omega)

    @staticmethod
    def unpack(data: bytes) -> "BodyTwistCommand":
        vx, vy, omega = struct.unpack("<fff", data)
        return BodyTwistCommand(BodyTwist(vx, vy, omega))


@dataclass(frozen=True, slots=True)
class WheelSpeedsCommand:
    wheels: WheelSpeeds

    def pack(self) -> bytes:
        return struct.pack("<ffff", *self.wheels)

    @staticmethod
    def unpack(data: bytes) -> "WheelSpeedsCommand":
        return WheelSpeedsCommand(WheelSpeeds(*struct.unpack("<ffff", data)))


@dataclass(frozen=True, slots=True)
class TrajectorySpec:
    """Wire form of a trajectory request: line, circle, or waypoint chain."""

    kind: str                                   # "line" | "circle" | "waypoints" | "idle"
    params: tuple[float, ...] = ()
    waypoints: tuple[tuple[float, float], ...] = ()

    _KIND_CODES = {"idle": 0, "line": 1, "circle": 2, "waypoints": 3}

    def pack(self) -> bytes:
        code = self._KIND_CODES[self.kind]
        out = struct.pack("<B", code)
        if self.kind == "waypoints":
            out += struct.pack("<B", len(self.waypoints))
            for x, y in self.waypoints:
                out += struct.pack("<ff", x, y)
            out += struct.pack(f"<{len(self.params)}f", *self.params)
        else:
            out += struct.pack(f"<{len(self.params)}f", *self.params)
        return out

    @staticmethod
    def unpack(data: bytes) -> "TrajectorySpec":
        code = data[0]
        names = {v: k for k, v in TrajectorySpec._KIND_CODES.items()}
        kind = names[code]
        if kind == "waypoints":
            n = data[1]
            pts = struct.unpack(f"<{2 * n}f", data[2 : 2 + 8 * n])
            waypoints = tuple((pts[2 * i], pts[2 * i + 1]) for i in range(n))
            rest = data[2 + 8 * n :]
            params = struct.unpack(f"<{len(rest) // 4}f", rest)
            return TrajectorySpec(kind, params, waypoints)
        rest = data[1:]
        params = struct.unpack(f"<{len(rest) // 4}f", rest)
        return TrajectorySpec(kind, params)


@dataclass(frozen=True, slots=True)
class SetTrajectoryCommand:
    spec: TrajectorySpec

    def pack(self) -> bytes:
        return self.spec.pack()

    @staticmethod
    def unpack(data: bytes) -> "SetTrajectoryCommand":
        return SetTrajectoryCommand(TrajectorySpec.unpack(data))


@dataclass(frozen=True, slots=True)
class PingCommand:
    def pack(self) -> bytes:
        return b""

    @staticmethod
    def unpack(data: bytes) -> "PingCommand":
        return PingCommand()


@dataclass(frozen=True, slots=True)
class EstopCommand:
    reason: EstopReason = EstopReason.OPERATOR

    def pack(self) -> bytes:
        return struct.pack("<B", list(EstopReason).index(self.reason))

    @staticmethod
    def unpack(data: bytes) -> "EstopCommand":
        return EstopCommand(list(EstopReason)[data[0]])


@dataclass(frozen=True, slots=True)
class HeartbeatCommand:
    def pack(self) -> bytes:
        return b""

    @staticmethod
    def unpack(data: bytes) -> "HeartbeatCommand":
        return HeartbeatCommand()


_BODY_CODECS = {
    CommandKind.BODY_TWIST: BodyTwistCommand,
    CommandKind.WHEEL_SPEEDS: WheelSpeedsCommand,
    CommandKind.SET_TRAJECTORY: SetTrajectoryCommand,
    CommandKind.ESTOP: EstopCommand,
    CommandKind.ESTOP_RELEASE: PingCommand,   # empty body
    CommandKind.PING: PingCommand,
    CommandKind.HEARTBEAT: HeartbeatCommand,
}


@dataclass(frozen=True, slots=True)
class FleetCommand:
    """One infrastructure-channel command addressed to a robot."""

    robot_id: int
    kind: CommandKind
    body: object
    seq: int                  # u32, monotone per sender
    t_sent: float

    def __post_init__(self) -> None:
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise ValueError(f"seq out of range: {self.seq}")


def command_to_packet(cmd: FleetCommand, source_id: int, needs_ack: bool = False) -> TransportPacket:
    cmd_set, cmd_id = _KIND_TO_TOPIC[cmd.kind]
    payload = _BODY_HEADER.pack(cmd.seq, cmd.t_sent) + cmd.body.pack()
    return TransportPacket(
        source_id=source_id,
        dest_id=cmd.robot_id,
        seq=cmd.seq & 0xFFFF,
        cmd_set=cmd_set,
        cmd_id=cmd_id,
        payload=payload,
        needs_ack=needs_ack,
    )


class UnknownCommandError(ValueError):
    """Packet topic does not map to a known command kind."""


def command_from_packet(pkt: TransportPacket) -> FleetCommand:
    topic = (pkt.cmd_set, pkt.cmd_id)
    kind = _TOPIC_TO_KIND.get(topic)
    if kind is None:
        raise UnknownCommandError(f"unknown command topic {topic}")
    seq, t_sent = _BODY_HEADER.unpack_from(pkt.payload)
    codec = _BODY_CODECS[kind]
    body = codec.unpack(pkt.payload[_BODY_HEADER.size :])
    return FleetCommand(robot_id=pkt.dest_id, kind=kind, body=body, seq=seq, t_sent=t_sent)
