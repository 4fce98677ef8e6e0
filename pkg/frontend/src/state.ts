// Console state as a pure function of the gateway event stream plus local
// UI events. Replaying the same event sequence reproduces the same state,
// which is what the reducer tests assert.

import type { AckData, Envelope, RosterRobot, TelemetryFrame } from "./schema.js";

export const TRAIL_LENGTH = 120; // points per robot, fades with age
export const LOST_AFTER_S = 0.5;
export const DEGRADED_AFTER_S = 0.15;

export interface TrailPoint {
  x: number;
  y: number;
  t: number;
}

export interface RobotView {
  robotId: number;
  x: number;
  y: number;
  theta: number;
  battery: number;
  connectivity: "connected" | "degraded" | "lost";
  estopLatched: boolean;
  estopReason: string | null;
  goal: [number, number] | null;
  lastTelemetryT: number;
  trail: TrailPoint[];
}

export interface ConsoleState {
  connection: "connecting" | "open" | "down";
  scenario: string;
  simTime: number;
  robots: Map<number, RobotView>;
  selection: Set<number>;
  estopVisuallyLatched: boolean;
  lastAck: AckData | null;
  ackHistory: AckData[];
}

export type ConsoleEvent =
  | { kind: "ws_open" }
  | { kind: "ws_down" }
  | { kind: "envelope"; envelope: Envelope }
  | { kind: "select"; robotId: number; selected: boolean }
  | { kind: "select_all"; selected: boolean }
  | { kind: "estop_visual"; latched: boolean };

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    scenario: "",
    simTime: 0,
    robots: new Map(),
    selection: new Set(),
    estopVisuallyLatched: false,
    lastAck: null,
    ackHistory: [],
  };
}

function cloneRobots(robots: Map<number, RobotView>): Map<number, RobotView> {
  const next = new Map<number, RobotView>();
  for (const [id, view] of robots) next.set(id, { ...view, trail: view.trail.slice() });
  return next;
}

function emptyView(robotId: number): RobotView {
  return {
    robotId,
    x: 0,
    y: 0,
    theta: 0,
    battery: 100,
    connectivity: "lost",
    estopLatched: false,
    estopReason: null,
    goal: null,
    lastTelemetryT: -Infinity,
    trail: [],
  };
}

function applyTelemetry(state: ConsoleState, frame: TelemetryFrame): ConsoleState {
  const robots = cloneRobots(state.robots);
  const view = robots.get(frame.robot_id) ?? emptyView(frame.robot_id);
  const trail = view.trail.concat([{ x: frame.x, y: frame.y, t: frame.t }]);
  if (trail.length > TRAIL_LENGTH) trail.splice(0, trail.length - TRAIL_LENGTH);
  robots.set(frame.robot_id, {
    ...view,
    x: frame.x,
    y: frame.y,
    theta: frame.theta,
    battery: frame.battery_pct,
    estopLatched: frame.estop_latched,
    estopReason: frame.estop_reason,
    lastTelemetryT: frame.t,
    trail,
  });
  return { ...state, simTime: Math.max(state.simTime, frame.t), robots };
}

function applyRoster(state: ConsoleState, robotsIn: RosterRobot[], scenario: string, t: number): ConsoleState {
  const robots = cloneRobots(state.robots);
  for (const entry of robotsIn) {
    const view = robots.get(entry.robot_id) ?? emptyView(entry.robot_id);
    robots.set(entry.robot_id, {
      ...view,
      connectivity: entry.connectivity,
      estopLatched: entry.estop_latched,
      estopReason: entry.estop_reason,
      battery: entry.battery_pct,
      goal: entry.goal,
      // roster carries a pose too; telemetry refines it at a higher rate
      x: view.trail.length ? view.x : entry.x,
      y: view.trail.length ? view.y : entry.y,
      theta: view.trail.length ? view.theta : entry.theta,
    });
  }
  return { ...state, robots, scenario, simTime: Math.max(state.simTime, t) };
}

export function reduce(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.kind) {
    case "ws_open":
      return { ...state, connection: "open" };
    case "ws_down":
      return { ...state, connection: "down" };
    case "select": {
      const selection = new Set(state.selection);
      if (event.selected) selection.add(event.robotId);
      else selection.delete(event.robotId);
      return { ...state, selection };
    }
    case "select_all": {
      const selection = event.selected ? new Set(state.robots.keys()) : new Set<number>();
      return { ...state, selection };
    }
    case "estop_visual":
      return { ...state, estopVisuallyLatched: event.latched };
    case "envelope": {
      const envelope = event.envelope;
      if (envelope.type === "telemetry") return applyTelemetry(state, envelope.data);
      if (envelope.type === "roster")
        return applyRoster(state, envelope.data.robots, envelope.data.scenario, envelope.data.t);
      if (envelope.type === "ack") {
        const history = state.ackHistory.concat([envelope.data]).slice(-20);
        return { ...state, lastAck: envelope.data, ackHistory: history };
      }
      return state;
    }
  }
}

/** Connectivity derived from telemetry age; roster values win when fresher. */
export function connectivityOf(view: RobotView, simTime: number): "connected" | "degraded" | "lost" {
  const age = simTime - view.lastTelemetryT;
  if (!Number.isFinite(age)) return view.connectivity;
  if (age <= DEGRADED_AFTER_S) return "connected";
  if (age <= LOST_AFTER_S) return "degraded";
  return "lost";
}

/** UI affordances derivable from state: the estop control stays one
 *  interaction away whenever the gateway is reachable. */
export function controls(state: ConsoleState): {
  estopEnabled: boolean;
  releaseEnabled: boolean;
  dispatchEnabled: boolean;
  reconnectVisible: boolean;
} {
  const open = state.connection === "open";
  return {
    estopEnabled: open,
    releaseEnabled: open && someLatched(state),
    dispatchEnabled: open && state.selection.size > 0,
    reconnectVisible: state.connection === "down",
  };
}

export function someLatched(state: ConsoleState): boolean {
  if (state.estopVisuallyLatched) return true;
  for (const view of state.robots.values()) if (view.estopLatched) return true;
  return false;
}

export function allLatched(state: ConsoleState): boolean {
  if (state.robots.size === 0) return false;
  for (const view of state.robots.values()) if (!view.estopLatched) return false;
  return true;
}
