// Gateway JSON schema (v1): envelope and payload types plus runtime guards.
// Hand-rolled guards keep the browser bundle dependency-free.

export const SCHEMA_V = 1;

export type Connectivity = "connected" | "degraded" | "lost";

export interface TelemetryFrame {
  v: number;
  robot_id: number;
  t: number;
  x: number;
  y: number;
  theta: number;
  vx: number;
  vy: number;
  omega: number;
  wheels: [number, number, number, number];
  battery_pct: number;
  estop_latched: boolean;
  estop_reason: string | null;
  cpu_pct: number;
  mem_pct: number;
}

export interface RosterRobot {
  robot_id: number;
  connectivity: Connectivity;
  estop_latched: boolean;
  estop_reason: string | null;
  battery_pct: number;
  x: number;
  y: number;
  theta: number;
  goal: [number, number] | null;
  last_seen: number;
}

export interface RosterData {
  v: number;
  t: number;
  scenario: string;
  running: boolean;
  robots: RosterRobot[];
}

export interface TargetStatus {
  robot_id: number;
  status: "pending" | "acked" | "timeout";
  acked_at: number | null;
}

export interface AckData {
  command: string;
  statuses: TargetStatus[];
}

export type Envelope =
  | { v: number; type: "telemetry"; data: TelemetryFrame }
  | { v: number; type: "roster"; data: RosterData }
  | { v: number; type: "ack"; data: AckData }
  | { v: number; type: "status" | "error"; data: Record<string, unknown> };

function isNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isTelemetry(data: unknown): data is TelemetryFrame {
  if (typeof data !== "object" || data === null) return false;
  const d = data as Record<string, unknown>;
  return (
    isNumber(d.robot_id) &&
    isNumber(d.t) &&
    isNumber(d.x) &&
    isNumber(d.y) &&
    isNumber(d.theta) &&
    typeof d.estop_latched === "boolean" &&
    Array.isArray(d.wheels) &&
    d.wheels.length === 4
  );
}

function isRoster(data: unknown): data is RosterData {
  if (typeof data !== "object" || data === null) return false;
  const d = data as Record<string, unknown>;
  if (!Array.isArray(d.robots)) return false;
  return d.robots.every((r: unknown) => {
    if (typeof r !== "object" || r === null) return false;
    const robot = r as Record<string, unknown>;
    return isNumber(robot.robot_id) && typeof robot.connectivity === "string";
  });
}

function isAck(data: unknown): data is AckData {
  if (typeof data !== "object" || data === null) return false;
  const d = data as Record<string, unknown>;
  return typeof d.command === "string" && Array.isArray(d.statuses);
}

/** Parse one gateway websocket message; null when malformed or unknown. */
export function decodeEnvelope(raw: string): Envelope | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof parsed !== "object" || parsed === null) return null;
  const message = parsed as Record<string, unknown>;
  if (message.v !== SCHEMA_V || typeof message.type !== "string") return null;
  switch (message.type) {
    case "telemetry":
      return isTelemetry(message.data)
        ? { v: SCHEMA_V, type: "telemetry", data: message.data }
        : null;
    case "roster":
      return isRoster(message.data)
        ? { v: SCHEMA_V, type: "roster", data: message.data }
        : null;
    case "ack":
      return isAck(message.data) ? { v: SCHEMA_V, type: "ack", data: message.data } : null;
    case "status":
    case "error":
      return { v: SCHEMA_V, type: message.type, data: (message.data ?? {}) as Record<string, unknown> };
    default:
      return null;
  }
}
