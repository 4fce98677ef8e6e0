import { describe, expect, it } from "vitest";

import { decodeEnvelope, type Envelope, type TelemetryFrame } from "../src/schema.js";
import {
  allLatched,
  connectivityOf,
  controls,
  initialState,
  reduce,
  TRAIL_LENGTH,
  type ConsoleEvent,
  type ConsoleState,
} from "../src/state.js";

function telemetry(robotId: number, t: number, extra: Partial<TelemetryFrame> = {}): ConsoleEvent {
  const frame: TelemetryFrame = {
    v: 1, robot_id: robotId, t, x: t, y: 0, theta: 0.3,
    vx: 1, vy: 0, omega: 0, wheels: [0, 0, 0, 0],
    battery_pct: 98, estop_latched: false, estop_reason: null,
    cpu_pct: 20, mem_pct: 30,
    ...extra,
  };
  return { kind: "envelope", envelope: { v: 1, type: "telemetry", data: frame } };
}

function rosterEvent(ids: number[], t = 0): ConsoleEvent {
  return {
    kind: "envelope",
    envelope: {
      v: 1,
      type: "roster",
      data: {
        v: 1, t, scenario: "swap_8", running: true,
        robots: ids.map((id) => ({
          robot_id: id, connectivity: "connected" as const,
          estop_latched: false, estop_reason: null, battery_pct: 100,
          x: 0, y: 0, theta: 0, goal: [1, -1] as [number, number], last_seen: t,
        })),
      },
    },
  };
}

function runEvents(events: ConsoleEvent[]): ConsoleState {
  let state = initialState();
  for (const event of events) state = reduce(state, event);
  return state;
}

describe("reducer", () => {
  it("is a pure function of the event stream (replay reproduces the view)", () => {
    const events: ConsoleEvent[] = [
      { kind: "ws_open" },
      rosterEvent([16, 17, 18]),
      telemetry(16, 0.1),
      telemetry(17, 0.1),
      { kind: "select", robotId: 16, selected: true },
      telemetry(16, 0.2, { estop_latched: true, estop_reason: "operator" }),
    ];
    const a = runEvents(events);
    const b = runEvents(events);
    expect(b).toEqual(a);
    // inputs were not mutated along the way: a third replay still matches
    expect(runEvents(events)).toEqual(a);
  });

  it("does not mutate prior states", () => {
    const s0 = initialState();
    const s1 = reduce(s0, rosterEvent([16]));
    const s2 = reduce(s1, telemetry(16, 0.5));
    expect(s0.robots.size).toBe(0);
    expect(s1.robots.get(16)!.trail.length).toBe(0);
    expect(s2.robots.get(16)!.trail.length).toBe(1);
  });

  it("keeps a bounded, ordered trail per robot", () => {
    let state = runEvents([rosterEvent([16])]);
    for (let i = 0; i < TRAIL_LENGTH + 40; i++) {
      state = reduce(state, telemetry(16, i * 0.1));
    }
    const trail = state.robots.get(16)!.trail;
    expect(trail.length).toBe(TRAIL_LENGTH);
    expect(trail[trail.length - 1].t).toBeCloseTo((TRAIL_LENGTH + 39) * 0.1, 9);
    for (let i = 1; i < trail.length; i++) expect(trail[i].t).toBeGreaterThan(trail[i - 1].t);
  });

  it("marks a robot lost when telemetry goes stale", () => {
    let state = runEvents([rosterEvent([16]), telemetry(16, 1.0)]);
    expect(connectivityOf(state.robots.get(16)!, 1.05)).toBe("connected");
    expect(connectivityOf(state.robots.get(16)!, 1.3)).toBe("degraded");
    expect(connectivityOf(state.robots.get(16)!, 2.0)).toBe("lost");
  });

  it("tracks selection and all-latched", () => {
    let state = runEvents([
      rosterEvent([16, 17]),
      { kind: "select_all", selected: true },
      telemetry(16, 0.1, { estop_latched: true, estop_reason: "operator" }),
    ]);
    expect(state.selection).toEqual(new Set([16, 17]));
    expect(allLatched(state)).toBe(false);
    state = reduce(state, telemetry(17, 0.1, { estop_latched: true, estop_reason: "operator" }));
    expect(allLatched(state)).toBe(true);
  });
});

describe("controls", () => {
  it("estop is enabled whenever the gateway is reachable", () => {
    let state = runEvents([{ kind: "ws_open" }, rosterEvent([16])]);
    expect(controls(state).estopEnabled).toBe(true);
    // selection state never gates the stop control
    state = reduce(state, { kind: "select_all", selected: false });
    expect(controls(state).estopEnabled).toBe(true);
    expect(controls(state).dispatchEnabled).toBe(false);
  });

  it("gateway down disables everything except reconnect", () => {
    const state = runEvents([{ kind: "ws_open" }, rosterEvent([16]), { kind: "ws_down" }]);
    const ui = controls(state);
    expect(ui.estopEnabled).toBe(false);
    expect(ui.dispatchEnabled).toBe(false);
    expect(ui.reconnectVisible).toBe(true);
  });

  it("release only offered once something latched", () => {
    let state = runEvents([{ kind: "ws_open" }, rosterEvent([16])]);
    expect(controls(state).releaseEnabled).toBe(false);
    state = reduce(state, telemetry(16, 0.1, { estop_latched: true, estop_reason: "button" }));
    expect(controls(state).releaseEnabled).toBe(true);
  });
});

describe("schema", () => {
  it("decodes valid envelopes", () => {
    const raw = JSON.stringify({
      v: 1, type: "telemetry",
      data: {
        v: 1, robot_id: 16, t: 0.5, x: 1, y: 2, theta: 0, vx: 0, vy: 0, omega: 0,
        wheels: [0, 0, 0, 0], battery_pct: 99, estop_latched: false,
        estop_reason: null, cpu_pct: 10, mem_pct: 20,
      },
    });
    const envelope = decodeEnvelope(raw) as Extract<Envelope, { type: "telemetry" }>;
    expect(envelope.type).toBe("telemetry");
    expect(envelope.data.robot_id).toBe(16);
  });

  it("rejects malformed input instead of throwing", () => {
    expect(decodeEnvelope("not json")).toBeNull();
    expect(decodeEnvelope("{}")).toBeNull();
    expect(decodeEnvelope(JSON.stringify({ v: 2, type: "telemetry", data: {} }))).toBeNull();
    expect(decodeEnvelope(JSON.stringify({ v: 1, type: "telemetry", data: { robot_id: "x" } }))).toBeNull();
    expect(decodeEnvelope(JSON.stringify({ v: 1, type: "mystery", data: {} }))).toBeNull();
  });
});
