// Gateway client: one websocket for the event stream, REST for commands.
// The websocket constructor and fetch are injectable so tests can drive the
// session from node.

import { decodeEnvelope, type AckData, type TargetStatus } from "./schema.js";
import {
  initialState,
  reduce,
  type ConsoleEvent,
  type ConsoleState,
} from "./state.js";

export interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;
export type FetchLike = typeof fetch;

export interface SessionOptions {
  gateway: string; // e.g. http://127.0.0.1:8000
  makeWebSocket?: WsFactory;
  fetchImpl?: FetchLike;
  onChange?: (state: ConsoleState) => void;
}

export interface DispatchBody {
  command: "body_twist" | "set_trajectory" | "idle" | "ping";
  targets: number[];
  twist?: { vx: number; vy: number; omega: number };
  trajectory?: Record<string, unknown>;
}

export class ConsoleSession {
  state: ConsoleState = initialState();
  private readonly gateway: string;
  private readonly wsUrl: string;
  private readonly makeWs: WsFactory;
  private readonly fetchImpl: FetchLike;
  private readonly onChange?: (state: ConsoleState) => void;
  private ws: WsLike | null = null;

  constructor(options: SessionOptions) {
    this.gateway = options.gateway.replace(/\/$/, "");
    this.wsUrl = this.gateway.replace(/^http/, "ws") + "/api/v1/ws";
    this.makeWs =
      options.makeWebSocket ??
      ((url: string) => new WebSocket(url) as unknown as WsLike);
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.onChange = options.onChange;
  }

  dispatchEvent(event: ConsoleEvent): void {
    this.state = reduce(this.state, event);
    this.onChange?.(this.state);
  }

  connect(): void {
    const ws = this.makeWs(this.wsUrl);
    this.ws = ws;
    ws.onopen = () => this.dispatchEvent({ kind: "ws_open" });
    ws.onclose = () => this.dispatchEvent({ kind: "ws_down" });
    ws.onerror = () => this.dispatchEvent({ kind: "ws_down" });
    ws.onmessage = (ev) => {
      const envelope = decodeEnvelope(String(ev.data));
      if (envelope !== null) this.dispatchEvent({ kind: "envelope", envelope });
    };
  }

  disconnect(): void {
    this.ws?.close();
    this.ws = null;
  }

  // -- commands (REST) -------------------------------------------------------

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.gateway + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`gateway ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  /** Send a command to the given robots; resolves with per-target statuses. */
  async dispatch(body: DispatchBody): Promise<TargetStatus[]> {
    if (body.targets.length === 0) throw new Error("empty selection");
    const data = await this.post<AckData & { statuses: TargetStatus[] }>(
      "/api/v1/dispatch",
      body,
    );
    this.dispatchEvent({
      kind: "envelope",
      envelope: { v: 1, type: "ack", data: { command: body.command, statuses: data.statuses } },
    });
    return data.statuses;
  }

  /** Latch every roster robot; targets the whole fleet regardless of selection. */
  async estopAll(): Promise<TargetStatus[]> {
    const data = await this.post<{ statuses: TargetStatus[] }>("/api/v1/estop", {
      action: "engage",
    });
    this.dispatchEvent({ kind: "estop_visual", latched: true });
    this.dispatchEvent({
      kind: "envelope",
      envelope: { v: 1, type: "ack", data: { command: "estop", statuses: data.statuses } },
    });
    return data.statuses;
  }

  /** Release needs the explicit confirm flag; without it the gateway refuses. */
  async estopReleaseAll(confirm: boolean): Promise<boolean> {
    const data = await this.post<{ applied: boolean; statuses: TargetStatus[] }>(
      "/api/v1/estop",
      { action: "release", confirm },
    );
    if (data.applied) this.dispatchEvent({ kind: "estop_visual", latched: false });
    return data.applied;
  }

  async roster(): Promise<void> {
    const response = await this.fetchImpl(this.gateway + "/api/v1/roster");
    if (!response.ok) throw new Error(`roster failed: ${response.status}`);
    const data = await response.json();
    this.dispatchEvent({ kind: "envelope", envelope: { v: 1, type: "roster", data } });
  }
}
