// DOM wiring: roster panel, command palette, the always-visible stop button,
// and the arena canvas. All rendering reads only ConsoleState.

import { paint, type Viewport } from "./map.js";
import type { ConsoleSession } from "./session.js";
import { allLatched, connectivityOf, controls, type ConsoleState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class ConsoleUi {
  private readonly session: ConsoleSession;
  private readonly canvas: HTMLCanvasElement;
  private readonly viewport: Viewport;

  constructor(session: ConsoleSession) {
    this.session = session;
    this.canvas = el<HTMLCanvasElement>("arena");
    this.viewport = {
      width: this.canvas.width,
      height: this.canvas.height,
      metersAcross: 7.0,
    };
    this.bind();
  }

  private bind(): void {
    el<HTMLButtonElement>("estop").addEventListener("click", () => {
      void this.session.estopAll();
    });
    el<HTMLButtonElement>("release").addEventListener("click", () => {
      const confirmed = window.confirm("Release the fleet emergency stop?");
      void this.session.estopReleaseAll(confirmed);
    });
    el<HTMLButtonElement>("reconnect").addEventListener("click", () => {
      this.session.connect();
    });
    el<HTMLButtonElement>("select-all").addEventListener("click", () => {
      this.session.dispatchEvent({ kind: "select_all", selected: true });
    });
    el<HTMLButtonElement>("select-none").addEventListener("click", () => {
      this.session.dispatchEvent({ kind: "select_all", selected: false });
    });
    el<HTMLButtonElement>("cmd-idle").addEventListener("click", () => {
      void this.session.dispatch({ command: "idle", targets: this.targets() });
    });
    el<HTMLButtonElement>("cmd-nudge").addEventListener("click", () => {
      void this.session.dispatch({
        command: "body_twist",
        targets: this.targets(),
        twist: { vx: 0.3, vy: 0.0, omega: 0.0 },
      });
    });
    el<HTMLButtonElement>("cmd-circle").addEventListener("click", () => {
      void this.session.dispatch({
        command: "set_trajectory",
        targets: this.targets(),
        trajectory: { kind: "circle", diameter: 1.5, speed: 1.0 },
      });
    });
    el<HTMLButtonElement>("cmd-line").addEventListener("click", () => {
      void this.session.dispatch({
        command: "set_trajectory",
        targets: this.targets(),
        trajectory: { kind: "line", length: 2.0, a_max: 2.0, v_max: 1.0 },
      });
    });
  }

  private targets(): number[] {
    return Array.from(this.session.state.selection).sort((a, b) => a - b);
  }

  render(state: ConsoleState): void {
    const ui = controls(state);
    el("banner").classList.toggle("hidden", state.connection === "open");
    el("banner").textContent =
      state.connection === "down"
        ? "Gateway unreachable - commands disabled"
        : "Connecting to gateway...";
    el<HTMLButtonElement>("reconnect").classList.toggle("hidden", !ui.reconnectVisible);
    el<HTMLButtonElement>("estop").disabled = !ui.estopEnabled;
    el<HTMLButtonElement>("release").disabled = !ui.releaseEnabled;
    for (const id of ["cmd-idle", "cmd-nudge", "cmd-circle", "cmd-line"]) {
      el<HTMLButtonElement>(id).disabled = !ui.dispatchEnabled;
    }
    el("estop").classList.toggle("latched", allLatched(state) || state.estopVisuallyLatched);
    el("scenario").textContent = state.scenario ? `${state.scenario} @ t=${state.simTime.toFixed(1)}s` : "";

    this.renderRoster(state);
    this.renderAcks(state);
    const ctx = this.canvas.getContext("2d");
    if (ctx) paint(ctx, state, this.viewport);
  }

  private renderRoster(state: ConsoleState): void {
    const list = el("roster");
    list.innerHTML = "";
    const ids = Array.from(state.robots.keys()).sort((a, b) => a - b);
    for (const id of ids) {
      const view = state.robots.get(id)!;
      const row = document.createElement("label");
      row.className = "robot-row";
      const checkbox = document.createElement("input");
      checkbox.type = "checkbox";
      checkbox.checked = state.selection.has(id);
      checkbox.addEventListener("change", () => {
        this.session.dispatchEvent({ kind: "select", robotId: id, selected: checkbox.checked });
      });
      const connectivity = connectivityOf(view, state.simTime);
      const dot = document.createElement("span");
      dot.className = `dot ${connectivity}`;
      const text = document.createElement("span");
      text.textContent = `#${id}  ${view.battery.toFixed(0)}%` + (view.estopLatched ? "  STOP" : "");
      if (view.estopLatched) text.classList.add("stop-text");
      row.append(checkbox, dot, text);
      list.appendChild(row);
    }
  }

  private renderAcks(state: ConsoleState): void {
    const box = el("acks");
    if (!state.lastAck) {
      box.textContent = "";
      return;
    }
    const badges = state.lastAck.statuses
      .map((s) => `#${s.robot_id}:${s.status}`)
      .join("  ");
    box.textContent = `${state.lastAck.command} -> ${badges}`;
  }
}
