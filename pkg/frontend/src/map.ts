// Arena map rendering, split into a pure primitive builder (unit-tested)
// and a thin canvas painter.

import { connectivityOf, type ConsoleState, type RobotView } from "./state.js";

export const ROBOT_COLORS = [
  "#e6194b", "#3cb44b", "#4363d8", "#f58231",
  "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
];

export interface MarkerPrimitive {
  kind: "marker";
  robotId: number;
  x: number;
  y: number;
  theta: number;
  color: string;
  grayed: boolean;
  latched: boolean;
  selected: boolean;
}

export interface TrailPrimitive {
  kind: "trail";
  robotId: number;
  color: string;
  points: { x: number; y: number; alpha: number }[];
}

export interface GoalPrimitive {
  kind: "goal";
  robotId: number;
  x: number;
  y: number;
  color: string;
}

export type Primitive = MarkerPrimitive | TrailPrimitive | GoalPrimitive;

export function colorFor(robotId: number): string {
  return ROBOT_COLORS[Math.abs(robotId) % ROBOT_COLORS.length];
}

/** Trail alpha fades linearly with age; newest point fully opaque. */
export function trailAlphas(ts: number[], now: number, window = 4.0): number[] {
  return ts.map((t) => {
    const age = now - t;
    if (age <= 0) return 1.0;
    if (age >= window) return 0.0;
    return 1.0 - age / window;
  });
}

export function buildPrimitives(state: ConsoleState): Primitive[] {
  const primitives: Primitive[] = [];
  const ids = Array.from(state.robots.keys()).sort((a, b) => a - b);
  for (const id of ids) {
    const view = state.robots.get(id) as RobotView;
    const color = colorFor(id);
    if (view.goal) {
      primitives.push({ kind: "goal", robotId: id, x: view.goal[0], y: view.goal[1], color });
    }
    if (view.trail.length > 1) {
      const alphas = trailAlphas(view.trail.map((p) => p.t), state.simTime);
      primitives.push({
        kind: "trail",
        robotId: id,
        color,
        points: view.trail.map((p, i) => ({ x: p.x, y: p.y, alpha: alphas[i] })),
      });
    }
    const connectivity = connectivityOf(view, state.simTime);
    primitives.push({
      kind: "marker",
      robotId: id,
      x: view.x,
      y: view.y,
      theta: view.theta,
      color,
      grayed: connectivity === "lost",
      latched: view.estopLatched,
      selected: state.selection.has(id),
    });
  }
  return primitives;
}

export interface Viewport {
  width: number;
  height: number;
  metersAcross: number; // world meters mapped to canvas width
}

export function worldToCanvas(
  x: number,
  y: number,
  viewport: Viewport,
): { cx: number; cy: number } {
  const scale = viewport.width / viewport.metersAcross;
  return {
    cx: viewport.width / 2 + x * scale,
    cy: viewport.height / 2 - y * scale, // +y is up in the world
  };
}

const ROBOT_RADIUS_M = 0.2;

export function paint(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  viewport: Viewport,
): void {
  const scale = viewport.width / viewport.metersAcross;
  ctx.clearRect(0, 0, viewport.width, viewport.height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, viewport.width, viewport.height);

  // grid each meter
  ctx.strokeStyle = "#1e2631";
  ctx.lineWidth = 1;
  const half = viewport.metersAcross / 2;
  for (let m = -Math.floor(half); m <= Math.floor(half); m++) {
    const v = worldToCanvas(m, 0, viewport);
    ctx.beginPath();
    ctx.moveTo(v.cx, 0);
    ctx.lineTo(v.cx, viewport.height);
    ctx.stroke();
    const h = worldToCanvas(0, m, viewport);
    ctx.beginPath();
    ctx.moveTo(0, h.cy);
    ctx.lineTo(viewport.width, h.cy);
    ctx.stroke();
  }

  for (const primitive of buildPrimitives(state)) {
    if (primitive.kind === "trail") {
      for (let i = 1; i < primitive.points.length; i++) {
        const a = primitive.points[i - 1];
        const b = primitive.points[i];
        if (b.alpha <= 0) continue;
        const pa = worldToCanvas(a.x, a.y, viewport);
        const pb = worldToCanvas(b.x, b.y, viewport);
        ctx.strokeStyle = primitive.color;
        ctx.globalAlpha = b.alpha * 0.8;
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(pa.cx, pa.cy);
        ctx.lineTo(pb.cx, pb.cy);
        ctx.stroke();
      }
      ctx.globalAlpha = 1.0;
    } else if (primitive.kind === "goal") {
      const g = worldToCanvas(primitive.x, primitive.y, viewport);
      ctx.strokeStyle = primitive.color;
      ctx.lineWidth = 1.5;
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.arc(g.cx, g.cy, 0.1 * scale, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.setLineDash([]);
    } else {
      const m = worldToCanvas(primitive.x, primitive.y, viewport);
      const r = ROBOT_RADIUS_M * scale;
      ctx.fillStyle = primitive.grayed ? "#555b63" : primitive.color;
      ctx.globalAlpha = primitive.grayed ? 0.5 : 1.0;
      ctx.beginPath();
      ctx.arc(m.cx, m.cy, r, 0, 2 * Math.PI);
      ctx.fill();
      ctx.globalAlpha = 1.0;
      // heading arrow
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(m.cx, m.cy);
      ctx.lineTo(
        m.cx + Math.cos(primitive.theta) * r * 1.4,
        m.cy - Math.sin(primitive.theta) * r * 1.4,
      );
      ctx.stroke();
      if (primitive.selected) {
        ctx.strokeStyle = "#ffd23f";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.arc(m.cx, m.cy, r + 3, 0, 2 * Math.PI);
        ctx.stroke();
      }
      if (primitive.latched) {
        ctx.fillStyle = "#ff2d2d";
        ctx.font = `${Math.max(10, r)}px sans-serif`;
        ctx.fillText("STOP", m.cx - r, m.cy - r - 4);
      }
      ctx.fillStyle = "#cfd8e3";
      ctx.font = "11px sans-serif";
      ctx.fillText(String(primitive.robotId), m.cx + r + 3, m.cy + 4);
    }
  }
}
