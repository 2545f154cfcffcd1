/**
 * Canvas-2D scene painter: orthographic cuboids, assist decor, HUD.
 *
 * Pure function of (ViewState, Camera) -> pixels; no retained scene graph.
 */

import type { Camera } from './camera.js';
import { project } from './camera.js';
import type { Vec3 } from './geom.js';
import { BLOCK_HALF, blockCorners } from './geom.js';
import type { Hand, Pose7 } from './protocol.js';
import { BEHAVIOR_LABELS } from './protocol.js';
import type { ViewState } from './view.js';
import { PULSE_MS, activeRefs } from './view.js';

// faces as corner indices (corner bit order: x,y,z; minus side first)
const FACES: Array<{ idx: [number, number, number, number]; n: Vec3 }> = [
  { idx: [0, 1, 3, 2], n: [-1, 0, 0] },
  { idx: [4, 6, 7, 5], n: [1, 0, 0] },
  { idx: [0, 4, 5, 1], n: [0, -1, 0] },
  { idx: [2, 3, 7, 6], n: [0, 1, 0] },
  { idx: [0, 2, 6, 4], n: [0, 0, -1] },
  { idx: [1, 5, 7, 3], n: [0, 0, 1] },
];

const LIGHT: Vec3 = [-0.37, 0.28, 0.89]; // unit-ish, from over the left shoulder

const TABLE = { x0: -0.65, x1: 0.95, y0: -0.85, y1: 0.85 };

const INK = {
  bg: '#10141a',
  table: '#1d242e',
  tableHi: '#274033',
  grid: '#2a3340',
  text: '#d7dde6',
  dim: '#8a94a3',
  accent: '#53d18a',
  warn: '#e4b44c',
  error: '#e06c5b',
  ghost: '#53a8d1',
  left: '#c792ea',
  right: '#82aaff',
};

function hueOf(id: string): number {
  let h = 0;
  for (let i = 0; i < id.length; i++) h = (h * 31 + id.charCodeAt(i)) % 360;
  return h;
}

function quatRotateN(q: Pose7, n: Vec3): Vec3 {
  // rotate face normal by the pose quaternion (w,x,y,z at slots 3..6)
  const w = q[3],
    x = q[4],
    y = q[5],
    z = q[6];
  const ux = y * n[2] - z * n[1];
  const uy = z * n[0] - x * n[2];
  const uz = x * n[1] - y * n[0];
  const vx = y * uz - z * uy;
  const vy = z * ux - x * uz;
  const vz = x * uy - y * ux;
  return [n[0] + 2 * (w * ux + vx), n[1] + 2 * (w * uy + vy), n[2] + 2 * (w * uz + vz)];
}

interface Screen {
  toPx(p: Vec3): [number, number, number]; // x, y, depth
  scale: number;
}

/** Pixels per meter for a canvas of the given size. */
export function viewScale(w: number, h: number): number {
  return Math.min(w / 1.9, h / 1.3);
}

function makeScreen(cam: Camera, w: number, h: number): Screen {
  const scale = viewScale(w, h);
  return {
    scale,
    toPx(p: Vec3) {
      const s = project(cam, p);
      return [w / 2 + s.x * scale, h / 2 - s.y * scale, s.depth];
    },
  };
}

function face2d(ctx: CanvasRenderingContext2D, pts: Array<[number, number, number]>): void {
  ctx.beginPath();
  ctx.moveTo(pts[0]![0], pts[0]![1]);
  for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i]![0], pts[i]![1]);
  ctx.closePath();
}

function drawCuboid(
  ctx: CanvasRenderingContext2D,
  scr: Screen,
  cam: Camera,
  pose: Pose7,
  fill: (lambert: number) => string,
  opts: { alpha?: number; outline?: string; dashed?: boolean } = {},
): void {
  const corners = blockCorners(pose, BLOCK_HALF).map((c) => scr.toPx(c));
  const visible = FACES.map((f) => {
    const n = quatRotateN(pose, f.n);
    const toward = -(n[0] * cam.forward[0] + n[1] * cam.forward[1] + n[2] * cam.forward[2]);
    const lam =
      0.45 + 0.55 * Math.max(0, n[0] * LIGHT[0] + n[1] * LIGHT[1] + n[2] * LIGHT[2]);
    const pts = f.idx.map((i) => corners[i]!);
    const depth = (pts[0]![2] + pts[1]![2] + pts[2]![2] + pts[3]![2]) / 4;
    return { toward, lam, pts, depth };
  })
    .filter((f) => f.toward > 1e-9)
    .sort((a, b) => b.depth - a.depth);

  ctx.save();
  if (opts.alpha !== undefined) ctx.globalAlpha = opts.alpha;
  for (const f of visible) {
    face2d(ctx, f.pts);
    ctx.fillStyle = fill(f.lam);
    ctx.fill();
    ctx.strokeStyle = 'rgba(0,0,0,0.35)';
    ctx.lineWidth = 1;
    ctx.stroke();
  }
  if (opts.outline) {
    ctx.lineWidth = 2.5;
    ctx.strokeStyle = opts.outline;
    if (opts.dashed) ctx.setLineDash([5, 4]);
    for (const f of visible) {
      face2d(ctx, f.pts);
      ctx.stroke();
    }
  }
  ctx.restore();
}

function drawTable(ctx: CanvasRenderingContext2D, scr: Screen, tinted: boolean): void {
  const c = [
    scr.toPx([TABLE.x0, TABLE.y0, 0]),
    scr.toPx([TABLE.x1, TABLE.y0, 0]),
    scr.toPx([TABLE.x1, TABLE.y1, 0]),
    scr.toPx([TABLE.x0, TABLE.y1, 0]),
  ];
  face2d(ctx, c);
  ctx.fillStyle = tinted ? INK.tableHi : INK.table;
  ctx.fill();
  ctx.strokeStyle = INK.grid;
  ctx.lineWidth = 1;
  for (let gx = -0.6; gx <= 0.91; gx += 0.1) {
    const a = scr.toPx([gx, TABLE.y0, 0]);
    const b = scr.toPx([gx, TABLE.y1, 0]);
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  }
  for (let gy = -0.8; gy <= 0.81; gy += 0.1) {
    const a = scr.toPx([TABLE.x0, gy, 0]);
    const b = scr.toPx([TABLE.x1, gy, 0]);
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  }
}

function drawHand(
  ctx: CanvasRenderingContext2D,
  scr: Screen,
  pose: Pose7,
  color: string,
  holding: boolean,
  isActive: boolean,
): void {
  const [px, py] = scr.toPx([pose[0], pose[1], pose[2]]);
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = isActive ? 2.5 : 1.5;
  const r = holding ? 7 : 11;
  ctx.beginPath();
  ctx.moveTo(px - r - 5, py);
  ctx.lineTo(px - r, py);
  ctx.moveTo(px + r, py);
  ctx.lineTo(px + r + 5, py);
  ctx.moveTo(px, py - r - 5);
  ctx.lineTo(px, py - r);
  ctx.moveTo(px, py + r);
  ctx.lineTo(px, py + r + 5);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(px, py, r, 0, Math.PI * 2);
  ctx.stroke();
  if (holding) {
    ctx.fillStyle = color;
    ctx.globalAlpha = 0.4;
    ctx.fill();
  }
  ctx.restore();
}

function drawPulses(
  ctx: CanvasRenderingContext2D,
  scr: Screen,
  v: ViewState,
  now: number,
): void {
  if (!v.world) return;
  for (const p of v.pulses) {
    const age = (now - p.bornAt) / PULSE_MS;
    if (age >= 1) continue;
    const hp = v.world.hands[p.hand];
    const [px, py] = scr.toPx([hp[0], hp[1], hp[2]]);
    ctx.save();
    ctx.globalAlpha = 1 - age;
    ctx.strokeStyle = INK.warn;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(px, py, 12 + 26 * age, 0, Math.PI * 2);
    ctx.stroke();
    ctx.restore();
  }
}

function hud(ctx: CanvasRenderingContext2D, w: number, v: ViewState, activeHand: Hand, camName: string): void {
  ctx.save();
  ctx.font = '13px ui-monospace, Menlo, monospace';
  ctx.fillStyle = INK.text;
  const mode = v.mode ? v.mode.toUpperCase() : '--';
  ctx.fillText(`task ${v.task || '--'}   mode ${mode}   cam ${camName}   tick ${v.trialTick}`, 12, 20);
  for (const hand of ['left', 'right'] as Hand[]) {
    const row = v.behaviors[hand];
    const label = row > 0 ? `${row} ${BEHAVIOR_LABELS[row] ?? '?'}` : 'idle';
    const y = hand === 'left' ? 40 : 58;
    ctx.fillStyle = hand === activeHand ? INK.accent : INK.dim;
    ctx.fillText(`${hand === activeHand ? '>' : ' '} ${hand.padEnd(5)} ${label}`, 12, y);
  }
  if (v.planLabel) {
    ctx.fillStyle = INK.dim;
    ctx.fillText(`plan  ${v.planLabel}`, 12, 78);
  }
  if (v.done) {
    ctx.fillStyle = INK.accent;
    ctx.fillText('trial complete', 12, 96);
  }
  if (v.lastError) {
    ctx.fillStyle = INK.error;
    ctx.fillText(`server: ${v.lastError}`, 12, 114);
  }
  const help = 'drag move · wheel lift · q/e spin · tab hand · space grasp · f open · c camera';
  ctx.fillStyle = INK.dim;
  ctx.fillText(help, 12, ctx.canvas.height - 12);
  ctx.restore();
}

function metricsPanel(ctx: CanvasRenderingContext2D, w: number, v: ViewState): void {
  if (!v.metrics) return;
  const m = v.metrics;
  const lines = [
    `success   ${m.success}`,
    `time      ${m.time.toFixed(2)} s`,
    `progress  ${(m.progress * 100).toFixed(0)} %`,
    `pos err   ${m.position_error === null ? '--' : m.position_error.toFixed(4) + ' m'}`,
    `ori err   ${m.orientation_error_deg === null ? '--' : m.orientation_error_deg.toFixed(2) + ' deg'}`,
  ];
  const bw = 210;
  const bh = 20 + lines.length * 17;
  const x0 = w - bw - 12;
  const y0 = 12;
  ctx.save();
  ctx.fillStyle = 'rgba(16,20,26,0.88)';
  ctx.strokeStyle = m.success ? INK.accent : INK.warn;
  ctx.lineWidth = 1.5;
  ctx.fillRect(x0, y0, bw, bh);
  ctx.strokeRect(x0, y0, bw, bh);
  ctx.font = '13px ui-monospace, Menlo, monospace';
  ctx.fillStyle = INK.text;
  ctx.fillText('trial metrics', x0 + 10, y0 + 17);
  ctx.fillStyle = INK.dim;
  lines.forEach((ln, i) => ctx.fillText(ln, x0 + 10, y0 + 36 + i * 17));
  ctx.restore();
}

function banner(ctx: CanvasRenderingContext2D, w: number, text: string): void {
  ctx.save();
  ctx.fillStyle = 'rgba(224,108,91,0.92)';
  ctx.fillRect(0, 0, w, 28);
  ctx.fillStyle = '#15100f';
  ctx.font = 'bold 13px ui-monospace, Menlo, monospace';
  const tw = ctx.measureText(text).width;
  ctx.fillText(text, (w - tw) / 2, 19);
  ctx.restore();
}

export interface RenderOpts {
  activeHand: Hand;
  camName: string;
  now: number;
  statusNote: string;
}

export function render(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  v: ViewState,
  opts: RenderOpts,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  const scr = makeScreen(cam, w, h);
  ctx.fillStyle = INK.bg;
  ctx.fillRect(0, 0, w, h);

  const planeLit = activeRefs(v, 'plane_highlight').size > 0;
  drawTable(ctx, scr, planeLit);

  if (v.world) {
    const objLit = activeRefs(v, 'object_highlight');
    const blocks = Object.entries(v.world.blocks)
      .map(([id, pose]) => ({ id, pose, depth: scr.toPx([pose[0], pose[1], pose[2]])[2] }))
      .sort((a, b) => b.depth - a.depth);
    for (const b of blocks) {
      const hue = hueOf(b.id);
      drawCuboid(
        ctx,
        scr,
        cam,
        b.pose,
        (lam) => `hsl(${hue} 42% ${Math.round(30 + 34 * lam)}%)`,
        objLit.has(b.id) ? { outline: INK.accent } : {},
      );
    }

    if (v.ghost) {
      drawCuboid(ctx, scr, cam, v.ghost, (lam) => `hsl(203 60% ${Math.round(40 + 25 * lam)}%)`, {
        alpha: 0.38,
        outline: INK.ghost,
        dashed: true,
      });
    }

    for (const hand of ['left', 'right'] as Hand[]) {
      drawHand(
        ctx,
        scr,
        v.world.hands[hand],
        hand === 'left' ? INK.left : INK.right,
        v.world.held[hand] !== null,
        hand === opts.activeHand,
      );
    }
    drawPulses(ctx, scr, v, opts.now);
  }

  hud(ctx, w, v, opts.activeHand, opts.camName);
  metricsPanel(ctx, w, v);
  if (!v.connected) banner(ctx, w, `disconnected — ${opts.statusNote || 'retrying…'}`);
}
