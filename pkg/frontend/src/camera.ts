// Fixed orthographic cameras over the workspace. Free-fly would fight the
// mouse teleoperation, so the view is selectable but never draggable.

import { dot, sub, type Vec3 } from './geom.js';

export interface Camera {
  name: string;
  /** screen-right direction in world coordinates (unit) */
  right: Vec3;
  /** screen-up direction in world coordinates (unit) */
  up: Vec3;
  /** view direction, used only for depth sorting (unit, into the screen) */
  forward: Vec3;
  /** world point drawn at the canvas centre */
  look: Vec3;
}

function oblique(name: string, azimuthDeg: number, elevationDeg: number, look: Vec3): Camera {
  const az = (azimuthDeg * Math.PI) / 180;
  const el = (elevationDeg * Math.PI) / 180;
  const forward: Vec3 = [Math.cos(el) * Math.cos(az), Math.cos(el) * Math.sin(az), -Math.sin(el)];
  // right = forward x worldUp, up = right x forward (all unit by construction)
  const rn = Math.hypot(forward[1], forward[0]);
  const right: Vec3 = [forward[1] / rn, -forward[0] / rn, 0];
  const up: Vec3 = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  return { name, right, up, forward, look };
}

export const CAMERAS: Camera[] = [
  // behind the operator, y increasing away
  { name: 'front', right: [1, 0, 0], up: [0, 0, 1], forward: [0, 1, 0], look: [0.2, 0, 0.06] },
  { name: 'side', right: [0, 1, 0], up: [0, 0, 1], forward: [-1, 0, 0], look: [0.2, 0, 0.06] },
  { name: 'top', right: [1, 0, 0], up: [0, 1, 0], forward: [0, 0, -1], look: [0.2, -0.05, 0] },
  oblique('iso', 45, 30, [0.2, -0.05, 0.05]),
];

export interface Projected {
  x: number;
  y: number;
  depth: number;
}

/** Orthographic projection into abstract view units (y grows upward). */
export function project(cam: Camera, p: Vec3): Projected {
  const d = sub(p, cam.look);
  return { x: dot(d, cam.right), y: dot(d, cam.up), depth: dot(d, cam.forward) };
}

/**
 * World-space motion for a pointer drag of (dx, dy) view units: the hand
 * moves in the camera-aligned plane, so dragging right always moves along
 * screen-right and dragging up along screen-up.
 */
export function dragDelta(cam: Camera, dx: number, dy: number): Vec3 {
  return [
    dx * cam.right[0] + dy * cam.up[0],
    dx * cam.right[1] + dy * cam.up[1],
    dx * cam.right[2] + dy * cam.up[2],
  ];
}
