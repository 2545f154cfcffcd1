// Just enough quaternion/vector math to place block corners and hand frames
// on screen. Quaternions are scalar-first (w, x, y, z), matching the wire.

import type { Pose7 } from './protocol.js';

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

// half extents of every block, long/medium/short — the server's dimensions
export const BLOCK_HALF: Vec3 = [0.045, 0.015, 0.0075];

export function quatOf(pose: Pose7): Quat {
  return [pose[3], pose[4], pose[5], pose[6]];
}

export function posOf(pose: Pose7): Vec3 {
  return [pose[0], pose[1], pose[2]];
}

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v' = v + 2w(u×v) + 2(u×(u×v)) with u the vector part
  const [w, x, y, z] = q;
  const [vx, vy, vz] = v;
  const cx = y * vz - z * vy;
  const cy = z * vx - x * vz;
  const cz = x * vy - y * vx;
  const dx = y * cz - z * cy;
  const dy = z * cx - x * cz;
  const dz = x * cy - y * cx;
  return [vx + 2 * (w * cx + dx), vy + 2 * (w * cy + dy), vz + 2 * (w * cz + dz)];
}

export function quatFromYaw(yaw: number): Quat {
  return [Math.cos(yaw / 2), 0, 0, Math.sin(yaw / 2)];
}

export function quatConj(q: Quat): Quat {
  return [q[0], -q[1], -q[2], -q[3]];
}

/** Rigid composition a∘b: apply b in a's frame. */
export function composePose(a: Pose7, b: Pose7): Pose7 {
  const p = add(posOf(a), quatRotate(quatOf(a), posOf(b)));
  const q = quatMul(quatOf(a), quatOf(b));
  return [p[0], p[1], p[2], q[0], q[1], q[2], q[3]];
}

export function inversePose(a: Pose7): Pose7 {
  const qi = quatConj(quatOf(a));
  const p = quatRotate(qi, posOf(a));
  return [-p[0], -p[1], -p[2], qi[0], qi[1], qi[2], qi[3]];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

/** The eight corners of a block at `pose`, world frame. */
export function blockCorners(pose: Pose7, half: Vec3 = BLOCK_HALF): Vec3[] {
  const q = quatOf(pose);
  const p = posOf(pose);
  const out: Vec3[] = [];
  for (const sx of [-1, 1]) {
    for (const sy of [-1, 1]) {
      for (const sz of [-1, 1]) {
        out.push(add(p, quatRotate(q, [sx * half[0], sy * half[1], sz * half[2]])));
      }
    }
  }
  return out;
}

/** Half-height of a block along world z at the given orientation. */
export function verticalExtent(pose: Pose7, half: Vec3 = BLOCK_HALF): number {
  const q = quatOf(pose);
  let e = 0;
  const axes: Vec3[] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
  for (let i = 0; i < 3; i++) {
    const h = half[i]!;
    e += h * Math.abs(quatRotate(q, axes[i]!)[2]);
  }
  return e;
}
