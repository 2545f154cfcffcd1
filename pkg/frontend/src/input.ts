/**
 * Pointer/keyboard state -> controller_input samples.
 *
 * One hand is driven at a time (mice are not bimanual); the other holds its
 * last commanded pose. Toggling hands adopts the newly active hand's streamed
 * pose so the cursor never teleports the arm across the bench.
 */

import type { Camera } from './camera.js';
import { dragDelta } from './camera.js';
import type { Quat, Vec3 } from './geom.js';
import { quatFromYaw } from './geom.js';
import type { ControllerSample, Hand, Pose7, WorldSnapshot } from './protocol.js';

/** Workspace soft bounds; the sim clamps harder, this just keeps UI sane. */
const LO: Vec3 = [-0.65, -0.85, 0.0];
const HI: Vec3 = [0.95, 0.85, 0.6];

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

function yawOf(q: Quat): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

interface HandMem {
  pos: Vec3;
  yaw: number;
  seeded: boolean;
}

export class InputController {
  active: Hand = 'right';
  grasp = false;
  fingerOpen = false;
  private mem: Record<Hand, HandMem> = {
    left: { pos: [0.1, 0.25, 0.25], yaw: 0, seeded: false },
    right: { pos: [0.1, -0.25, 0.25], yaw: 0, seeded: false },
  };

  /** Adopt streamed poses for hands we have not commanded yet. */
  seedFrom(world: WorldSnapshot): void {
    for (const hand of ['left', 'right'] as Hand[]) {
      const m = this.mem[hand];
      if (m.seeded) continue;
      const p = world.hands[hand];
      m.pos = [p[0], p[1], p[2]];
      m.yaw = yawOf([p[3], p[4], p[5], p[6]]);
      m.seeded = true;
    }
  }

  /** Switch hands; the incoming hand re-adopts its streamed pose if known. */
  toggleHand(world?: WorldSnapshot | null): void {
    this.active = this.active === 'left' ? 'right' : 'left';
    if (world) {
      const p = world.hands[this.active];
      const m = this.mem[this.active];
      m.pos = [p[0], p[1], p[2]];
      m.yaw = yawOf([p[3], p[4], p[5], p[6]]);
      m.seeded = true;
    }
    // releasing buttons on toggle avoids ghost-grasping with the idle hand
    this.grasp = false;
    this.fingerOpen = false;
  }

  /** Pointer drag in screen px, mapped into the camera plane. */
  drag(dxPx: number, dyPx: number, cam: Camera, metersPerPixel: number): void {
    const d = dragDelta(cam, dxPx * metersPerPixel, -dyPx * metersPerPixel);
    const m = this.mem[this.active];
    m.pos = [
      clamp(m.pos[0] + d[0], LO[0], HI[0]),
      clamp(m.pos[1] + d[1], LO[1], HI[1]),
      clamp(m.pos[2] + d[2], LO[2], HI[2]),
    ];
  }

  /** Scroll wheel: raise/lower the hand. */
  lift(dz: number): void {
    const m = this.mem[this.active];
    m.pos = [m.pos[0], m.pos[1], clamp(m.pos[2] + dz, LO[2], HI[2])];
  }

  /** Keys: rotate the gripper about vertical. */
  spin(dYaw: number): void {
    this.mem[this.active].yaw += dYaw;
  }

  setGrasp(v: boolean): void {
    this.grasp = v;
  }

  setFingerOpen(v: boolean): void {
    this.fingerOpen = v;
  }

  pose(hand: Hand = this.active): Pose7 {
    const m = this.mem[hand];
    const q = quatFromYaw(m.yaw);
    return [m.pos[0], m.pos[1], m.pos[2], q[0], q[1], q[2], q[3]];
  }

  /** Snapshot for this UI frame; stamped and serialized by the wire layer. */
  sample(): ControllerSample {
    return {
      hand: this.active,
      pose: this.pose(),
      grasp_button: this.grasp,
      finger_open: this.fingerOpen,
    };
  }
}
