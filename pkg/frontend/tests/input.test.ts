import { beforeEach, describe, expect, it } from 'vitest';

import { CAMERAS } from '../src/camera';
import { InputController } from '../src/input';
import type { WorldSnapshot } from '../src/protocol';

const TOP = CAMERAS[2]!;

function world(): WorldSnapshot {
  return {
    blocks: {},
    hands: {
      left: [0.12, 0.3, 0.2, 1, 0, 0, 0],
      right: [0.18, -0.3, 0.22, 0, 0, 0, 1], // yaw = pi
    },
    held: { left: null, right: null },
    time: 0,
  };
}

let inp: InputController;
beforeEach(() => {
  inp = new InputController();
});

describe('seeding', () => {
  it('adopts streamed poses once, then trusts its own memory', () => {
    inp.seedFrom(world());
    expect(inp.pose('right').slice(0, 3)).toEqual([0.18, -0.3, 0.22]);
    const moved = world();
    moved.hands.right = [0.9, 0.9, 0.9, 1, 0, 0, 0];
    inp.seedFrom(moved);
    expect(inp.pose('right').slice(0, 3)).toEqual([0.18, -0.3, 0.22]);
  });

  it('recovers yaw from the streamed quaternion', () => {
    inp.seedFrom(world());
    const q = inp.pose('right').slice(3);
    // yaw pi: w ~ 0, z ~ 1 up to sign
    expect(Math.abs(q[3]!)).toBeCloseTo(1, 6);
  });
});

describe('hand toggling', () => {
  it('switches the driven hand and re-adopts its streamed pose', () => {
    expect(inp.active).toBe('right');
    inp.setGrasp(true);
    inp.toggleHand(world());
    expect(inp.active).toBe('left');
    expect(inp.pose().slice(0, 3)).toEqual([0.12, 0.3, 0.2]);
    // buttons drop on toggle so the idle hand cannot keep gripping
    expect(inp.grasp).toBe(false);
    inp.toggleHand(null);
    expect(inp.active).toBe('right');
  });
});

describe('pointer mapping', () => {
  it('drag moves the active hand in the camera plane (screen px -> meters)', () => {
    inp.seedFrom(world());
    const before = inp.pose();
    inp.drag(100, 0, TOP, 0.001); // 100 px right at 1 mm/px
    let p = inp.pose();
    expect(p[0]! - before[0]!).toBeCloseTo(0.1, 9);
    expect(p[1]).toBeCloseTo(before[1]!, 9);
    inp.drag(0, 50, TOP, 0.001); // 50 px down = -screen-y = -world-y in top view
    p = inp.pose();
    expect(p[1]! - before[1]!).toBeCloseTo(-0.05, 9);
    expect(p[2]).toBeCloseTo(before[2]!, 9); // top-view drags never change height
  });

  it('wheel lifts within bounds', () => {
    inp.seedFrom(world());
    inp.lift(0.05);
    expect(inp.pose()[2]).toBeCloseTo(0.27, 9);
    inp.lift(9);
    expect(inp.pose()[2]).toBeCloseTo(0.6, 9); // clamped at the ceiling
    inp.lift(-9);
    expect(inp.pose()[2]).toBeCloseTo(0, 9); // and at the table
  });

  it('spin yaws the gripper about vertical', () => {
    inp.seedFrom({ ...world(), hands: { ...world().hands, right: [0, 0, 0, 1, 0, 0, 0] } });
    inp.spin(Math.PI / 2);
    const q = inp.pose().slice(3);
    expect(q[0]).toBeCloseTo(Math.SQRT1_2, 6); // w
    expect(q[3]).toBeCloseTo(Math.SQRT1_2, 6); // z
  });
});

describe('samples', () => {
  it('reflects the driven hand and both buttons', () => {
    inp.seedFrom(world());
    inp.setGrasp(true);
    inp.setFingerOpen(true);
    const s = inp.sample();
    expect(s.hand).toBe('right');
    expect(s.pose).toHaveLength(7);
    expect(s.grasp_button).toBe(true);
    expect(s.finger_open).toBe(true);
  });
});
