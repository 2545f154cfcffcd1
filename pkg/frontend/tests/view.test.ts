import { beforeEach, describe, expect, it } from 'vitest';

import type {
  BehaviorUpdate,
  FeedbackMsg,
  MetricsMsg,
  PlanUpdate,
  Pose7,
  StateUpdate,
} from '../src/protocol';
import {
  HIGHLIGHT_LINGER_MS,
  PULSE_MS,
  activeRefs,
  applyMessage,
  freshView,
  prune,
  type ViewState,
} from '../src/view';

const P0: Pose7 = [0.2, 0, 0.0075, 1, 0, 0, 0];
const P1: Pose7 = [0.3, 0.1, 0.0075, 1, 0, 0, 0];

let tick = 0;

function state(over: Partial<StateUpdate> = {}): StateUpdate {
  return {
    type: 'state_update',
    schema_version: 1,
    tick: tick++,
    task: 'arch',
    mode: 'm3',
    trial_tick: tick,
    done: false,
    world: {
      blocks: { B1: P0 },
      hands: { left: P1, right: P0 },
      held: { left: null, right: null },
      time: tick * 0.05,
    },
    ...over,
  };
}

function behavior(left: number, right: number, mode: 'm1' | 'm2' | 'm3' = 'm3'): BehaviorUpdate {
  return { type: 'behavior_update', schema_version: 1, tick: tick++, behaviors: { left, right }, mode };
}

function feedback(kind: FeedbackMsg['kind'], ref: string | null, hand: 'left' | 'right' = 'right'): FeedbackMsg {
  return { type: 'feedback', schema_version: 1, tick: tick++, hand, kind, ref };
}

function plan(ghost: Pose7 | null): PlanUpdate {
  return {
    type: 'plan_update',
    schema_version: 1,
    tick: tick++,
    step:
      ghost === null
        ? null
        : {
            kind: 'place',
            goal_node: 'B2',
            target_pose: ghost,
            world_node: 'W1',
            parent: 'B1',
            neighbors: ['B1'],
            ged_remaining: 2,
          },
    label: 'arch',
    ghost,
  };
}

let v: ViewState;
beforeEach(() => {
  v = freshView();
  tick = 0;
});

describe('state updates', () => {
  it('starts empty: nothing to draw before the first message', () => {
    expect(v.world).toBeNull();
    expect(v.ghost).toBeNull();
    expect(v.highlights).toEqual([]);
  });

  it('world is exactly the streamed snapshot, replaced wholesale', () => {
    applyMessage(v, state(), 0);
    const w1 = v.world;
    expect(w1?.blocks['B1']).toEqual(P0);
    const s2 = state();
    s2.world.blocks['B1'] = P1;
    applyMessage(v, s2, 50);
    expect(v.world?.blocks['B1']).toEqual(P1);
    expect(v.world).not.toBe(w1); // no in-place extrapolation
  });

  it('a new trial (trial_tick regression) clears stale decor and metrics', () => {
    applyMessage(v, state({ trial_tick: 40 }), 0);
    applyMessage(v, plan(P1), 0);
    applyMessage(v, behavior(0, 2), 0);
    applyMessage(v, feedback('object_highlight', 'B1'), 0);
    const metrics: MetricsMsg = {
      type: 'metrics',
      schema_version: 1,
      tick: tick++,
      metrics: { time: 9, success: true, progress: 1, position_error: 0.001, orientation_error_deg: 1 },
    };
    applyMessage(v, metrics, 0);
    expect(v.highlights).toHaveLength(1);
    expect(v.metrics).not.toBeNull();

    applyMessage(v, state({ trial_tick: 0 }), 1);
    expect(v.highlights).toEqual([]);
    expect(v.pulses).toEqual([]);
    expect(v.metrics).toBeNull();
    expect(v.ghost).toBeNull();
  });

  it('switching task mid-stream also resets decor', () => {
    applyMessage(v, state({ trial_tick: 5 }), 0);
    applyMessage(v, plan(P1), 0);
    expect(v.ghost).toEqual(P1);
    applyMessage(v, state({ task: 'snake', trial_tick: 6 }), 0);
    expect(v.ghost).toBeNull();
    expect(v.task).toBe('snake');
  });
});

describe('plan and ghost', () => {
  it('ghost follows plan_update and clears with a null step', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, plan(P1), 0);
    expect(v.ghost).toEqual(P1);
    expect(v.plan?.target_pose).toEqual(P1);
    expect(v.planLabel).toBe('arch');
    applyMessage(v, plan(null), 0);
    expect(v.ghost).toBeNull();
    expect(v.plan).toBeNull();
  });
});

describe('highlight lifecycle', () => {
  it('feedback arms a highlight bound to the firing row; it lingers 500 ms after the row exits', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, behavior(0, 2), 0); // right hand enters SnapToObject
    applyMessage(v, feedback('object_highlight', 'B1'), 10);
    expect(activeRefs(v, 'object_highlight').has('B1')).toBe(true);

    // row still active: no expiry however long we wait
    prune(v, 10_000);
    expect(v.highlights).toHaveLength(1);

    // row exits at t=20000 -> expiry armed
    applyMessage(v, behavior(0, 3), 20_000);
    prune(v, 20_000 + HIGHLIGHT_LINGER_MS - 1);
    expect(v.highlights).toHaveLength(1);
    prune(v, 20_000 + HIGHLIGHT_LINGER_MS + 1);
    expect(v.highlights).toHaveLength(0);
  });

  it('re-firing the same cue refreshes instead of stacking', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, behavior(0, 2), 0);
    applyMessage(v, feedback('object_highlight', 'B1'), 0);
    applyMessage(v, feedback('object_highlight', 'B1'), 5);
    expect(v.highlights).toHaveLength(1);
  });

  it('hands are independent: left row changes do not expire right-hand highlights', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, behavior(2, 2), 0);
    applyMessage(v, feedback('object_highlight', 'B1', 'right'), 0);
    applyMessage(v, behavior(3, 2), 100); // only left exits row 2
    prune(v, 100 + HIGHLIGHT_LINGER_MS + 1);
    expect(v.highlights).toHaveLength(1);
    expect(v.highlights[0]?.hand).toBe('right');
  });

  it('plane highlights expire the same way', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, behavior(0, 8), 0);
    applyMessage(v, feedback('plane_highlight', 'table'), 0);
    expect(activeRefs(v, 'plane_highlight').has('table')).toBe(true);
    applyMessage(v, behavior(0, 9), 1000);
    prune(v, 1000 + HIGHLIGHT_LINGER_MS + 1);
    expect(activeRefs(v, 'plane_highlight').size).toBe(0);
  });
});

describe('haptic pulses', () => {
  it('haptic_click spawns a pulse that dies after PULSE_MS', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, feedback('haptic_click', null), 100);
    expect(v.pulses).toHaveLength(1);
    prune(v, 100 + PULSE_MS - 1);
    expect(v.pulses).toHaveLength(1);
    prune(v, 100 + PULSE_MS + 1);
    expect(v.pulses).toHaveLength(0);
  });
});

describe('mode M1 strips assistance decor', () => {
  it('entering m1 clears ghost, plan and highlights at once', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, behavior(0, 2), 0);
    applyMessage(v, feedback('object_highlight', 'B1'), 0);
    applyMessage(v, plan(P1), 0);
    expect(v.ghost).not.toBeNull();
    applyMessage(v, behavior(0, 0, 'm1'), 0);
    expect(v.ghost).toBeNull();
    expect(v.plan).toBeNull();
    expect(v.highlights).toEqual([]);
  });

  it('while in m1, later plan/feedback messages stay invisible', () => {
    applyMessage(v, state({ mode: 'm1' }), 0);
    applyMessage(v, plan(P1), 0);
    applyMessage(v, feedback('object_highlight', 'B1'), 0);
    expect(v.ghost).toBeNull();
    expect(v.highlights).toEqual([]);
    // haptics are physical, not decor: they still pulse
    applyMessage(v, feedback('haptic_click', null), 0);
    expect(v.pulses).toHaveLength(1);
  });

  it('m1 via state_update works too, and m2 restores decor flow', () => {
    applyMessage(v, state(), 0);
    applyMessage(v, plan(P1), 0);
    applyMessage(v, state({ mode: 'm1', trial_tick: 90 }), 0);
    expect(v.ghost).toBeNull();
    applyMessage(v, state({ mode: 'm2', trial_tick: 91 }), 0);
    applyMessage(v, plan(P1), 0);
    expect(v.ghost).toEqual(P1);
  });
});

describe('terminal messages', () => {
  it('metrics fill the panel model; error is surfaced', () => {
    applyMessage(v, state(), 0);
    applyMessage(
      v,
      {
        type: 'metrics',
        schema_version: 1,
        tick: tick++,
        metrics: { time: 12.3, success: false, progress: 0.5, position_error: null, orientation_error_deg: null },
      },
      0,
    );
    expect(v.metrics?.progress).toBe(0.5);
    expect(v.metrics?.position_error).toBeNull();
    applyMessage(v, { type: 'error', schema_version: 1, tick: tick++, reason: 'unknown task' }, 0);
    expect(v.lastError).toBe('unknown task');
  });
});
