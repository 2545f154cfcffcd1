/**
 * Client-side view model.
 *
 * The renderable state is derived purely from the most recent wire messages;
 * nothing here integrates physics or predicts poses. Reconnecting mid-trial
 * therefore reproduces the exact scene as soon as the next state_update lands.
 */

import type {
  BehaviorUpdate,
  FeedbackMsg,
  Hand,
  MetricsMsg,
  Mode,
  PlanStepMsg,
  PlanUpdate,
  Pose7,
  ServerMessage,
  StateUpdate,
  TrialScores,
  WorldSnapshot,
} from './protocol.js';

/** How long a highlight lingers once the behavior that armed it moves on. */
export const HIGHLIGHT_LINGER_MS = 500;
/** Haptic click pulse duration on screen. */
export const PULSE_MS = 250;

export interface Highlight {
  hand: Hand;
  kind: 'object_highlight' | 'plane_highlight';
  /** Block id or plane tag the highlight decorates. */
  ref: string;
  /** Behavior row active on `hand` when the feedback event fired. */
  row: number;
  /** Wall-clock expiry; null while the arming row is still active. */
  expiresAt: number | null;
}

export interface Pulse {
  hand: Hand;
  bornAt: number;
}

export interface ViewState {
  connected: boolean;
  task: string;
  mode: Mode | null;
  trialTick: number;
  done: boolean;
  world: WorldSnapshot | null;
  behaviors: Record<Hand, number>;
  plan: PlanStepMsg | null;
  planLabel: string;
  ghost: Pose7 | null;
  highlights: Highlight[];
  pulses: Pulse[];
  metrics: TrialScores | null;
  lastError: string | null;
}

export function freshView(): ViewState {
  return {
    connected: false,
    task: '',
    mode: null,
    trialTick: -1,
    done: false,
    world: null,
    behaviors: { left: 0, right: 0 },
    plan: null,
    planLabel: '',
    ghost: null,
    highlights: [],
    pulses: [],
    metrics: null,
    lastError: null,
  };
}

function resetTrialArtifacts(v: ViewState): void {
  v.highlights = [];
  v.pulses = [];
  v.metrics = null;
  v.plan = null;
  v.planLabel = '';
  v.ghost = null;
  v.done = false;
}

function clearAssistDecor(v: ViewState): void {
  v.highlights = [];
  v.plan = null;
  v.planLabel = '';
  v.ghost = null;
}

function onState(v: ViewState, m: StateUpdate): void {
  if (m.trial_tick < v.trialTick || m.task !== v.task) resetTrialArtifacts(v);
  v.task = m.task;
  v.trialTick = m.trial_tick;
  v.done = m.done;
  v.world = m.world;
  if (m.mode !== v.mode) {
    v.mode = m.mode;
    if (m.mode === 'm1') clearAssistDecor(v);
  }
}

function onPlan(v: ViewState, m: PlanUpdate): void {
  if (v.mode === 'm1') return; // no assist decor in passthrough mode
  v.plan = m.step;
  v.planLabel = m.label ?? '';
  v.ghost = m.ghost;
}

function onBehavior(v: ViewState, m: BehaviorUpdate, now: number): void {
  for (const hand of ['left', 'right'] as Hand[]) {
    const prev = v.behaviors[hand];
    const next = m.behaviors[hand];
    if (prev === next) continue;
    v.behaviors[hand] = next;
    // the arming row just exited: start the linger countdown
    for (const h of v.highlights) {
      if (h.hand === hand && h.row === prev && h.expiresAt === null) {
        h.expiresAt = now + HIGHLIGHT_LINGER_MS;
      }
    }
  }
  if (m.mode !== v.mode) {
    v.mode = m.mode;
    if (m.mode === 'm1') clearAssistDecor(v);
  }
}

function onFeedback(v: ViewState, m: FeedbackMsg, now: number): void {
  if (m.kind === 'haptic_click') {
    v.pulses.push({ hand: m.hand, bornAt: now });
    return;
  }
  if (v.mode === 'm1') return;
  const ref = m.ref ?? '';
  const row = v.behaviors[m.hand];
  // re-firing the same cue refreshes rather than stacking
  v.highlights = v.highlights.filter(
    (h) => !(h.hand === m.hand && h.kind === m.kind && h.ref === ref),
  );
  v.highlights.push({ hand: m.hand, kind: m.kind, ref, row, expiresAt: null });
}

function onMetrics(v: ViewState, m: MetricsMsg): void {
  v.metrics = m.metrics;
}

/** Fold one parsed server message into the view. `now` is wall-clock ms. */
export function applyMessage(v: ViewState, msg: ServerMessage, now: number): void {
  switch (msg.type) {
    case 'state_update':
      onState(v, msg);
      break;
    case 'plan_update':
      onPlan(v, msg);
      break;
    case 'behavior_update':
      onBehavior(v, msg, now);
      break;
    case 'feedback':
      onFeedback(v, msg, now);
      break;
    case 'metrics':
      onMetrics(v, msg);
      break;
    case 'error':
      v.lastError = msg.reason;
      break;
  }
}

/** Drop expired highlights and finished pulses. Call once per frame. */
export function prune(v: ViewState, now: number): void {
  v.highlights = v.highlights.filter((h) => h.expiresAt === null || h.expiresAt > now);
  v.pulses = v.pulses.filter((p) => now - p.bornAt < PULSE_MS);
}

/** Convenience for the renderer: highlights keyed by ref for one kind. */
export function activeRefs(v: ViewState, kind: Highlight['kind']): Set<string> {
  const out = new Set<string>();
  for (const h of v.highlights) if (h.kind === kind) out.add(h.ref);
  return out;
}

export type { TrialScores, WorldSnapshot, Pose7 };
