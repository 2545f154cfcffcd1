// Wire protocol shared with the teleassist service. Every message in either
// direction is a JSON object with `type`, `schema_version` and `tick` (the
// sender's own monotone counter).

export const SCHEMA_VERSION = 1;

export type Hand = 'left' | 'right';
export type Mode = 'm1' | 'm2' | 'm3';

/** [x, y, z, qw, qx, qy, qz] — position in metres, unit quaternion scalar-first. */
export type Pose7 = [number, number, number, number, number, number, number];

export interface WorldSnapshot {
  blocks: Record<string, Pose7>;
  hands: Record<Hand, Pose7>;
  held: Record<Hand, string | null>;
  time: number;
}

export interface StateUpdate {
  type: 'state_update';
  schema_version: number;
  tick: number;
  task: string;
  mode: Mode;
  trial_tick: number;
  done: boolean;
  world: WorldSnapshot;
}

export interface PlanStepMsg {
  kind: string;
  goal_node: string;
  target_pose: Pose7;
  world_node: string | null;
  parent: string | null;
  neighbors: string[];
  ged_remaining: number;
}

export interface PlanUpdate {
  type: 'plan_update';
  schema_version: number;
  tick: number;
  step: PlanStepMsg | null;
  label: string | null;
  ghost: Pose7 | null;
}

// behaviors stream as the machine's row numbers, 1..9
export interface BehaviorUpdate {
  type: 'behavior_update';
  schema_version: number;
  tick: number;
  behaviors: Record<Hand, number>;
  mode: Mode;
}

export type FeedbackKind = 'object_highlight' | 'plane_highlight' | 'haptic_click';

export interface FeedbackMsg {
  type: 'feedback';
  schema_version: number;
  tick: number;
  hand: Hand;
  kind: FeedbackKind;
  ref: string | null;
}

export interface TrialScores {
  time: number;
  success: boolean;
  progress: number;
  position_error: number | null;
  orientation_error_deg: number | null;
}

export interface MetricsMsg {
  type: 'metrics';
  schema_version: number;
  tick: number;
  metrics: TrialScores;
}

export interface ErrorMsg {
  type: 'error';
  schema_version: number;
  tick: number;
  reason: string;
}

export type ServerMessage =
  | StateUpdate
  | PlanUpdate
  | BehaviorUpdate
  | FeedbackMsg
  | MetricsMsg
  | ErrorMsg;

const SERVER_TYPES = new Set([
  'state_update',
  'plan_update',
  'behavior_update',
  'feedback',
  'metrics',
  'error',
]);

export const BEHAVIOR_LABELS: Record<number, string> = {
  1: 'ApproachObject',
  2: 'SnapToObject',
  3: 'AlignWithObject',
  4: 'GraspObject',
  5: 'AlignWithSurface',
  6: 'UnsnapSurface',
  7: 'ApproachSurface',
  8: 'SnapToSurface',
  9: 'ReleaseObject',
};

export type ParseResult =
  | { ok: true; message: ServerMessage }
  | { ok: false; reason: string; versionMismatch: boolean };

/** Decode one frame from the server; never throws. */
export function parseServer(raw: string): ParseResult {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return { ok: false, reason: 'invalid JSON', versionMismatch: false };
  }
  if (typeof data !== 'object' || data === null || Array.isArray(data)) {
    return { ok: false, reason: 'not an object', versionMismatch: false };
  }
  const m = data as Record<string, unknown>;
  if (!SERVER_TYPES.has(m.type as string)) {
    return { ok: false, reason: `unknown type ${String(m.type)}`, versionMismatch: false };
  }
  if (m.schema_version !== SCHEMA_VERSION) {
    return {
      ok: false,
      reason: `schema_version ${String(m.schema_version)}, expected ${SCHEMA_VERSION}`,
      versionMismatch: true,
    };
  }
  if (typeof m.tick !== 'number' || !Number.isInteger(m.tick) || m.tick < 0) {
    return { ok: false, reason: 'bad tick', versionMismatch: false };
  }
  return { ok: true, message: m as unknown as ServerMessage };
}

export interface ControllerSample {
  hand: Hand;
  pose: Pose7;
  grasp_button: boolean;
  finger_open: boolean;
}

function stamp(fields: Record<string, unknown>, tick: number): string {
  return JSON.stringify({ ...fields, schema_version: SCHEMA_VERSION, tick });
}

export function controllerInput(sample: ControllerSample, tick: number): string {
  return stamp({ type: 'controller_input', ...sample }, tick);
}

export function setMode(mode: Mode, tick: number): string {
  return stamp({ type: 'set_mode', mode }, tick);
}

export function setTask(task: string, tick: number): string {
  return stamp({ type: 'set_task', task }, tick);
}

export function reset(tick: number, seed?: number): string {
  return stamp(seed === undefined ? { type: 'reset' } : { type: 'reset', seed }, tick);
}
