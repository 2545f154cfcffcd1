/**
 * Full-stack session against a real `teleassist serve` process: a scripted
 * driver stands in for the human, the view/net/protocol modules are the same
 * code the browser runs, and the finished trial's server-side log is replayed
 * headlessly at the end to confirm the captured stream reproduces the metrics.
 */

import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';
import { promisify } from 'node:util';

import WebSocket from 'ws';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { composePose, inversePose, verticalExtent } from '../src/geom';
import type { SocketLike } from '../src/net';
import { Wire } from '../src/net';
import type { Pose7, TrialScores } from '../src/protocol';
import { applyMessage, freshView, prune } from '../src/view';

const run = promisify(execFile);

const PORT = 8900 + Math.floor(Math.random() * 500);
const HOST = '127.0.0.1';
const TASK = 'arch';
const SEED = 3;
const LOGDIR = mkdtempSync(join(tmpdir(), 'teleassist-ui-'));
const FRONTEND = resolve(dirname(fileURLToPath(import.meta.url)), '..');

// What a human brings to the table: the arch's chart poses in build order.
// The intent estimator cannot commit to a plan until the first couple of
// placements disambiguate the task, so early carries go to these poses and
// later ones follow the planner ghost.
const ARCH_CHART: Pose7[] = [
  [0, 0, 0.0075, 1, 0, 0, 0],
  [-0.028125, 0, 0.06, 0.5, -0.5, -0.5, -0.5],
  [0.028125, 0, 0.06, 0.5, -0.5, -0.5, -0.5],
  [0, 0, 0.1125, 1, 0, 0, 0],
  [0, 0, 0.1275, 0.70710678, 0, 0, 0.70710678],
];

let server: ChildProcess;
let serverErr = '';

async function waitHealthy(timeoutMs = 15_000): Promise<void> {
  const t0 = Date.now();
  for (;;) {
    try {
      const r = await fetch(`http://${HOST}:${PORT}/healthz`);
      if (r.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() - t0 > timeoutMs) {
      throw new Error(`service never became healthy\n${serverErr}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }
}

beforeAll(async () => {
  server = spawn(
    'teleassist',
    [
      'serve',
      '--task', TASK,
      '--mode', 'm3',
      '--seed', String(SEED),
      '--time-limit', '40',
      '--host', HOST,
      '--port', String(PORT),
      '--logs', LOGDIR,
      '--static', FRONTEND,
    ],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  server.stderr?.on('data', (d) => (serverErr += String(d)));
  server.stdout?.on('data', (d) => (serverErr += String(d)));
  await waitHealthy();
}, 30_000);

afterAll(async () => {
  server.kill('SIGTERM');
  await new Promise((r) => setTimeout(r, 300));
  if (server.exitCode === null) server.kill('SIGKILL');
});

describe('served UI bundle', () => {
  it('hands out the page and its compiled module', async () => {
    const page = await (await fetch(`http://${HOST}:${PORT}/`)).text();
    expect(page).toContain('id="scene"');
    expect(page).toContain('dist/main.js');
    const mod = await fetch(`http://${HOST}:${PORT}/dist/main.js`);
    expect(mod.ok).toBe(true);
    expect(await mod.text()).toContain('requestAnimationFrame');
    const proto = await (await fetch(`http://${HOST}:${PORT}/dist/protocol.js`)).text();
    expect(proto).toContain('controller_input');
  });
});

describe('live session', () => {
  it(
    'grasp cues fire, the ghost sits on the planner pose, placements land, and the captured log replays to identical metrics',
    async () => {
      const view = freshView();
      const seen = {
        snapRow: false,
        objectHighlight: false,
        highlightLiveWithFeedback: false,
        ghostChecks: 0,
        ghostMismatches: 0,
        ghostPlacements: 0,
      };
      const placedByMe = new Set<string>();
      let prevHeld: string | null = null;
      let attach: Pose7 | null = null; // hand->block offset recorded at pickup
      let target: string | null = null;
      let slid = false;
      let settleTicks = 0;
      let sentAny = false;
      let selectedMode = false;
      // the plan advances the instant a placement registers, so remember the
      // ghost we were carrying toward to judge where the block came to rest
      let carryGhost: Pose7 | null = null;
      let finished!: (m: TrialScores) => void;
      const metricsArrived = new Promise<TrialScores>((res) => (finished = res));

      const graspPose = (block: Pose7): Pose7 => [
        block[0],
        block[1],
        block[2] + verticalExtent(block),
        block[3],
        block[4],
        block[5],
        block[6],
      ];

      const stepToward = (from: Pose7, to: Pose7, maxStep = 0.05): Pose7 => {
        const d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        const n = Math.hypot(d[0]!, d[1]!, d[2]!);
        if (n <= maxStep) return to;
        return [
          from[0] + (d[0]! / n) * maxStep,
          from[1] + (d[1]! / n) * maxStep,
          from[2] + (d[2]! / n) * maxStep,
          to[3], to[4], to[5], to[6],
        ];
      };

      const drive = (): void => {
        const w = view.world;
        if (!w || view.done) return;
        const ee = w.hands.right;
        const row = view.behaviors.right;
        const held = w.held['right'] ?? null;
        let pose: Pose7 = ee;
        let grasp = false;
        let finger = false;

        if (held === null) {
          if (row <= 2) {
            // pick something up: the planner names a block when it has an
            // opinion; otherwise reach for the nearest loose one
            const planned = view.plan?.world_node ?? null;
            if (target === null || placedByMe.has(target) || !w.blocks[target]) {
              if (planned !== null && w.blocks[planned] && !placedByMe.has(planned)) {
                target = planned;
              } else {
                let best: string | null = null;
                let bd = Infinity;
                for (const [id, bp] of Object.entries(w.blocks)) {
                  if (placedByMe.has(id)) continue;
                  if (id === w.held['left'] || id === w.held['right']) continue;
                  const d = Math.hypot(bp[0] - ee[0], bp[1] - ee[1]);
                  if (d < bd) {
                    bd = d;
                    best = id;
                  }
                }
                target = best;
              }
            }
            const blk = target !== null ? w.blocks[target] : undefined;
            if (blk) pose = stepToward(ee, graspPose(blk));
          } else if (row === 3 || row === 4) {
            grasp = true;
          }
        } else if (attach !== null) {
          const dest = view.ghost ?? ARCH_CHART[Math.min(placedByMe.size, ARCH_CHART.length - 1)]!;
          if (view.ghost && carryGhost === null) carryGhost = [...view.ghost] as Pose7;
          // hand pose that parks the held block exactly on dest
          const H = composePose(dest, inversePose(attach));
          if (row === 5) {
            pose = slid
              ? [ee[0], ee[1], ee[2] + 0.1, ee[3], ee[4], ee[5], ee[6]]
              : [ee[0] + 0.02, ee[1], ee[2], ee[3], ee[4], ee[5], ee[6]];
            slid = true;
          } else if (row === 7) {
            const far = Math.hypot(H[0] - ee[0], H[1] - ee[1]) > 0.02;
            pose = far
              ? [H[0], H[1], Math.max(H[2] + 0.04, ee[2]), H[3], H[4], H[5], H[6]]
              : stepToward(ee, H);
          } else if (row === 8) {
            settleTicks += 1;
            finger = settleTicks > 20;
          } else if (row === 9) {
            finger = true;
          }
          // rows 6 (and idle gaps) hold the current pose
        }
        wire.sendInput({ hand: 'right', pose, grasp_button: grasp, finger_open: finger });
        sentAny = true;
      };

      const wire = new Wire(
        `ws://${HOST}:${PORT}/ws`,
        (url) => new WebSocket(url) as unknown as SocketLike,
        {
          onMessage(msg) {
            if (!selectedMode) {
              // the socket is live once anything arrives; pick the mode the
              // way the page's keyboard shortcut would
              selectedMode = true;
              wire.sendMode('m3');
            }
            const now = Date.now();
            applyMessage(view, msg, now);
            prune(view, now);
            if (msg.type === 'behavior_update' && msg.behaviors.right === 2) seen.snapRow = true;
            if (msg.type === 'feedback' && msg.kind === 'object_highlight') {
              seen.objectHighlight = true;
              // the cue must be represented on screen the moment it arrives
              if (view.highlights.some((h) => h.kind === 'object_highlight' && h.ref === msg.ref)) {
                seen.highlightLiveWithFeedback = true;
              }
            }
            if (msg.type === 'plan_update' && msg.step !== null) {
              seen.ghostChecks += 1;
              if (JSON.stringify(view.ghost) !== JSON.stringify(msg.step.target_pose)) {
                seen.ghostMismatches += 1;
              }
            }
            if (msg.type === 'state_update') {
              const held = msg.world.held['right'] ?? null;
              if (held !== null && prevHeld === null) {
                const blk = msg.world.blocks[held];
                if (blk) attach = composePose(inversePose(msg.world.hands.right), blk);
                target = null;
              }
              if (held === null && prevHeld !== null) {
                placedByMe.add(prevHeld);
                const rested = msg.world.blocks[prevHeld];
                if (rested && carryGhost) {
                  const dx = Math.hypot(rested[0] - carryGhost[0], rested[1] - carryGhost[1]);
                  if (dx < 0.03) seen.ghostPlacements += 1;
                }
                carryGhost = null;
                attach = null;
                settleTicks = 0;
                slid = false;
              }
              prevHeld = held;
              drive();
            }
            if (msg.type === 'metrics') finished(msg.metrics);
          },
        },
      );

      wire.start();
      const live = await metricsArrived;
      wire.stop();

      expect(sentAny).toBe(true);
      expect(seen.snapRow).toBe(true);
      expect(seen.objectHighlight).toBe(true);
      expect(seen.highlightLiveWithFeedback).toBe(true);
      expect(seen.ghostChecks).toBeGreaterThan(0);
      expect(seen.ghostMismatches).toBe(0);
      expect(seen.ghostPlacements).toBeGreaterThanOrEqual(1);
      expect(live.success).toBe(true);
      expect(live.progress).toBe(1);

      // the server wrote the captured stream next to the trial's end
      let logName: string | undefined;
      for (let i = 0; i < 40 && !logName; i++) {
        logName = readdirSync(LOGDIR).find((f) => f.endsWith('.log.jsonl'));
        if (!logName) await new Promise((r) => setTimeout(r, 100));
      }
      expect(logName).toBeDefined();

      const { stdout } = await run('teleassist', ['replay', join(LOGDIR, logName!)]);
      expect(stdout).toContain('identical true');
      const replayedLine = stdout.split('\n').find((l) => l.startsWith('replayed'));
      expect(replayedLine).toBeDefined();
      const replayed = JSON.parse(replayedLine!.slice('replayed'.length).trim());
      expect(replayed).toEqual({
        time: live.time,
        success: live.success,
        progress: live.progress,
        position_error: live.position_error,
        orientation_error_deg: live.orientation_error_deg,
      });
    },
    120_000,
  );
});
