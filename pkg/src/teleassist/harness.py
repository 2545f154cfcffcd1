"""Headless closed-loop trials.

A trial wires the full stack around a kinematic bimanual workspace: a
scripted operator streams controller samples at 20 Hz, the intention
estimator and the task planner read the growing structure, and one behavior
machine per hand turns the samples into motion commands.  Blocks are
kinematic — a held block rides the hand rigidly, a released block drops
straight down onto the highest surface under its footprint.  Every tick is
appended to a log that serializes to JSON lines; identical configs replay
to identical bytes.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .behaviors import (
    AssistMode,
    BehaviorId,
    ControllerInput,
    Gripper,
    HandState,
    HandWorld,
    Thresholds,
    grasp_pose,
    placement_plane,
    snap_trajectory,
    step as behavior_step,
)
from .geometry import BlockShape, Pose, geodesic_angle_deg
from .intention import (
    FRAME_RATE_HZ,
    WINDOW_FRAMES,
    WINDOW_STRIDE,
    HandObs,
    IntentEstimate,
    ModelWeights,
    ObservationWindow,
    heuristic_intent,
    predict,
)
from .kernels import quat_mul
from .planner import CostTable, GoalLibrary, PlanStep, ged_cached, next_target, select_goal
from .scene_graph import SceneGraph, Tolerances, build_scene_graph


class HarnessError(ValueError):
    pass


SCHEMA_VERSION = 1
HANDS = ("left", "right")
DT = 1.0 / FRAME_RATE_HZ

#: How far (hand to block center) the simple gripper can grab.
GRASP_RANGE = 0.08

#: Correctly-placed tolerances used by the progress metric.
POSITION_TOL = 0.02
ORIENTATION_TOL_DEG = 10.0

# Structures grow from the origin toward +y (the longest spans +0.32), so
# the supply row sits on the opposite side of the table.
_SCATTER_Y = -0.30
_SCATTER_XS = (-0.30, -0.15, 0.0, 0.15, 0.30)
_PARK = {
    "left": Pose((-0.15, -0.15, 0.15)),
    "right": Pose((0.15, -0.15, 0.15)),
}

_OP_LIN = 0.04  # ideal-hand travel per tick
_OP_ANG_DEG = 15.0
_HOVER = 0.08  # approach height above the grasp pose
_LIFT = 0.12  # carry height above the pick-up point
_STALL_TICKS = 150  # give up waiting for an assist trigger after 7.5 s
_SETTLE_PATIENCE = 20  # ticks at the lowered pose before letting go unsnapped


def perturb(pose: Pose, rng: np.random.Generator, sigma_pos: float, sigma_rot_deg: float) -> Pose:
    """Operator wobble: i.i.d. per-sample position noise plus a rotation by a
    normally distributed angle about a uniformly random axis."""
    if sigma_pos == 0.0 and sigma_rot_deg == 0.0:
        return pose
    p = pose.position + rng.normal(0.0, sigma_pos, 3)
    axis = rng.normal(0.0, 1.0, 3)
    ang = float(rng.normal(0.0, math.radians(sigma_rot_deg)))
    n = float(np.linalg.norm(axis))
    if n < 1e-12 or ang == 0.0:
        return Pose(p, pose.orientation)
    wob = Pose.from_axis_angle(axis / n, ang)
    return Pose(p, quat_mul(wob.orientation, pose.orientation))


# ---------------------------------------------------------------------------
# state & config


@dataclass
class WorldState:
    """Mutable snapshot of the workspace: block poses, hand poses, and what
    each hand holds."""

    blocks: dict
    hands: dict
    held: dict
    time: float = 0.0

    def copy(self) -> "WorldState":
        return WorldState(dict(self.blocks), dict(self.hands), dict(self.held), self.time)

    def to_dict(self) -> dict:
        return {
            "blocks": {b: p.to_list() for b, p in self.blocks.items()},
            "hands": {h: p.to_list() for h, p in self.hands.items()},
            "held": dict(self.held),
            "time": self.time,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WorldState":
        return cls(
            {b: Pose.from_array(np.asarray(v)) for b, v in d["blocks"].items()},
            {h: Pose.from_array(np.asarray(v)) for h, v in d["hands"].items()},
            dict(d["held"]),
            float(d["time"]),
        )


@dataclass(frozen=True)
class TrialConfig:
    task: str
    mode: AssistMode = AssistMode.M3
    seed: int = 0
    sigma_pos: float = 0.0
    sigma_rot_deg: float = 0.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    time_limit: float = 90.0
    keep_ticks: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", AssistMode(self.mode))
        if self.sigma_pos < 0.0 or self.sigma_rot_deg < 0.0:
            raise HarnessError("noise levels must be non-negative")
        if self.time_limit <= 0.0:
            raise HarnessError("time limit must be positive")


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial scores; position/orientation errors are means over the
    blocks matched into the goal (NaN when nothing was placed)."""

    time: float
    success: bool
    progress: float
    position_error: float
    orientation_error_deg: float


def _config_obj(cfg: TrialConfig) -> dict:
    return {
        "task": cfg.task,
        "mode": cfg.mode.value,
        "seed": cfg.seed,
        "sigma_pos": cfg.sigma_pos,
        "sigma_rot_deg": cfg.sigma_rot_deg,
        "thresholds": [cfg.thresholds.delta1, cfg.thresholds.delta2, cfg.thresholds.delta3],
        "time_limit": cfg.time_limit,
        "keep_ticks": cfg.keep_ticks,
    }


def _config_from(d: Mapping) -> TrialConfig:
    return TrialConfig(
        task=d["task"],
        mode=AssistMode(d["mode"]),
        seed=int(d["seed"]),
        sigma_pos=float(d["sigma_pos"]),
        sigma_rot_deg=float(d["sigma_rot_deg"]),
        thresholds=Thresholds(*d["thresholds"]),
        time_limit=float(d["time_limit"]),
        keep_ticks=bool(d["keep_ticks"]),
    )


def _graph_obj(g: SceneGraph) -> dict:
    return {
        "nodes": [[i, None if p is None else p.to_list()] for i, p in g.nodes],
        "edges": [[e.parent, e.child, list(e.attr.as_list())] for e in sorted(g.edges, key=lambda e: e.key())],
    }


def _graph_from(d: Mapping) -> SceneGraph:
    from .scene_graph import Edge, EdgeAttr

    nodes = {i: (None if v is None else Pose.from_array(np.asarray(v))) for i, v in d["nodes"]}
    edges = [Edge(p, c, EdgeAttr.from_list(a)) for p, c, a in d["edges"]]
    return SceneGraph.make(nodes, edges)


def _intent_obj(intent):
    if intent is None:
        return None
    return {
        "tasks": {k: float(v) for k, v in intent.task_probs.items()},
        "left": [float(x) for x in intent.left_action],
        "right": [float(x) for x in intent.right_action],
    }


def _plan_obj(plan):
    if plan is None:
        return None
    return {
        "kind": plan.kind.value,
        "goal_node": plan.goal_node,
        "target_pose": plan.target_pose.to_list(),
        "world_node": plan.world_node,
        "parent": plan.parent,
        "neighbors": list(plan.neighbors),
        "ged_remaining": plan.ged_remaining,
    }


# ---------------------------------------------------------------------------
# trial log


@dataclass
class TrialLog:
    config: TrialConfig
    ticks: list
    placements: list
    final_world: WorldState
    final_graph: SceneGraph
    success: bool
    success_time: float | None

    @property
    def time(self) -> float:
        return self.success_time if self.success and self.success_time is not None else self.config.time_limit

    def to_jsonl(self) -> str:
        head = {"kind": "header", "schema_version": SCHEMA_VERSION, "config": _config_obj(self.config)}
        final = {
            "kind": "final",
            "world": self.final_world.to_dict(),
            "graph": _graph_obj(self.final_graph),
            "placements": self.placements,
            "success": self.success,
            "success_time": self.success_time,
        }
        lines = [head, *self.ticks, final]
        return "\n".join(json.dumps(x, sort_keys=True, separators=(",", ":")) for x in lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "TrialLog":
        head = None
        ticks = []
        final = None
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "header":
                head = obj
            elif kind == "tick":
                ticks.append(obj)
            elif kind == "final":
                final = obj
        if head is None or final is None:
            raise HarnessError("log is missing its header or final line")
        if head.get("schema_version") != SCHEMA_VERSION:
            raise HarnessError(f"unsupported log schema {head.get('schema_version')!r}")
        return cls(
            config=_config_from(head["config"]),
            ticks=ticks,
            placements=final["placements"],
            final_world=WorldState.from_dict(final["world"]),
            final_graph=_graph_from(final["graph"]),
            success=bool(final["success"]),
            success_time=final["success_time"],
        )

    @classmethod
    def read(cls, path) -> "TrialLog":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_jsonl(f.read())

    def rigidly_transformed(self, t: Pose) -> "TrialLog":
        """The same trial watched from another world frame: every logged pose
        is premultiplied by ``t``.  Metrics must not care."""

        def tp(p: Pose) -> Pose:
            return t.compose(p)

        def tl(v) -> list:
            return tp(Pose.from_array(np.asarray(v))).to_list()

        world = WorldState(
            {b: tp(p) for b, p in self.final_world.blocks.items()},
            {h: tp(p) for h, p in self.final_world.hands.items()},
            dict(self.final_world.held),
            self.final_world.time,
        )
        graph = SceneGraph.make(
            {i: (None if p is None else tp(p)) for i, p in self.final_graph.nodes},
            self.final_graph.edges,
        )
        placements = [dict(p, pose=tl(p["pose"])) for p in self.placements]
        ticks = []
        for tk in self.ticks:
            tk = json.loads(json.dumps(tk))  # deep copy
            w = tk.get("world")
            if w:
                w["blocks"] = {b: tl(v) for b, v in w["blocks"].items()}
                w["hands"] = {h: tl(v) for h, v in w["hands"].items()}
            for cmd in (tk.get("commands") or {}).values():
                cmd["pose"] = tl(cmd["pose"])
            for inp in (tk.get("inputs") or {}).values():
                inp["pose"] = tl(inp["pose"])
            if tk.get("plan"):
                tk["plan"]["target_pose"] = tl(tk["plan"]["target_pose"])
            ticks.append(tk)
        return TrialLog(self.config, ticks, placements, world, graph, self.success, self.success_time)


# ---------------------------------------------------------------------------
# scripted operator


class ScriptedOperator:
    """Deterministic stand-in for the human.  The right hand runs a waypoint
    cycle — hover over a block, descend, grab, lift, carry, lower, let go —
    driven by the live plan when one exists and by the shipped assembly order
    otherwise.  An internal ideal pose integrates toward the waypoint at a
    fixed rate; the emitted command is that ideal plus seeded noise.  The
    left hand stays parked."""

    def __init__(self, cfg: TrialConfig, goal: SceneGraph, rng: np.random.Generator, shape: BlockShape = BlockShape()):
        self.cfg = cfg
        self.goal = goal
        self.rng = rng
        self.shape = shape
        self.order = list(goal.node_ids)  # goal chains are built in id order
        self.phase = "select"
        self.phase_ticks = 0
        self.block: str | None = None
        self.place_block_pose: Pose | None = None
        self.place_ee: Pose | None = None
        self.carry_z = 0.0
        self.waypoint = _PARK["right"]
        self.ideal = _PARK["right"]
        self.idle = False
        # set once the first block is down: actual pose of the first placed
        # block relative to its chart pose, so later waypoints land on the
        # structure as built rather than where it ideally would have been
        self.anchor_frame: Pose | None = None

    def _enter(self, phase: str) -> None:
        self.phase = phase
        self.phase_ticks = 0

    def _arrived(self) -> bool:
        return self.ideal.approx_equal(self.waypoint, 1e-9, 1e-6)

    def _nearest_free(self, world: WorldState, placed) -> str | None:
        held = {b for b in world.held.values() if b}
        pool = [b for b in sorted(world.blocks) if b not in placed and b not in held]
        if not pool:
            return None
        return min(pool, key=lambda b: (float(np.linalg.norm(world.blocks[b].position - self.ideal.position)), b))

    def _select(self, world: WorldState, plan: PlanStep | None, placed) -> None:
        self.idle = False
        if self.cfg.mode is AssistMode.M3 and plan is not None:
            if plan.world_node is not None and plan.world_node in world.blocks:
                self.block = plan.world_node  # re-place a block already down
            else:
                self.block = self._nearest_free(world, placed)
            if self.block is None:
                self.idle = True
                return
            self.place_block_pose = plan.target_pose
            self._enter("hover")
            return
        # scripted order: used in M1/M2 throughout, and in M3 while the
        # estimate is still too ambiguous to commit to a plan
        if len(placed) >= len(self.order):
            self.idle = True
            return
        self.block = self._nearest_free(world, placed)
        if self.block is None:
            self.idle = True
            return
        pose = self.goal.pose_of(self.order[len(placed)])
        if self.anchor_frame is not None:
            pose = self.anchor_frame.compose(pose)
        self.place_block_pose = pose
        self._enter("hover")

    def command(self, world: WorldState, machine: HandState, plan: PlanStep | None, placed) -> dict:
        left = ControllerInput("left", _PARK["left"])
        return {"left": left, "right": self._right(world, machine, plan, placed)}

    def _right(self, world: WorldState, machine: HandState, plan: PlanStep | None, placed) -> ControllerInput:
        cfg = self.cfg
        button = False
        finger = False
        self.phase_ticks += 1
        if self.phase == "select":
            self._select(world, plan, placed)

        if self.phase == "select" and self.idle:
            # nothing actionable right now; re-evaluated every tick so a plan
            # arriving later (a repair, say) resumes the cycle
            self.waypoint = _PARK["right"]
        elif self.phase == "hover":
            g = grasp_pose(world.blocks[self.block], self.shape)
            self.waypoint = Pose(g.position + (0.0, 0.0, _HOVER), g.orientation)
            if self._arrived():
                self._enter("descend")
        elif self.phase == "descend":
            self.waypoint = grasp_pose(world.blocks[self.block], self.shape)
            ready = (
                self._arrived()
                if cfg.mode is AssistMode.M1
                else machine.behavior in (BehaviorId.ALIGN_WITH_OBJECT, BehaviorId.GRASP_OBJECT)
            )
            if ready:
                button = True
                self._enter("grasp")
            elif self.phase_ticks > _STALL_TICKS:
                self._enter("hover")  # assist never armed; retry the approach
        elif self.phase == "grasp":
            button = True
            if world.held["right"] == self.block:
                hand = world.hands["right"]
                attach = hand.inverse().compose(world.blocks[self.block])
                self.place_ee = self.place_block_pose.compose(attach.inverse())
                self.carry_z = max(hand.position[2] + _LIFT, self.place_ee.position[2] + 0.02)
                self.ideal = hand  # take over from wherever the assist left the hand
                self.waypoint = Pose((hand.position[0], hand.position[1], self.carry_z), hand.orientation)
                button = False
                self._enter("lift")
            elif self.phase_ticks > _STALL_TICKS:
                self._enter("hover")
        elif self.phase == "lift":
            if self._arrived():
                p = self.place_ee.position
                self.waypoint = Pose((p[0], p[1], self.carry_z), self.place_ee.orientation)
                self._enter("carry")
        elif self.phase == "carry":
            if self._arrived():
                self.waypoint = self.place_ee
                self._enter("lower")
        elif self.phase == "lower":
            # let go once the machine has snapped the hand onto its placement
            # pose; failing that (machine never engages, or is homing on a
            # target the operator doesn't want), hold at the lowered pose
            # briefly and then let go anyway
            snapped = (
                machine.behavior is BehaviorId.SNAP_TO_SURFACE
                and machine.place_ee is not None
                and machine.ee.approx_equal(machine.place_ee, 1e-7, 1e-4)
            )
            waited = self._arrived() and self.phase_ticks > _SETTLE_PATIENCE
            if cfg.mode is AssistMode.M1:
                waited = self._arrived()
            if snapped or waited or self.phase_ticks > _STALL_TICKS:
                finger = True
                self._enter("release")
        elif self.phase == "release":
            finger = True
            if world.held["right"] is None:
                if self.anchor_frame is None and self.block in world.blocks:
                    rest = world.blocks[self.block]
                    self.anchor_frame = rest.compose(self.goal.pose_of(self.order[0]).inverse())
                hand = world.hands["right"]
                self.ideal = hand
                self.waypoint = Pose(hand.position + (0.0, 0.0, _HOVER), hand.orientation)
                self._enter("retreat")
        elif self.phase == "retreat":
            if self._arrived():
                self._enter("select")

        self.ideal = snap_trajectory(self.ideal, self.waypoint, _OP_LIN, _OP_ANG_DEG)
        pose = perturb(self.ideal, self.rng, cfg.sigma_pos, cfg.sigma_rot_deg)
        return ControllerInput("right", pose, grasp_button=button, finger_open=finger)


# ---------------------------------------------------------------------------
# trial loop


class TrialEngine:
    """One live episode, advanced a tick at a time by whoever supplies the
    controller samples — the scripted operator for headless trials, a wire
    session feeding a human's inputs for the UI.  Owns the world, the per-hand
    behavior machines, and the intention/planning state.  ``mode`` may be
    switched between ticks without disturbing anything else."""

    def __init__(self, cfg: TrialConfig, lib: GoalLibrary | None = None, weights: ModelWeights | None = None):
        lib = lib or GoalLibrary.builtin()
        if cfg.task not in lib.available_labels:
            raise HarnessError(f"no goal structures for task {cfg.task!r}")
        self.cfg = cfg
        self.lib = lib
        self.weights = weights
        self.mode = cfg.mode
        self.shape = BlockShape()
        self.tol = Tolerances.for_shape(self.shape)
        self.costs = CostTable()
        self.variants = lib.variants_of(cfg.task)
        self.goal_truth = self.variants[0]

        blocks = {f"W{i + 1}": Pose((x, _SCATTER_Y, self.shape.half_short)) for i, x in enumerate(_SCATTER_XS)}
        self.world = WorldState(blocks=blocks, hands=dict(_PARK), held={h: None for h in HANDS})
        self.machines = {h: HandState(ee=_PARK[h]) for h in HANDS}
        self.attach: dict = {h: None for h in HANDS}

        self.placed: set = set()
        self.graph = SceneGraph()
        self.plan: PlanStep | None = None
        self.plan_label: str | None = None
        self.plan_dirty = True
        self.intent: IntentEstimate | None = None
        self.frames: deque | None = deque(maxlen=WINDOW_FRAMES) if weights is not None else None
        self.prev_hands = dict(self.world.hands)

        self.ticks: list = []
        self.placements: list = []
        self.success = False
        self.success_time: float | None = None
        self.t = 0
        self.limit_ticks = int(round(cfg.time_limit * FRAME_RATE_HZ))

    @property
    def done(self) -> bool:
        return self.success or self.t >= self.limit_ticks

    def step(self, inputs: Mapping[str, ControllerInput]) -> dict:
        """Advance one tick on the given controller samples (one per hand) and
        return the tick record."""
        world = self.world
        machines = self.machines
        t = self.t

        # intention: rule route every tick, learned route on its stride
        if self.weights is None:
            obs = [
                HandObs(
                    world.hands[h],
                    (world.hands[h].position - self.prev_hands[h].position) * FRAME_RATE_HZ,
                    world.held[h],
                )
                for h in HANDS
            ]
            self.intent = heuristic_intent(self.graph, world.blocks, obs, self.lib, self.shape, self.tol, self.costs)
        else:
            rows = [world.hands["left"].to_array(), world.hands["right"].to_array()]
            rows += [world.blocks[b].to_array() for b in sorted(world.blocks)]
            self.frames.append(np.stack(rows))
            if len(self.frames) == WINDOW_FRAMES and (t + 1 - WINDOW_FRAMES) % WINDOW_STRIDE == 0:
                self.intent = predict(ObservationWindow(np.stack(self.frames)), self.weights)
                self.plan_dirty = True

        if self.mode is AssistMode.M3:
            if self.plan_dirty:
                probs = self.intent.task_probs if self.intent is not None else {}
                sel = select_goal(probs, self.graph, self.lib, self.costs)
                self.plan = next_target(self.graph, sel.graph, self.costs, self.shape, self.tol) if sel.decided else None
                self.plan_label = sel.label if sel.decided else None
                self.plan_dirty = False
        else:
            self.plan = None
            self.plan_label = None

        events = []
        cmds = {}
        for h in HANDS:
            o = "right" if h == "left" else "left"
            claimed = frozenset(x for x in (machines[o].target, world.held[o]) if x)
            hw = HandWorld(world.blocks, world.held[h], frozenset(self.placed), claimed)
            machines[h], cmd, ev = behavior_step(
                machines[h], inputs[h], hw, self.intent, self.plan, self.mode, self.cfg.thresholds, self.shape
            )
            cmds[h] = cmd
            events += [{"hand": h, "kind": e.kind.value, "ref": e.ref} for e in ev]

        self.prev_hands = dict(world.hands)
        for h in HANDS:
            world.hands[h] = cmds[h].pose
            b = world.held[h]
            if b is not None:
                world.blocks[b] = world.hands[h].compose(self.attach[h])

        changed = False
        for h in HANDS:
            grip = cmds[h].gripper
            if grip is Gripper.CLOSE and world.held[h] is None:
                held_ids = {x for x in world.held.values() if x}
                cands = [
                    (float(np.linalg.norm(world.blocks[b].position - world.hands[h].position)), b)
                    for b in sorted(world.blocks)
                    if b not in held_ids
                ]
                if cands:
                    d, bid = min(cands)
                    if d <= GRASP_RANGE:
                        world.held[h] = bid
                        self.attach[h] = world.hands[h].inverse().compose(world.blocks[bid])
                        if bid in self.placed:
                            self.placed.discard(bid)
                            changed = True
            elif grip is Gripper.OPEN and world.held[h] is not None:
                bid = world.held[h]
                p = world.blocks[bid]
                _, plane_z = placement_plane(world.blocks, bid, self.shape)
                rest = Pose((p.position[0], p.position[1], plane_z + self.shape.vertical_extent(p)), p.orientation)
                world.blocks[bid] = rest
                world.held[h] = None
                self.attach[h] = None
                self.placed.add(bid)
                changed = True
                self.placements.append({"tick": t, "hand": h, "block": bid, "pose": rest.to_list()})

        world.time = (t + 1) * DT
        if changed:
            self.graph = build_scene_graph({b: world.blocks[b] for b in sorted(self.placed)}, self.shape, self.tol)
            self.plan_dirty = True
            if len(self.placed) == len(self.goal_truth):
                if min(ged_cached(self.graph, v, self.costs)[0] for v in self.variants) == 0.0:
                    self.success = True
                    self.success_time = world.time

        record = {
            "kind": "tick",
            "t": t,
            "inputs": {
                h: {
                    "pose": inputs[h].pose.to_list(),
                    "grasp": bool(inputs[h].grasp_button),
                    "finger": bool(inputs[h].finger_open),
                }
                for h in HANDS
            },
            "world": world.to_dict(),
            "behavior": {h: int(machines[h].behavior) for h in HANDS},
            "intent": _intent_obj(self.intent),
            "plan": _plan_obj(self.plan),
            "commands": {
                h: {
                    "pose": cmds[h].pose.to_list(),
                    "level": cmds[h].control_level.value,
                    "gripper": cmds[h].gripper.value,
                }
                for h in HANDS
            },
            "events": events,
        }
        if self.cfg.keep_ticks:
            self.ticks.append(record)
        self.t = t + 1
        return record

    def finish(self) -> TrialLog:
        return TrialLog(
            config=self.cfg,
            ticks=self.ticks,
            placements=self.placements,
            final_world=self.world.copy(),
            final_graph=self.graph,
            success=self.success,
            success_time=self.success_time,
        )


def inputs_from_tick(record: Mapping) -> dict:
    """Rebuild the controller samples stored on a logged tick, keyed by hand."""
    return {
        h: ControllerInput(
            h,
            Pose.from_array(np.asarray(d["pose"])),
            grasp_button=bool(d["grasp"]),
            finger_open=bool(d["finger"]),
        )
        for h, d in record["inputs"].items()
    }


def run_trial(cfg: TrialConfig, lib: GoalLibrary | None = None, weights: ModelWeights | None = None) -> TrialLog:
    """Run one 20 Hz episode until the task's goal graph is reached (distance
    zero) or the time limit runs out."""
    engine = TrialEngine(cfg, lib, weights)
    rng = np.random.default_rng(cfg.seed)
    op = ScriptedOperator(cfg, engine.goal_truth, rng, engine.shape)
    while not engine.done:
        # the operator complies with the system's plan only while it serves
        # the task the operator is actually doing; a plan for a misread task
        # gets ignored, and its snap simply never engages
        op_plan = engine.plan if engine.plan_label == cfg.task else None
        engine.step(op.command(engine.world, engine.machines["right"], op_plan, engine.placed))
    return engine.finish()


# ---------------------------------------------------------------------------
# metrics


def _edge_tuples(g: SceneGraph, node: str) -> frozenset:
    return frozenset((int(e.kind), e.parent, e.child, tuple(e.attr.as_list())) for e in g.incident_edges(node))


def _translated_edges(g: SceneGraph, node: str, mapping: Mapping) -> frozenset:
    from .scene_graph import EdgeKind

    out = []
    for e in g.incident_edges(node):
        ma = mapping.get(e.parent)
        mb = mapping.get(e.child)
        if ma is None or mb is None:
            out.append((int(e.kind), e.parent, e.child, None))  # unmatched endpoint: can never agree
            continue
        if e.kind == EdgeKind.SUPPORT or ma < mb:
            out.append((int(e.kind), ma, mb, tuple(e.attr.as_list())))
        else:
            out.append((int(e.kind), mb, ma, tuple(e.attr.mirrored().as_list())))
    return frozenset(out)


def compute_metrics(
    log: TrialLog,
    lib: GoalLibrary | None = None,
    goal: SceneGraph | None = None,
    shape: BlockShape = BlockShape(),
) -> TrialMetrics:
    """Score a finished trial against its task's goal structure.

    The first placed block anchors the goal in the world: target poses are
    the goal's relative transforms composed onto that block's final pose, so
    the whole computation — and every number it yields — is unchanged by a
    rigid transform of the logged world.  A block counts toward progress when
    it sits within 2 cm / 10 deg of its target and carries exactly the goal's
    incident edges under the optimal node matching.
    """
    costs = CostTable()
    g = log.final_graph
    if goal is None:
        lib = lib or GoalLibrary.builtin()
        variants = lib.variants_of(log.config.task)
        if not variants:
            raise HarnessError(f"no goal structures for task {log.config.task!r}")
        goal = min(variants, key=lambda v: ged_cached(g, v, costs)[0])

    d, path = ged_cached(g, goal, costs)
    success = d == 0.0
    t = log.success_time if success and log.success_time is not None else log.config.time_limit
    total = len(goal)
    mapping = {a: b for a, b in path.node_mapping if a is not None and b is not None}
    placed_ids = set(g.node_ids)
    anchor = next((p["block"] for p in log.placements if p["block"] in mapping and p["block"] in placed_ids), None)
    if anchor is None:
        return TrialMetrics(
            time=t, success=success, progress=0.0, position_error=float("nan"), orientation_error_deg=float("nan")
        )

    blocks = log.final_world.blocks
    base = blocks[anchor].compose(goal.pose_of(mapping[anchor]).inverse())
    pes = []
    oes = []
    correct = 0
    for w in g.node_ids:
        m = mapping.get(w)
        if m is None:
            continue
        target = base.compose(goal.pose_of(m))
        pe = float(np.linalg.norm(blocks[w].position - target.position))
        oe = geodesic_angle_deg(blocks[w], target)
        pes.append(pe)
        oes.append(oe)
        if pe <= POSITION_TOL and oe <= ORIENTATION_TOL_DEG and _translated_edges(g, w, mapping) == _edge_tuples(goal, m):
            correct += 1
    return TrialMetrics(
        time=t,
        success=success,
        progress=correct / total,
        position_error=float(np.mean(pes)) if pes else float("nan"),
        orientation_error_deg=float(np.mean(oes)) if oes else float("nan"),
    )


# ---------------------------------------------------------------------------
# batches


def _mean(xs: Sequence[float]) -> float:
    vals = [x for x in xs if not math.isnan(x)]
    return float(np.mean(vals)) if vals else float("nan")


def run_batch(
    tasks: Sequence[str],
    modes: Sequence,
    seeds: Iterable[int],
    sigma_pos: float = 0.0,
    sigma_rot_deg: float = 0.0,
    time_limit: float = 90.0,
    lib: GoalLibrary | None = None,
    thresholds: Thresholds | None = None,
) -> dict:
    """Grid of trials; returns per-(task, mode) and per-mode means."""
    lib = lib or GoalLibrary.builtin()
    seeds = list(seeds)
    modes = [AssistMode(m) for m in modes]
    rows = []
    by_mode: dict = {m.value: [] for m in modes}
    for task in tasks:
        for mode in modes:
            ms = []
            for seed in seeds:
                cfg = TrialConfig(
                    task=task,
                    mode=mode,
                    seed=seed,
                    sigma_pos=sigma_pos,
                    sigma_rot_deg=sigma_rot_deg,
                    thresholds=thresholds or Thresholds(),
                    time_limit=time_limit,
                    keep_ticks=False,
                )
                ms.append(compute_metrics(run_trial(cfg, lib), lib))
            row = {
                "task": task,
                "mode": mode.value,
                "trials": len(ms),
                "success_rate": float(np.mean([m.success for m in ms])),
                "time": _mean([m.time for m in ms]),
                "progress": _mean([m.progress for m in ms]),
                "position_error": _mean([m.position_error for m in ms]),
                "orientation_error_deg": _mean([m.orientation_error_deg for m in ms]),
            }
            rows.append(row)
            by_mode[mode.value].append(row)
    overall = {
        mv: {
            k: _mean([r[k] for r in rs])
            for k in ("success_rate", "time", "progress", "position_error", "orientation_error_deg")
        }
        for mv, rs in by_mode.items()
    }
    return {
        "sigma_pos": sigma_pos,
        "sigma_rot_deg": sigma_rot_deg,
        "seeds": seeds,
        "rows": rows,
        "overall": overall,
    }
