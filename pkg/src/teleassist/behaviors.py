"""Gated motion support for bimanual pick-and-place.

Nine context-dependent behaviors form a fixed cycle per pick-place run:
approach an object, snap to it, align inside the grasp manifold, grasp,
slide along the support plane, lift free of it, carry, snap to the
placement surface, release.  Each behavior owns one trigger, one
controller mapping (how much of the raw hand pose survives), and the
feedback events fired on entry.  Two hands run as two independent
machines; the harness tells each machine which blocks the other hand has
spoken for.

Assist modes scale how much the machine does: M1 routes the controller
pose through untouched and never engages, M2 snaps to geometrically
nearest targets, M3 takes grasp and placement targets from the task
planner.

Allowed transitions are the cycle 1->2->...->9->1 plus resets i->1 for
i in 2..8 (grasp target stolen or vanished, hold lost, fingers opened
mid-carry).  Every other pair is a bug; see ALLOWED_TRANSITIONS.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Mapping

import numpy as np

from . import kernels
from .geometry import BlockShape, Pose
from .intention import IntentEstimate
from .planner import PlanStep


class BehaviorError(ValueError):
    pass


class BehaviorId(IntEnum):
    APPROACH_OBJECT = 1
    SNAP_TO_OBJECT = 2
    ALIGN_WITH_OBJECT = 3
    GRASP_OBJECT = 4
    ALIGN_WITH_SURFACE = 5
    UNSNAP_SURFACE = 6
    APPROACH_SURFACE = 7
    SNAP_TO_SURFACE = 8
    RELEASE_OBJECT = 9


class ControlLevel(Enum):
    FREE_6DOF = "free_6dof"
    FROZEN = "frozen"
    NULLSPACE = "nullspace"
    LOCKED = "locked"
    ON_PLANE = "on_plane"
    AUTO_DRIVE = "auto_drive"


class Gripper(Enum):
    HOLD = "hold"
    CLOSE = "close"
    OPEN = "open"


class AssistMode(Enum):
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"


class FeedbackKind(Enum):
    OBJECT_HIGHLIGHT = "object_highlight"
    PLANE_HIGHLIGHT = "plane_highlight"
    HAPTIC_CLICK = "haptic_click"


@dataclass(frozen=True)
class FeedbackEvent:
    kind: FeedbackKind
    #: block id or surface name; None for haptics
    ref: str | None = None


#: controller mapping per behavior: the raw pose survives fully while
#: approaching, filtered to the grasp manifold / support plane while
#: aligning, and not at all while the machine drives or holds still.
CONTROL_LEVELS: Mapping[BehaviorId, ControlLevel] = {
    BehaviorId.APPROACH_OBJECT: ControlLevel.FREE_6DOF,
    BehaviorId.SNAP_TO_OBJECT: ControlLevel.AUTO_DRIVE,
    BehaviorId.ALIGN_WITH_OBJECT: ControlLevel.NULLSPACE,
    BehaviorId.GRASP_OBJECT: ControlLevel.LOCKED,
    BehaviorId.ALIGN_WITH_SURFACE: ControlLevel.ON_PLANE,
    BehaviorId.UNSNAP_SURFACE: ControlLevel.AUTO_DRIVE,
    BehaviorId.APPROACH_SURFACE: ControlLevel.FREE_6DOF,
    BehaviorId.SNAP_TO_SURFACE: ControlLevel.AUTO_DRIVE,
    BehaviorId.RELEASE_OBJECT: ControlLevel.LOCKED,
}

#: feedback kinds each behavior may emit on entry; absent rows are silent.
FEEDBACK_CELLS: Mapping[BehaviorId, FeedbackKind] = {
    BehaviorId.SNAP_TO_OBJECT: FeedbackKind.OBJECT_HIGHLIGHT,
    BehaviorId.GRASP_OBJECT: FeedbackKind.HAPTIC_CLICK,
    BehaviorId.ALIGN_WITH_SURFACE: FeedbackKind.PLANE_HIGHLIGHT,
    BehaviorId.SNAP_TO_SURFACE: FeedbackKind.PLANE_HIGHLIGHT,
}

ALLOWED_TRANSITIONS: frozenset[tuple[int, int]] = frozenset(
    {(i, i) for i in range(1, 10)}
    | {(i, i + 1) for i in range(1, 9)}
    | {(9, 1)}
    | {(i, 1) for i in range(2, 9)}  # aborted cycle
)

TABLE_SURFACE = "table"

_Z = np.array([0.0, 0.0, 1.0])
_FREE_LIN = 0.05  # speed clamp on user-controlled motion, m per step
_FREE_ANG = np.deg2rad(30.0)
_SNAP_LIN = 0.02  # auto-drive step bounds
_SNAP_ANG_DEG = 20.0
_DETECT_RANGE = 0.3  # a block "is there" inside this radius
_PICK_GATE = 0.5  # pick-up probability that arms the object snap
_CONTACT = 0.005  # resting slack when locating support planes


@dataclass(frozen=True)
class Thresholds:
    delta1: float = 0.06  # hand-object snap distance
    delta2: float = 0.04  # controller lift that unsnaps from the plane
    delta3: float = 0.06  # hand-plane snap distance

    def __post_init__(self):
        for name in ("delta1", "delta2", "delta3"):
            if not getattr(self, name) > 0.0:
                raise BehaviorError(f"{name} must be > 0")


@dataclass(frozen=True)
class ControllerInput:
    hand: str
    pose: Pose  # commanded hand pose, raw from the operator
    grasp_button: bool = False
    finger_open: bool = False

    def __post_init__(self):
        if self.hand not in ("left", "right"):
            raise BehaviorError(f"unknown hand {self.hand!r}")


@dataclass(frozen=True)
class MotionCommand:
    pose: Pose
    control_level: ControlLevel
    gripper: Gripper = Gripper.HOLD


@dataclass(frozen=True)
class HandWorld:
    """What one hand's machine sees: every block pose, what this hand is
    holding, which blocks already sit in the structure, and which ones the
    other hand has claimed."""

    blocks: Mapping[str, Pose]
    held: str | None = None
    placed: frozenset = frozenset()
    claimed: frozenset = frozenset()


@dataclass(frozen=True)
class HandState:
    """One hand's machine: current behavior plus the working geometry it
    accumulated on the way (grasp target, active plane, lift height,
    placement hand pose)."""

    ee: Pose
    behavior: BehaviorId = BehaviorId.APPROACH_OBJECT
    target: str | None = None
    plane_ref: str | None = None
    plane_z: float | None = None
    lift_z: float | None = None
    place_ee: Pose | None = None
    fault: bool = False


def snap_trajectory(
    current: Pose,
    target: Pose,
    max_lin: float = _SNAP_LIN,
    max_ang_deg: float = _SNAP_ANG_DEG,
) -> Pose:
    """One bounded step from current toward target: linear in position,
    spherical in orientation, landing exactly on the target once both
    residuals fit inside the step."""
    if max_lin <= 0.0 or max_ang_deg <= 0.0:
        raise BehaviorError("step bounds must be > 0")
    p, q = kernels.step_toward(
        current.position,
        current.orientation,
        target.position,
        target.orientation,
        float(max_lin),
        float(np.deg2rad(max_ang_deg)),
    )
    return Pose(p, q)


def plane_constrain(commanded: Pose, plane_z: float) -> Pose:
    """Project a commanded hand pose onto a horizontal support plane: the
    height is pinned to the contact height, tilt is removed, and only the
    in-plane translation plus rotation about the plane normal survive."""
    p = commanded.position.copy()
    p[2] = float(plane_z)
    q = kernels.twist_about_axis(commanded.orientation, _Z)
    return Pose(p, q)


def grasp_pose(block: Pose, shape: BlockShape = BlockShape()) -> Pose:
    """Hand pose that grips a block: centered on the top face, frame
    aligned with the block's so the gripper closes across the medium
    axis."""
    p = block.position.copy()
    p[2] += shape.vertical_extent(block)
    return Pose(p, block.orientation)


def grasp_manifold_motion(
    commanded: Pose,
    obj: Pose,
    shape: BlockShape = BlockShape(),
    anchor: Pose | None = None,
) -> Pose:
    """Clamp a commanded pose to the family of poses the grasp allows:
    slide along the object's medium axis and twist about it.  Everything
    else -- in particular translation into the object -- is projected
    out."""
    if anchor is None:
        anchor = grasp_pose(obj, shape)
    u = np.ascontiguousarray(obj.rotation_matrix()[:, 1])  # medium axis
    d = float(np.dot(commanded.position - anchor.position, u))
    p = anchor.position + d * u
    delta = kernels.quat_mul(commanded.orientation, kernels.quat_conj(anchor.orientation))
    q = kernels.quat_mul(kernels.twist_about_axis(delta, u), anchor.orientation)
    return Pose(p, q)


def support_plane(
    blocks: Mapping[str, Pose], under: str, shape: BlockShape = BlockShape()
) -> tuple[str, float]:
    """Surface the named block rests on: the highest other-block top face
    that meets its bottom and overlaps its footprint, else the table."""
    pose = blocks[under]
    bottom = shape.bottom_z(pose)
    ref, z = TABLE_SURFACE, 0.0
    for bid, bp in blocks.items():
        if bid == under:
            continue
        top = shape.top_z(bp)
        if abs(top - bottom) > _CONTACT or top <= z:
            continue
        if kernels.footprints_overlap(
            pose.position, pose.orientation, bp.position, bp.orientation, shape.extents_array
        ):
            ref, z = bid, top
    return ref, z


def placement_plane(
    blocks: Mapping[str, Pose], held: str, shape: BlockShape = BlockShape()
) -> tuple[str, float]:
    """Highest surface below the held block's footprint (its landing
    plane if it were lowered straight down)."""
    pose = blocks[held]
    bottom = shape.bottom_z(pose)
    ref, z = TABLE_SURFACE, 0.0
    for bid, bp in blocks.items():
        if bid == held:
            continue
        top = shape.top_z(bp)
        if top - bottom > _CONTACT or top <= z:
            continue
        if kernels.footprints_overlap(
            pose.position, pose.orientation, bp.position, bp.orientation, shape.extents_array
        ):
            ref, z = bid, top
    return ref, z


def _free_step(current: Pose, commanded: Pose) -> Pose:
    # commanded pose with the per-step speed clamp applied
    p, q = kernels.step_toward(
        current.position,
        current.orientation,
        commanded.position,
        commanded.orientation,
        _FREE_LIN,
        _FREE_ANG,
    )
    return Pose(p, q)


def _drop_pose(block: Pose, plane_z: float, shape: BlockShape) -> Pose:
    # block lowered straight down onto the plane; tilt removed by the
    # smallest rotation that makes its most-vertical body axis plumb, so a
    # block carried upright stays upright instead of flopping flat
    m = block.rotation_matrix()
    k = int(np.argmax(np.abs(m[2, :])))
    v = m[:, k] if m[2, k] >= 0.0 else -m[:, k]
    axis = np.cross(v, _Z)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        q = block.orientation
    else:
        ang = float(np.arctan2(n, v[2]))
        fix = Pose.from_axis_angle(axis / n, ang).orientation
        q = kernels.quat_mul(fix, block.orientation)
    flat = Pose(block.position, q)
    p = block.position.copy()
    p[2] = plane_z + shape.vertical_extent(flat)
    return Pose(p, q)


def _place_hand_pose(ee: Pose, held: Pose, block_target: Pose) -> Pose:
    # hand pose that puts the rigidly attached block at block_target
    attach = ee.inverse().compose(held)
    return block_target.compose(attach.inverse())


def _pick_target(
    ee: Pose, world: HandWorld, plan: PlanStep | None, mode: AssistMode
) -> str | None:
    """Grasp candidate: the plan's block when it names one, else the
    nearest block this hand may take."""
    if mode is AssistMode.M3 and plan is not None and plan.world_node is not None:
        t = plan.world_node
        if t in world.blocks and t not in world.claimed and t != world.held:
            return t
        return None
    if mode is AssistMode.M3 and plan is not None:
        pool = [b for b in world.blocks if b not in world.placed and b not in world.claimed]
    else:
        pool = [b for b in world.blocks if b not in world.claimed]
    pool = sorted(b for b in pool if b != world.held)
    if not pool:
        return None
    dists = [float(np.linalg.norm(ee.position - world.blocks[b].position)) for b in pool]
    return pool[int(np.argmin(dists))]


def _reset(state: HandState) -> HandState:
    return HandState(ee=state.ee)


def step(
    state: HandState,
    inp: ControllerInput,
    world: HandWorld,
    intent: IntentEstimate | None = None,
    plan: PlanStep | None = None,
    mode: AssistMode = AssistMode.M3,
    th: Thresholds = Thresholds(),
    shape: BlockShape = BlockShape(),
) -> tuple[HandState, MotionCommand, list[FeedbackEvent]]:
    """Advance one hand's machine by one controller sample.

    Evaluates exactly the current behavior's trigger, returns the next
    state, the motion command for this step (control level taken from the
    behavior the machine is in *after* the step), and the feedback events
    fired by an entry, if any.
    """
    if mode is AssistMode.M1:
        # direct retargeting: the machine never engages
        if inp.grasp_button:
            grip = Gripper.CLOSE
        elif inp.finger_open:
            grip = Gripper.OPEN
        else:
            grip = Gripper.HOLD
        return state, MotionCommand(inp.pose, ControlLevel.FREE_6DOF, grip), []

    if world.held is not None and world.held not in world.blocks:
        # the hand claims a block the world no longer has
        return (
            replace(state, fault=True),
            MotionCommand(state.ee, ControlLevel.LOCKED),
            [],
        )
    if state.fault:
        if world.held is not None:
            return state, MotionCommand(state.ee, ControlLevel.LOCKED), []
        nxt = _reset(state)  # consistent again: fresh cycle next step
        return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []

    b = state.behavior

    if b is BehaviorId.APPROACH_OBJECT:
        ee = _free_step(state.ee, inp.pose)
        target = _pick_target(ee, world, plan, mode)
        armed = (
            world.held is None
            and target is not None
            and intent is not None
            and intent.action_prob(inp.hand, "pick_up") > _PICK_GATE
        )
        if armed:
            dist = float(np.linalg.norm(ee.position - world.blocks[target].position))
            if dist <= _DETECT_RANGE and dist < th.delta1:
                nxt = replace(state, behavior=BehaviorId.SNAP_TO_OBJECT, ee=ee, target=target)
                events = [FeedbackEvent(FeedbackKind.OBJECT_HIGHLIGHT, target)]
                if (
                    mode is AssistMode.M3
                    and plan is not None
                    and plan.parent is not None
                    and plan.parent != target
                    and plan.parent in world.blocks
                ):
                    # plan-predicted destination block
                    events.append(FeedbackEvent(FeedbackKind.OBJECT_HIGHLIGHT, plan.parent))
                return nxt, MotionCommand(ee, ControlLevel.AUTO_DRIVE), events
        grip = Gripper.OPEN if inp.finger_open else Gripper.HOLD
        return (
            replace(state, ee=ee, target=None),
            MotionCommand(ee, ControlLevel.FREE_6DOF, grip),
            [],
        )

    if b is BehaviorId.SNAP_TO_OBJECT:
        t = state.target
        if t is None or t not in world.blocks or t in world.claimed:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        gp = grasp_pose(world.blocks[t], shape)
        ee = snap_trajectory(state.ee, gp)
        if ee.approx_equal(gp, 1e-9, 1e-7):
            nxt = replace(state, behavior=BehaviorId.ALIGN_WITH_OBJECT, ee=ee)
            return nxt, MotionCommand(ee, ControlLevel.NULLSPACE), []
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.AUTO_DRIVE), []

    if b is BehaviorId.ALIGN_WITH_OBJECT:
        t = state.target
        if t is None or t not in world.blocks or t in world.claimed:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        ee = grasp_manifold_motion(inp.pose, world.blocks[t], shape)
        if inp.grasp_button:
            nxt = replace(state, behavior=BehaviorId.GRASP_OBJECT, ee=ee)
            return (
                nxt,
                MotionCommand(ee, ControlLevel.LOCKED, Gripper.CLOSE),
                [FeedbackEvent(FeedbackKind.HAPTIC_CLICK)],
            )
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.NULLSPACE), []

    if b is BehaviorId.GRASP_OBJECT:
        h = world.held
        if h is None:
            if not inp.grasp_button:
                # button released before the grip closed
                nxt = _reset(state)
                return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
            return state, MotionCommand(state.ee, ControlLevel.LOCKED, Gripper.CLOSE), []
        ref, z = support_plane(world.blocks, h, shape)
        if abs(shape.bottom_z(world.blocks[h]) - z) <= _CONTACT:
            nxt = replace(
                state, behavior=BehaviorId.ALIGN_WITH_SURFACE, plane_ref=ref, plane_z=z
            )
            return (
                nxt,
                MotionCommand(state.ee, ControlLevel.ON_PLANE),
                [FeedbackEvent(FeedbackKind.PLANE_HIGHLIGHT, ref)],
            )
        # grasped mid-air somehow: hold position until the world settles
        return state, MotionCommand(state.ee, ControlLevel.LOCKED, Gripper.CLOSE), []

    if b is BehaviorId.ALIGN_WITH_SURFACE:
        h = world.held
        if h is None:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        # hand height at which the held block's bottom meets the plane
        contact_z = float(state.ee.position[2]) + (
            float(state.plane_z) - shape.bottom_z(world.blocks[h])
        )
        if float(inp.pose.position[2]) - contact_z > th.delta2:
            lift_z = contact_z + 4.0 * shape.half_short  # twice the short extent
            nxt = replace(state, behavior=BehaviorId.UNSNAP_SURFACE, lift_z=lift_z)
            return nxt, MotionCommand(state.ee, ControlLevel.AUTO_DRIVE), []
        ee = plane_constrain(inp.pose, contact_z)
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.ON_PLANE), []

    if b is BehaviorId.UNSNAP_SURFACE:
        if world.held is None:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        tgt = Pose(
            np.array([state.ee.position[0], state.ee.position[1], float(state.lift_z)]),
            state.ee.orientation,
        )
        ee = snap_trajectory(state.ee, tgt)
        if ee.approx_equal(tgt, 1e-9, 1e-7):
            nxt = replace(state, behavior=BehaviorId.APPROACH_SURFACE, ee=ee)
            return nxt, MotionCommand(ee, ControlLevel.FREE_6DOF), []
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.AUTO_DRIVE), []

    if b is BehaviorId.APPROACH_SURFACE:
        h = world.held
        if h is None:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        if inp.finger_open:
            # dropped mid-carry: the cycle restarts
            nxt = _reset(state)
            return nxt, MotionCommand(state.ee, ControlLevel.FREE_6DOF, Gripper.OPEN), []
        ee = _free_step(state.ee, inp.pose)
        held_pose = world.blocks[h]
        if mode is AssistMode.M3 and plan is not None:
            # placement defined by the plan's synthesized pose
            ref = plan.parent if plan.parent is not None else TABLE_SURFACE
            plane_z = shape.bottom_z(plan.target_pose)
            place_ee = _place_hand_pose(state.ee, held_pose, plan.target_pose)
            hit = float(np.linalg.norm(ee.position - place_ee.position)) < th.delta3
        else:
            ref, plane_z = placement_plane(world.blocks, h, shape)
            place_ee = _place_hand_pose(
                state.ee, held_pose, _drop_pose(held_pose, plane_z, shape)
            )
            descending = float(inp.pose.position[2]) < float(state.ee.position[2]) - 1e-12
            hit = descending and (shape.bottom_z(held_pose) - plane_z) < th.delta3
        if hit:
            nxt = replace(
                state,
                behavior=BehaviorId.SNAP_TO_SURFACE,
                ee=ee,
                plane_ref=ref,
                plane_z=plane_z,
                place_ee=place_ee,
            )
            return (
                nxt,
                MotionCommand(ee, ControlLevel.AUTO_DRIVE),
                [FeedbackEvent(FeedbackKind.PLANE_HIGHLIGHT, ref)],
            )
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.FREE_6DOF), []

    if b is BehaviorId.SNAP_TO_SURFACE:
        if world.held is None:
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        if inp.finger_open:
            nxt = replace(state, behavior=BehaviorId.RELEASE_OBJECT)
            return nxt, MotionCommand(state.ee, ControlLevel.LOCKED, Gripper.OPEN), []
        ee = snap_trajectory(state.ee, state.place_ee)
        return replace(state, ee=ee), MotionCommand(ee, ControlLevel.AUTO_DRIVE), []

    if b is BehaviorId.RELEASE_OBJECT:
        if world.held is None:
            # released: the next pick-place cycle begins
            nxt = _reset(state)
            return nxt, MotionCommand(nxt.ee, ControlLevel.FREE_6DOF), []
        return state, MotionCommand(state.ee, ControlLevel.LOCKED, Gripper.OPEN), []

    raise BehaviorError(f"unknown behavior {b!r}")
