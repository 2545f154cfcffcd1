"""Attributed scene graphs of placed blocks.

Nodes carry raw block poses; edges carry discrete spatial relations produced
by the rule-based heuristic :func:`relation_heuristic`. Two edge kinds exist:

* ``SUPPORT`` -- the child rests on the parent (touching faces, overlapping
  horizontal footprints). Attributes: child orientation class, front
  parallel/perpendicular, and the child's center offset along the parent's
  heading (Center/Left/Right).
* ``LATERAL`` -- the blocks sit at the same height within neighbor range.
  Single attribute: which side the higher-id block lies on, measured along
  the lower-id (reference) block's front-face normal.

Conventions not fixed by the relation table itself (all configurable through
:class:`Tolerances`, all deterministic):

* "heading" of a block = horizontal projection of its long axis; for a
  standing block (long axis vertical) the medium axis is used instead, then
  the short axis if that is vertical too.
* "front" of a block = horizontal projection of its medium axis, falling
  back to short then long when degenerate.
* signed offsets: positive along the reference direction = Right.
* the table is not a node; on-table blocks simply have no support parent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .geometry import BlockShape, Pose

_UP = np.array([0.0, 0.0, 1.0])


class SceneGraphError(ValueError):
    pass


class DuplicateBlockError(SceneGraphError):
    pass


class OriClass(IntEnum):
    NONE = 0
    STAND = 1
    LIE = 2
    SIDELIE = 3


class FrontRel(IntEnum):
    NONE = 0
    PARALLEL = 1
    PERPENDICULAR = 2


class ParentPos(IntEnum):
    NONE = 0
    CENTER = 1
    LEFT = 2
    RIGHT = 3


class NeighborPos(IntEnum):
    NONE = 0
    LEFT = 1
    RIGHT = 2


class EdgeKind(IntEnum):
    SUPPORT = 0
    LATERAL = 1


@dataclass(frozen=True)
class EdgeAttr:
    """Four discrete relation labels. Support edges use the first three
    fields (pos_neighbor = None); lateral edges use only pos_neighbor."""

    ori_parent: OriClass = OriClass.NONE
    ori_front: FrontRel = FrontRel.NONE
    pos_parent: ParentPos = ParentPos.NONE
    pos_neighbor: NeighborPos = NeighborPos.NONE

    def __post_init__(self):
        object.__setattr__(self, "ori_parent", OriClass(self.ori_parent))
        object.__setattr__(self, "ori_front", FrontRel(self.ori_front))
        object.__setattr__(self, "pos_parent", ParentPos(self.pos_parent))
        object.__setattr__(self, "pos_neighbor", NeighborPos(self.pos_neighbor))
        support_like = self.ori_parent != OriClass.NONE
        lateral_like = self.pos_neighbor != NeighborPos.NONE
        if support_like and lateral_like:
            raise SceneGraphError(f"attr mixes support and lateral fields: {self}")
        if support_like:
            if self.ori_front == FrontRel.NONE or self.pos_parent == ParentPos.NONE:
                raise SceneGraphError(f"incomplete support attr: {self}")
        elif lateral_like:
            if self.ori_front != FrontRel.NONE or self.pos_parent != ParentPos.NONE:
                raise SceneGraphError(f"lateral attr with support fields set: {self}")
        else:
            raise SceneGraphError("empty attr")

    @property
    def kind(self) -> EdgeKind:
        return EdgeKind.SUPPORT if self.ori_parent != OriClass.NONE else EdgeKind.LATERAL

    def as_list(self) -> list[int]:
        return [int(self.ori_parent), int(self.ori_front), int(self.pos_parent), int(self.pos_neighbor)]

    @classmethod
    def from_list(cls, vals) -> "EdgeAttr":
        a, b, c, d = (int(v) for v in vals)
        return cls(OriClass(a), FrontRel(b), ParentPos(c), NeighborPos(d))

    @classmethod
    def support(cls, ori: OriClass, front: FrontRel, pos: ParentPos) -> "EdgeAttr":
        return cls(ori, front, pos, NeighborPos.NONE)

    @classmethod
    def lateral(cls, side: NeighborPos) -> "EdgeAttr":
        return cls(OriClass.NONE, FrontRel.NONE, ParentPos.NONE, side)

    def mirrored(self) -> "EdgeAttr":
        """Attr as seen when the lateral reference side swaps (Left <-> Right)."""
        if self.kind != EdgeKind.LATERAL:
            return self
        side = NeighborPos.RIGHT if self.pos_neighbor == NeighborPos.LEFT else NeighborPos.LEFT
        return EdgeAttr.lateral(side)


def enumerate_legal_attrs() -> list[EdgeAttr]:
    """All attr combinations the heuristic can emit: 18 support + 2 lateral."""
    out = []
    for ori in (OriClass.STAND, OriClass.LIE, OriClass.SIDELIE):
        for front in (FrontRel.PARALLEL, FrontRel.PERPENDICULAR):
            for pos in (ParentPos.CENTER, ParentPos.LEFT, ParentPos.RIGHT):
                out.append(EdgeAttr.support(ori, front, pos))
    out.append(EdgeAttr.lateral(NeighborPos.LEFT))
    out.append(EdgeAttr.lateral(NeighborPos.RIGHT))
    return out


@dataclass(frozen=True)
class Edge:
    parent: str
    child: str
    attr: EdgeAttr

    def __post_init__(self):
        if self.parent == self.child:
            raise SceneGraphError(f"self edge on {self.parent!r}")
        if self.attr.kind == EdgeKind.LATERAL and not self.parent < self.child:
            raise SceneGraphError(
                f"lateral edge must be stored lower-id first: {self.parent!r}, {self.child!r}"
            )

    @property
    def kind(self) -> EdgeKind:
        return self.attr.kind

    def key(self) -> tuple:
        return (self.parent, self.child, int(self.kind), tuple(self.attr.as_list()))


@dataclass(frozen=True)
class Tolerances:
    contact: float = 0.005          # vertical gap of touching faces
    same_height: float = 0.005      # center height difference for laterals
    center: float = 0.01125         # |offset| along parent heading for Center
    neighbor_range: float = 0.27    # max lateral center distance
    parallel_split_deg: float = 45.0

    @classmethod
    def for_shape(cls, shape: BlockShape, center_frac: float = 0.25, range_lengths: float = 3.0) -> "Tolerances":
        return cls(
            center=center_frac * shape.half_long,
            neighbor_range=range_lengths * 2.0 * shape.half_long,
        )


def classify_orientation(pose: Pose, shape: BlockShape) -> OriClass:
    """Which body axis points most world-up: long -> Stand, short -> Lie,
    medium -> SideLie. Invariant under rotation about the vertical."""
    m = pose.rotation_matrix()
    up = np.abs(m[2, :])  # |axis . z| per body axis
    idx = int(np.argmax(up))
    return (OriClass.STAND, OriClass.SIDELIE, OriClass.LIE)[idx]


def _horizontal_unit(m: np.ndarray, axis_order: tuple[int, ...]) -> np.ndarray:
    for idx in axis_order:
        v = np.array([m[0, idx], m[1, idx], 0.0])
        n = float(np.linalg.norm(v))
        if n > 1e-9:
            return v / n
    raise SceneGraphError("degenerate rotation matrix")  # pragma: no cover


def heading_direction(pose: Pose, shape: BlockShape) -> np.ndarray:
    """Horizontal unit vector along the long axis (medium for standing blocks)."""
    m = pose.rotation_matrix()
    if classify_orientation(pose, shape) == OriClass.STAND:
        return _horizontal_unit(m, (1, 2, 0))
    return _horizontal_unit(m, (0, 1, 2))


def front_direction(pose: Pose) -> np.ndarray:
    """Horizontal unit vector along the front-face normal (the medium axis)."""
    return _horizontal_unit(pose.rotation_matrix(), (1, 2, 0))


def lateral_side(ref_pose: Pose, delta: np.ndarray) -> NeighborPos:
    """Which side of ``ref_pose`` a same-height neighbor offset ``delta``
    falls on.  Sign of the offset along the front axis; when the offset is
    perpendicular to the front the leftward axis breaks the tie, so the
    label still flips with the viewpoint and relabeled copies of the same
    scene stay equivalent."""
    f = front_direction(ref_pose)
    s = float(delta[0] * f[0] + delta[1] * f[1])
    if abs(s) <= 1e-9:
        s = float(-delta[0] * f[1] + delta[1] * f[0])
    return NeighborPos.RIGHT if s >= 0.0 else NeighborPos.LEFT


def _rests_on(parent: Pose, child: Pose, shape: BlockShape, tol: Tolerances) -> bool:
    gap = shape.bottom_z(child) - shape.top_z(parent)
    if abs(gap) > tol.contact:
        return False
    if child.position[2] <= parent.position[2]:
        return False
    return bool(
        kernels.footprints_overlap(
            parent.position, parent.orientation, child.position, child.orientation, shape.extents_array
        )
    )


def _front_split(parent: Pose, child: Pose, shape: BlockShape, tol: Tolerances) -> FrontRel:
    hp = heading_direction(parent, shape)
    hc = heading_direction(child, shape)
    cosang = abs(float(np.dot(hp, hc)))  # fold 180-degree ambiguity
    if cosang > np.cos(np.radians(tol.parallel_split_deg)):
        return FrontRel.PARALLEL
    return FrontRel.PERPENDICULAR


def relation_heuristic(
    parent: tuple[str, Pose], child: tuple[str, Pose], shape: BlockShape, tol: Tolerances
) -> EdgeAttr | None:
    """Pairwise relation between two placed blocks; None when unrelated.

    Support is checked child-on-parent (directional). The lateral check is
    symmetric; its attribute is always expressed from the lower id's
    viewpoint, so the result does not depend on argument order.
    """
    pid, ppose = parent
    cid, cpose = child
    if pid == cid:
        raise SceneGraphError(f"relation of block {pid!r} with itself")
    if _rests_on(ppose, cpose, shape, tol):
        ori = classify_orientation(cpose, shape)
        front = _front_split(ppose, cpose, shape, tol)
        hp = heading_direction(ppose, shape)
        s = float(np.dot(cpose.position - ppose.position, hp))
        if abs(s) <= tol.center:
            pos = ParentPos.CENTER
        elif s > 0:
            pos = ParentPos.RIGHT
        else:
            pos = ParentPos.LEFT
        return EdgeAttr.support(ori, front, pos)
    dz = abs(float(ppose.position[2] - cpose.position[2]))
    lateral_dist = float(np.linalg.norm((ppose.position - cpose.position)[:2]))
    if dz <= tol.same_height and lateral_dist <= tol.neighbor_range:
        ref_id, ref_pose = (pid, ppose) if pid < cid else (cid, cpose)
        other_pose = cpose if ref_id == pid else ppose
        return EdgeAttr.lateral(lateral_side(ref_pose, other_pose.position - ref_pose.position))
    return None


@dataclass(frozen=True)
class SceneGraph:
    """Immutable attributed graph; nodes map block id -> Pose (or None for
    pose-free goal nodes)."""

    nodes: tuple[tuple[str, Pose | None], ...] = ()
    edges: frozenset[Edge] = frozenset()

    @classmethod
    def make(cls, nodes: Mapping[str, Pose | None], edges: Iterable[Edge] = ()) -> "SceneGraph":
        items = tuple(sorted(nodes.items(), key=lambda kv: kv[0]))
        g = cls(items, frozenset(edges))
        g.validate()
        return g

    @property
    def node_map(self) -> dict[str, Pose | None]:
        return dict(self.nodes)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def pose_of(self, node_id: str) -> Pose | None:
        for i, p in self.nodes:
            if i == node_id:
                return p
        raise KeyError(node_id)

    def support_parents(self, node_id: str) -> tuple[str, ...]:
        return tuple(
            sorted(e.parent for e in self.edges if e.kind == EdgeKind.SUPPORT and e.child == node_id)
        )

    def incident_edges(self, node_id: str) -> tuple[Edge, ...]:
        return tuple(
            sorted(
                (e for e in self.edges if node_id in (e.parent, e.child)),
                key=Edge.key,
            )
        )

    def validate(self) -> None:
        ids = self.node_ids
        if len(set(ids)) != len(ids):
            raise SceneGraphError("duplicate node ids")
        known = set(ids)
        children: dict[str, list[str]] = {i: [] for i in ids}
        pairs: set[tuple[str, str]] = set()
        for e in self.edges:
            if e.parent not in known or e.child not in known:
                raise SceneGraphError(f"edge references unknown node: {e}")
            pair = (e.parent, e.child) if e.parent < e.child else (e.child, e.parent)
            if pair in pairs:
                raise SceneGraphError(f"multiple edges between {pair[0]!r} and {pair[1]!r}")
            pairs.add(pair)
            if e.kind == EdgeKind.SUPPORT:
                children[e.parent].append(e.child)
        # support edges must be acyclic: depth-first search for back edges
        state: dict[str, int] = {}

        def visit(u: str) -> None:
            state[u] = 1
            for v in children[u]:
                if state.get(v, 0) == 1:
                    raise SceneGraphError(f"support cycle through {v!r}")
                if state.get(v, 0) == 0:
                    visit(v)
            state[u] = 2

        for u in ids:
            if state.get(u, 0) == 0:
                visit(u)

    def structure_key(self) -> tuple:
        """Canonical hashable form ignoring poses (for caching and equality)."""
        return (self.node_ids, tuple(sorted(e.key() for e in self.edges)))


def build_scene_graph(blocks: Mapping[str, Pose], shape: BlockShape, tol: Tolerances) -> SceneGraph:
    ids = sorted(blocks)
    edges: list[Edge] = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            edges.extend(_pair_edges(a, blocks[a], b, blocks[b], shape, tol))
    return SceneGraph.make(dict(blocks), edges)


def _pair_edges(
    a: str, pa: Pose, b: str, pb: Pose, shape: BlockShape, tol: Tolerances
) -> list[Edge]:
    # a < b assumed; support in either direction, else one canonical lateral
    r = relation_heuristic((a, pa), (b, pb), shape, tol)
    if r is not None:
        if r.kind == EdgeKind.SUPPORT:
            return [Edge(a, b, r)]
        return [Edge(a, b, r)]
    r = relation_heuristic((b, pb), (a, pa), shape, tol)
    if r is not None and r.kind == EdgeKind.SUPPORT:
        return [Edge(b, a, r)]
    return []


def add_block(g: SceneGraph, block_id: str, pose: Pose, shape: BlockShape, tol: Tolerances) -> SceneGraph:
    """Append one placed block; only edges incident to it are computed."""
    existing = g.node_map
    if block_id in existing:
        raise DuplicateBlockError(f"block {block_id!r} already in graph")
    new_edges = list(g.edges)
    for other_id, other_pose in g.nodes:
        if other_pose is None:
            raise SceneGraphError(f"cannot extend graph with pose-free node {other_id!r}")
        a, pa, b, pb = (
            (other_id, other_pose, block_id, pose)
            if other_id < block_id
            else (block_id, pose, other_id, other_pose)
        )
        new_edges.extend(_pair_edges(a, pa, b, pb, shape, tol))
    existing[block_id] = pose
    return SceneGraph.make(existing, new_edges)


def _node_signature(g: SceneGraph, node_id: str) -> tuple:
    sig = []
    for e in g.edges:
        if e.kind == EdgeKind.SUPPORT:
            if e.parent == node_id:
                sig.append((0, tuple(e.attr.as_list())))
            elif e.child == node_id:
                sig.append((1, tuple(e.attr.as_list())))
        elif node_id in (e.parent, e.child):
            # fold the reference-side ambiguity so the signature is
            # relabel-invariant
            folded = min(tuple(e.attr.as_list()), tuple(e.attr.mirrored().as_list()))
            sig.append((2, folded))
    return tuple(sorted(sig))


def _edge_lookup(g: SceneGraph) -> dict[tuple[str, str], Edge]:
    return {(e.parent, e.child): e for e in g.edges}


def graphs_equivalent(a: SceneGraph, b: SceneGraph) -> bool:
    """Structure-only isomorphism: a node bijection preserving edge kinds,
    directions, and attributes (lateral attrs mirrored when the reference
    side swaps under the relabeling). Poses are ignored."""
    if len(a) != len(b) or len(a.edges) != len(b.edges):
        return False
    sig_a = {i: _node_signature(a, i) for i in a.node_ids}
    sig_b = {i: _node_signature(b, i) for i in b.node_ids}
    if sorted(sig_a.values()) != sorted(sig_b.values()):
        return False

    b_by_sig: dict[tuple, list[str]] = {}
    for i, s in sig_b.items():
        b_by_sig.setdefault(s, []).append(i)

    a_ids = sorted(a.node_ids, key=lambda i: (len(b_by_sig.get(sig_a[i], ())), i))
    eb = _edge_lookup(b)

    def edges_ok(mapping: dict[str, str]) -> bool:
        mapped = set(mapping)
        for e in a.edges:
            if e.parent not in mapped or e.child not in mapped:
                continue
            u, v = mapping[e.parent], mapping[e.child]
            if e.kind == EdgeKind.SUPPORT:
                other = eb.get((u, v))
                if other is None or other.attr != e.attr:
                    return False
            else:
                lo, hi = (u, v) if u < v else (v, u)
                other = eb.get((lo, hi))
                if other is None or other.kind != EdgeKind.LATERAL:
                    return False
                want = e.attr if (u < v) == (e.parent < e.child) else e.attr.mirrored()
                if other.attr != want:
                    return False
        return True

    used: set[str] = set()
    mapping: dict[str, str] = {}

    def assign(k: int) -> bool:
        if k == len(a_ids):
            return True
        u = a_ids[k]
        for v in b_by_sig.get(sig_a[u], ()):
            if v in used:
                continue
            mapping[u] = v
            used.add(v)
            if edges_ok(mapping) and assign(k + 1):
                return True
            del mapping[u]
            used.discard(v)
        return False

    return assign(0)


# ---------------------------------------------------------------------------
# serialization (also the goal-graph file format)

_KIND_NAMES = {EdgeKind.SUPPORT: "support", EdgeKind.LATERAL: "lateral"}
_KIND_VALUES = {v: k for k, v in _KIND_NAMES.items()}


def graph_to_dict(g: SceneGraph) -> dict:
    nodes = []
    for i, p in g.nodes:
        rec: dict = {"id": i}
        if p is not None:
            rec["pose"] = p.to_list()
        nodes.append(rec)
    edges = [
        {
            "parent": e.parent,
            "child": e.child,
            "kind": _KIND_NAMES[e.kind],
            "attr": e.attr.as_list(),
        }
        for e in sorted(g.edges, key=Edge.key)
    ]
    return {"nodes": nodes, "edges": edges}


def graph_from_dict(doc: Mapping) -> SceneGraph:
    try:
        nodes: dict[str, Pose | None] = {}
        for rec in doc["nodes"]:
            nodes[str(rec["id"])] = Pose.from_array(rec["pose"]) if "pose" in rec else None
        edges = []
        for rec in doc["edges"]:
            attr = EdgeAttr.from_list(rec["attr"])
            kind = _KIND_VALUES[rec["kind"]]
            if attr.kind != kind:
                raise SceneGraphError(f"edge kind {rec['kind']!r} inconsistent with attr {rec['attr']}")
            edges.append(Edge(str(rec["parent"]), str(rec["child"]), attr))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneGraphError(f"malformed graph document: {exc}") from exc
    return SceneGraph.make(nodes, edges)


def graph_to_json(g: SceneGraph, indent: int | None = 2) -> str:
    return json.dumps(graph_to_dict(g), indent=indent)


def graph_from_json(text: str) -> SceneGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneGraphError(f"invalid JSON: {exc}") from exc
    return graph_from_dict(doc)
