import itertools
import math

import numpy as np

from teleassist.geometry import BlockShape, Pose
from teleassist.scene_graph import (
    Edge,
    EdgeKind,
    SceneGraph,
    Tolerances,
    build_scene_graph,
)

SHAPE = BlockShape()
TOL = Tolerances.for_shape(SHAPE)

# canonical resting orientations (long axis +x unless noted)
LIE_X = Pose.identity()
LIE_Y = Pose.from_axis_angle([0, 0, 1], math.pi / 2)
STAND = Pose.from_axis_angle([0, 1, 0], -math.pi / 2)  # long axis up, front +y
SIDELIE_X = Pose.from_axis_angle([1, 0, 0], math.pi / 2)  # medium axis up


def posed(base: Pose, x=0.0, y=0.0, z=None, yaw=0.0):
    """Block pose: yaw about world z applied to a canonical orientation, then
    translated; z defaults to resting-on-table height."""
    q = Pose.from_axis_angle([0, 0, 1], yaw).compose(base).orientation
    if z is None:
        z = SHAPE.vertical_extent(Pose((0, 0, 0), q))
    return Pose((x, y, z), q)


def random_scene(rng, n_blocks, jitter=0.0):
    """Sequentially placed blocks: on the table or stacked on an earlier one."""
    bases = [LIE_X, STAND, SIDELIE_X]
    blocks = {}
    for k in range(n_blocks):
        bid = f"B{k + 1}"
        base = bases[rng.integers(len(bases))]
        yaw = float(rng.uniform(0, 2 * math.pi))
        if blocks and rng.random() < 0.5:
            under_id = sorted(blocks)[int(rng.integers(len(blocks)))]
            under = blocks[under_id]
            q = Pose.from_axis_angle([0, 0, 1], yaw).compose(base).orientation
            z = SHAPE.top_z(under) + SHAPE.vertical_extent(Pose((0, 0, 0), q))
            pose = Pose((under.position[0], under.position[1], z), q)
        else:
            pose = posed(
                base,
                x=float(rng.uniform(-0.2, 0.2)),
                y=float(rng.uniform(-0.2, 0.2)),
                yaw=yaw,
            )
        if jitter > 0:
            axis = rng.normal(size=3)
            tilt = Pose.from_axis_angle(axis / np.linalg.norm(axis), rng.normal(0, jitter))
            pose = Pose(pose.position + rng.normal(0, jitter * 1e-2, size=3), tilt.compose(pose).orientation)
        blocks[bid] = pose
    return blocks


def relabel(g: SceneGraph, mapping: dict) -> SceneGraph:
    """Rename node ids, re-canonicalizing lateral edge order (mirror attr
    when the reference side swaps)."""
    nodes = {mapping[i]: p for i, p in g.nodes}
    edges = []
    for e in g.edges:
        a, b = mapping[e.parent], mapping[e.child]
        if e.kind == EdgeKind.SUPPORT or a < b:
            edges.append(Edge(a, b, e.attr))
        else:
            edges.append(Edge(b, a, e.attr.mirrored()))
    return SceneGraph.make(nodes, edges)


def iso_oracle(a: SceneGraph, b: SceneGraph) -> bool:
    """Brute-force isomorphism over all node bijections (tiny graphs only)."""
    if len(a) != len(b):
        return False
    ids_a, ids_b = a.node_ids, b.node_ids
    eb = {(e.parent, e.child): e for e in b.edges}
    for perm in itertools.permutations(ids_b):
        m = dict(zip(ids_a, perm))
        ok = len(a.edges) == len(b.edges)
        for e in a.edges:
            u, v = m[e.parent], m[e.child]
            if e.kind == EdgeKind.SUPPORT:
                o = eb.get((u, v))
                if o is None or o.attr != e.attr:
                    ok = False
                    break
            else:
                lo, hi = (u, v) if u < v else (v, u)
                o = eb.get((lo, hi))
                want = e.attr if (u < v) else e.attr.mirrored()
                if o is None or o.kind != EdgeKind.LATERAL or o.attr != want:
                    ok = False
                    break
        if ok:
            return True
    return False


def scene_graph_of(blocks):
    return build_scene_graph(blocks, SHAPE, TOL)


def random_graph(rng, max_nodes=4, edge_prob=0.45, prefix="B"):
    """Random valid scene graph structure (poses omitted): supports follow a
    random topological order, laterals stored canonically."""
    from teleassist.scene_graph import enumerate_legal_attrs

    attrs = enumerate_legal_attrs()
    support_attrs = [a for a in attrs if a.kind == EdgeKind.SUPPORT]
    lateral_attrs = [a for a in attrs if a.kind == EdgeKind.LATERAL]
    n = int(rng.integers(0, max_nodes + 1))
    ids = [f"{prefix}{k + 1}" for k in range(n)]
    order = list(ids)
    rng.shuffle(order)
    rank = {b: i for i, b in enumerate(order)}
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = ids[i], ids[j]
            r = rng.random()
            if r < edge_prob / 2:
                lo, hi = (a, b) if rank[a] < rank[b] else (b, a)
                edges.append(Edge(lo, hi, support_attrs[rng.integers(len(support_attrs))]))
            elif r < edge_prob:
                edges.append(Edge(a, b, lateral_attrs[rng.integers(len(lateral_attrs))]))
    return SceneGraph.make({i: None for i in ids}, edges)
