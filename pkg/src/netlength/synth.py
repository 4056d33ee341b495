"""Synthetic test networks and planted aggregation cases."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .network import PointSet, RoadNetwork
from .process import generate_csr, make_rng, run_seed

__all__ = [
    "HYBRID_TOTAL_LENGTH",
    "grid_network",
    "radial_network",
    "hybrid_network",
    "urban_network",
    "make_network",
    "gen_linear_aggregation",
    "gen_radial_aggregation",
    "Component",
    "CaseSpec",
    "case_spec",
    "compose_case",
    "maximal_mask",
    "planted_linear",
]

HYBRID_TOTAL_LENGTH = 35.97


class _Builder:
    def __init__(self):
        self.nodes = {}
        self.edges = []

    def node(self, x, y):
        key = (round(x, 9), round(y, 9))
        nid = self.nodes.get(key)
        if nid is None:
            nid = self.nodes[key] = str(len(self.nodes))
        return nid

    def edge(self, p, q, length=None):
        u, v = self.node(*p), self.node(*q)
        eid = str(len(self.edges))
        self.edges.append((eid, u, v, length))
        return eid

    def build(self, meta=None):
        coords = {nid: key for key, nid in self.nodes.items()}
        nodes = {nid: coords[nid] for nid in sorted(coords, key=int)}
        return RoadNetwork(nodes, self.edges, meta)


def grid_network(rows: int = 3, cols: int = 3, spacing: float = 1.0) -> RoadNetwork:
    """Rectangular lattice of ``rows x cols`` nodes joined by edges of length ``spacing``."""
    if rows < 1 or cols < 1 or (rows * cols) < 2 or spacing <= 0:
        raise ValueError("grid needs at least two nodes and positive spacing")
    b = _Builder()
    for r in range(rows):
        for c in range(cols):
            b.node(c * spacing, r * spacing)
    for r in range(rows):
        for c in range(cols - 1):
            b.edge((c * spacing, r * spacing), ((c + 1) * spacing, r * spacing))
    for r in range(rows - 1):
        for c in range(cols):
            b.edge((c * spacing, r * spacing), (c * spacing, (r + 1) * spacing))
    return b.build({"pattern": "grid", "rows": rows, "cols": cols, "spacing": spacing})


def radial_network(spokes: int = 6, spoke_length: float = 2.0, rings: int = 0) -> RoadNetwork:
    """Spokes from a hub at the origin, optionally joined by ``rings`` polygonal rings.

    Rings sit at equal radial spacing; the outermost one passes through the
    spoke tips.
    """
    if spokes < 1 or spoke_length <= 0 or rings < 0:
        raise ValueError("radial network needs positive spokes and length")
    if rings and spokes < 3:
        raise ValueError("rings need at least 3 spokes")
    b = _Builder()
    b.node(0.0, 0.0)
    radii = [spoke_length * (k + 1) / max(rings, 1) for k in range(max(rings, 1))]
    if not rings:
        radii = [spoke_length]
    angles = [2 * math.pi * s / spokes for s in range(spokes)]
    for a in angles:
        prev = (0.0, 0.0)
        for rad in radii:
            p = (rad * math.cos(a), rad * math.sin(a))
            b.edge(prev, p, spoke_length / len(radii))
            prev = p
    for rad in radii[: rings]:
        for s, a in enumerate(angles):
            a2 = angles[(s + 1) % spokes]
            b.edge((rad * math.cos(a), rad * math.sin(a)), (rad * math.cos(a2), rad * math.sin(a2)))
    return b.build({"pattern": "radial", "spokes": spokes, "spoke_length": spoke_length, "rings": rings})


def _hybrid_length(s, w, n=4):
    # grid streets, corner-cell diagonals and the two crossing half-diagonal pairs
    rows = n * (2 * s + w)
    cols = n * (n - 1) * s
    return rows + cols + 4 * s * math.sqrt(2) + 2 * math.hypot(w, s)


def hybrid_network(target_length: float = HYBRID_TOTAL_LENGTH, avenue: float = 1.8) -> RoadNetwork:
    """4 x 4 node grid with both long diagonals, sized to ``target_length``.

    The middle column of blocks is ``avenue`` wide, so the middle edge of
    the bottom street is a junction-free straight run long enough for a
    unit linear aggregation. The other block sides share one spacing,
    solved so the total length equals ``target_length``. The diagonals
    cross at the center of the middle cell, which makes the four inner
    grid nodes degree-6 junctions. Landmarks for the aggregation
    generators are recorded in ``meta``.
    """
    from scipy.optimize import brentq

    if avenue <= 0:
        raise ValueError("avenue width must be positive")
    if _hybrid_length(1e-9, avenue) >= target_length:
        raise ValueError("target length too short for the requested avenue")
    s = brentq(lambda x: _hybrid_length(x, avenue) - target_length, 1e-9, target_length, xtol=1e-15)
    xs = [0.0, s, s + avenue, 2 * s + avenue]
    ys = [0.0, s, 2 * s, 3 * s]
    b = _Builder()
    for r in range(4):
        for c in range(3):
            b.edge((xs[c], ys[r]), (xs[c + 1], ys[r]))
    for r in range(3):
        for c in range(4):
            b.edge((xs[c], ys[r]), (xs[c], ys[r + 1]))
    mid = ((xs[1] + xs[2]) / 2, (ys[1] + ys[2]) / 2)
    for (c0, r0), (c1, r1) in [((0, 0), (1, 1)), ((2, 2), (3, 3)), ((0, 3), (1, 2)), ((2, 1), (3, 0))]:
        b.edge((xs[c0], ys[r0]), (xs[c1], ys[r1]))
    for c, r in [(1, 1), (2, 2), (1, 2), (2, 1)]:
        b.edge((xs[c], ys[r]), mid)
    meta = {
        "pattern": "hybrid",
        "spacing": s,
        "avenue": avenue,
        "linear_edge": "1",
        "radial_node": b.node(xs[2], ys[2]),
    }
    return b.build(meta)


def urban_network(size: int = 32, jitter: float = 0.15, seed=0, blocks: int = 3) -> RoadNetwork:
    """Jittered ``size x size`` street lattice with one straight boulevard.

    Node positions are perturbed uniformly by up to ``jitter`` and edge
    lengths are Euclidean. In the middle row the two central side streets
    are removed and the three blocks between them become a single straight
    edge, recorded as ``meta["linear_edge"]``.
    """
    if blocks < 1 or size < blocks + 3:
        raise ValueError("urban network needs size >= blocks + 3")
    if not 0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")
    rng = make_rng(seed)
    xy = np.stack(np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float)), axis=-1)
    xy = xy + rng.uniform(-jitter, jitter, size=xy.shape)
    r0, c0 = size // 2, (size - blocks) // 2
    gone = {(r0, c0 + k) for k in range(1, blocks)}
    b = _Builder()
    pt = lambda r, c: (float(xy[r, c, 0]), float(xy[r, c, 1]))
    for r in range(size):
        for c in range(size - 1):
            if r == r0 and c0 <= c < c0 + blocks:
                continue
            b.edge(pt(r, c), pt(r, c + 1))
    for r in range(size - 1):
        for c in range(size):
            if (r, c) in gone or (r + 1, c) in gone:
                continue
            b.edge(pt(r, c), pt(r + 1, c))
    boulevard = b.edge(pt(r0, c0), pt(r0, c0 + blocks))
    meta = {"pattern": "urban", "size": size, "jitter": jitter, "blocks": blocks, "linear_edge": boulevard}
    return b.build(meta)


def make_network(pattern: str, **sizes) -> RoadNetwork:
    if pattern == "grid":
        return grid_network(**sizes)
    if pattern == "radial":
        return radial_network(**sizes)
    if pattern == "hybrid":
        return hybrid_network(**sizes)
    if pattern == "urban":
        return urban_network(**sizes)
    raise ValueError(f"unknown network pattern {pattern!r}")


def _linear_edge(net: RoadNetwork, length: float) -> int:
    if "linear_edge" in net.meta:
        e = net.edge_index(net.meta["linear_edge"])
        if net.edge_length[e] >= length:
            return e
    ok = np.flatnonzero(net.edge_length >= length)
    if ok.size == 0:
        raise ValueError(f"no edge of length >= {length} for a linear aggregation")
    return int(ok[np.argmax(net.edge_length[ok])])


def gen_linear_aggregation(
    net: RoadNetwork, seed=None, length: float = 1.0, count: int = 100, edge=None
) -> PointSet:
    """``count`` uniform points on a ``length`` stretch centered on one straight edge."""
    e = _linear_edge(net, length) if edge is None else net.edge_index(edge)
    total = net.edge_length[e]
    if total < length:
        raise ValueError("edge shorter than the aggregation")
    rng = make_rng(seed)
    start = (total - length) / 2
    offset = start + rng.uniform(0.0, length, size=count)
    return PointSet(net, np.full(count, e), offset, np.ones(count, dtype=bool))


def _radial_node(net: RoadNetwork, arm: float, arms: int) -> int:
    deg = np.bincount(np.concatenate([net.edge_from, net.edge_to]), minlength=net.n_nodes)
    cands = []
    if "radial_node" in net.meta:
        cands.append(net.node_index(net.meta["radial_node"]))
    cands.extend(int(i) for i in np.flatnonzero(deg == arms))
    for v in cands:
        inc = np.flatnonzero((net.edge_from == v) | (net.edge_to == v))
        if inc.size == arms and np.all(net.edge_length[inc] >= arm):
            return v
    raise ValueError(f"no degree-{arms} junction with arms >= {arm}")


def gen_radial_aggregation(
    net: RoadNetwork, seed=None, arm_length: float = 0.5, count: int = 120, node=None, arms: int = 6
) -> PointSet:
    """``count`` points uniform over the first ``arm_length`` of every arm of a junction."""
    v = _radial_node(net, arm_length, arms) if node is None else net.node_index(node)
    inc = np.flatnonzero((net.edge_from == v) | (net.edge_to == v))
    rng = make_rng(seed)
    pick = inc[rng.integers(0, inc.size, size=count)]
    dist = rng.uniform(0.0, arm_length, size=count)
    offset = np.where(net.edge_from[pick] == v, dist, net.edge_length[pick] - dist)
    return PointSet(net, pick, offset, np.ones(count, dtype=bool))


@dataclass(frozen=True)
class Component:
    kind: str
    h: float
    count: int

    @property
    def intensity(self) -> float:
        return self.count / self.h


@dataclass(frozen=True)
class CaseSpec:
    case_id: int
    components: tuple
    background: int
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_points(self) -> int:
        return self.background + sum(c.count for c in self.components)


_LINEAR = Component("linear", 1.0, 100)
_RADIAL = Component("radial", 3.0, 120)
_CASES = {
    1: ((_LINEAR,), 50),
    2: ((_RADIAL,), 50),
    3: ((_RADIAL, _LINEAR), 50),
    4: ((_LINEAR,), 300),
}


def case_spec(case_id: int, seed: int = 0) -> CaseSpec:
    try:
        comps, bg = _CASES[int(case_id)]
    except KeyError:
        raise ValueError("case must be 1, 2, 3 or 4") from None
    return CaseSpec(int(case_id), comps, bg, seed)


def compose_case(spec: CaseSpec, net: Optional[RoadNetwork] = None):
    """Network plus labeled points: planted components followed by CSR background.

    Points carry ids ``"<kind><k>"`` for planted members and ``"bg<k>"``
    for the background. Every component draws from its own seed stream.
    """
    net = hybrid_network() if net is None else net
    parts, ids = [], []
    for k, comp in enumerate(spec.components):
        rs = run_seed(spec.seed, k)
        if comp.kind == "linear":
            p = gen_linear_aggregation(net, rs, comp.h, comp.count)
        elif comp.kind == "radial":
            p = gen_radial_aggregation(net, rs, comp.h / 6, comp.count)
        else:
            raise ValueError(f"unknown component kind {comp.kind!r}")
        parts.append(p)
        ids.extend(f"{comp.kind}{j}" for j in range(p.n))
    bg = generate_csr(net, spec.background, run_seed(spec.seed, len(spec.components)))
    parts.append(PointSet(net, bg.edge, bg.offset, np.zeros(bg.n, dtype=bool)))
    ids.extend(f"bg{j}" for j in range(bg.n))
    pts = PointSet.concatenate(parts)
    pts = PointSet(net, pts.edge, pts.offset, pts.labels, tuple(ids))
    return net, pts


def maximal_mask(spec: CaseSpec, pts: PointSet) -> np.ndarray:
    """Members of the planted component with the highest network intensity.

    This is the ground truth for extracting the maximal aggregation; in
    cases with several components the weaker ones count as negatives.
    """
    best = max(spec.components, key=lambda c: c.intensity).kind
    if pts.point_ids is None:
        raise ValueError("points carry no ids")
    return np.array([pid.startswith(best) for pid in pts.point_ids])


def planted_linear(net: RoadNetwork, seed=0, length: float = 3.0, count: int = 150, background: int = 600):
    """One linear aggregation on ``meta["linear_edge"]`` under CSR background.

    Returns labeled points with ids ``linear<k>`` and ``bg<k>``.
    """
    agg = gen_linear_aggregation(net, run_seed(seed, 0), length, count)
    bg = generate_csr(net, background, run_seed(seed, 1))
    ids = tuple(f"linear{j}" for j in range(agg.n)) + tuple(f"bg{j}" for j in range(bg.n))
    pts = PointSet.concatenate([agg, PointSet(net, bg.edge, bg.offset, np.zeros(bg.n, dtype=bool))])
    return PointSet(net, pts.edge, pts.offset, pts.labels, ids)
