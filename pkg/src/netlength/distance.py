"""Shortest-path distances between on-edge locations and neighborhood coverage.

The coverage profile of a center point is the total network length
reachable within network distance ``r``. Every edge (or the two halves of
the center's own edge) contributes::

    min(length, max(0, r - d(u)) + max(0, r - d(v)))

which is piecewise linear in ``r``. The profile is stored as sorted
breakpoints with the slope that holds to their right, so it can be
evaluated and inverted exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .network import NetworkLocation, PointSet, RoadNetwork

__all__ = [
    "UNREACHABLE",
    "TOL",
    "DistanceMatrixRow",
    "CoverageProfile",
    "node_distance_matrix",
    "location_node_distances",
    "shortest_distance",
    "distances_from",
    "pairwise_distances",
    "all_neighbor_distances",
    "neighborhood_length",
    "coverage_profile",
    "coverage_profiles",
    "radius_for_length",
    "count_within_h",
    "neighbor_lengths",
    "neighbor_structure",
]

UNREACHABLE = np.inf
TOL = 1e-9


def _graph(net: RoadNetwork) -> csr_matrix:
    # parallel edges collapse to the shortest one; self-loops never shorten a path
    keep = net.edge_from != net.edge_to
    u = np.concatenate([net.edge_from[keep], net.edge_to[keep]])
    v = np.concatenate([net.edge_to[keep], net.edge_from[keep]])
    w = np.concatenate([net.edge_length[keep], net.edge_length[keep]])
    order = np.lexsort((w, v, u))
    u, v, w = u[order], v[order], w[order]
    first = np.ones(len(u), dtype=bool)
    first[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    n = net.n_nodes
    return csr_matrix((w[first], (u[first], v[first])), shape=(n, n))


def node_distance_matrix(net: RoadNetwork, sources=None) -> np.ndarray:
    """Node-to-node shortest path lengths (rows restricted to ``sources``)."""
    g = _graph(net)
    if sources is None:
        return dijkstra(g, directed=False)
    sources = np.asarray(sources, dtype=np.intp)
    if sources.size == 0:
        return np.zeros((0, net.n_nodes))
    return np.atleast_2d(dijkstra(g, directed=False, indices=sources))


def location_node_distances(net: RoadNetwork, edge, offset) -> np.ndarray:
    """Distance from each on-edge location to every node, shape (n_locations, n_nodes)."""
    edge = np.atleast_1d(np.asarray(edge, dtype=np.intp))
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    u = net.edge_from[edge]
    v = net.edge_to[edge]
    ends, inv = np.unique(np.concatenate([u, v]), return_inverse=True)
    rows = node_distance_matrix(net, ends)
    du = rows[inv[: len(edge)]]
    dv = rows[inv[len(edge):]]
    back = net.edge_length[edge] - offset
    return np.minimum(offset[:, None] + du, back[:, None] + dv)


def shortest_distance(net: RoadNetwork, a: NetworkLocation, b: NetworkLocation) -> float:
    """Network distance between two on-edge locations (``inf`` across components)."""
    ea, eb = net.edge_index(a.edge_id), net.edge_index(b.edge_id)
    nd = location_node_distances(net, [ea], [a.offset])[0]
    d = min(
        nd[net.edge_from[eb]] + b.offset,
        nd[net.edge_to[eb]] + net.edge_length[eb] - b.offset,
    )
    if ea == eb:
        d = min(d, abs(a.offset - b.offset))
    return float(d)


def distances_from(net: RoadNetwork, edge: int, offset: float, pts: PointSet) -> np.ndarray:
    """Network distance from one on-edge location to every point of ``pts``."""
    nd = location_node_distances(net, [edge], [offset])[0]
    e, t = pts.edge, pts.offset
    d = np.minimum(nd[net.edge_from[e]] + t, nd[net.edge_to[e]] + net.edge_length[e] - t)
    same = e == edge
    d[same] = np.minimum(d[same], np.abs(t[same] - offset))
    return d


def _pairwise_from_nodes(pts: PointSet, nd: np.ndarray) -> np.ndarray:
    net = pts.network
    e, t = pts.edge, pts.offset
    d = np.minimum(
        nd[:, net.edge_from[e]] + t[None, :],
        nd[:, net.edge_to[e]] + (net.edge_length[e] - t)[None, :],
    )
    same = e[:, None] == e[None, :]
    direct = np.abs(t[:, None] - t[None, :])
    d = np.where(same, np.minimum(d, direct), d)
    # both directions are computed independently; take the symmetric min
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def pairwise_distances(pts: PointSet) -> np.ndarray:
    """Full symmetric (n, n) network distance matrix."""
    nd = location_node_distances(pts.network, pts.edge, pts.offset)
    return _pairwise_from_nodes(pts, nd)


@dataclass(frozen=True, eq=False)
class DistanceMatrixRow:
    """Distances from point ``index`` to all others.

    ``distances`` has one entry per point (the self entry is 0 and never
    used); ``order`` lists the other points by increasing distance with
    ties kept in index order and ``sorted`` holds the matching distances.
    """

    index: int
    distances: np.ndarray
    order: np.ndarray
    sorted: np.ndarray

    @property
    def nearest(self) -> float:
        return float(self.sorted[0]) if self.sorted.size else UNREACHABLE

    def as_dict(self):
        return {
            "index": self.index,
            "order": self.order.tolist(),
            "sorted": [None if not np.isfinite(x) else float(x) for x in self.sorted],
        }


def _rows_from_matrix(d: np.ndarray) -> list[DistanceMatrixRow]:
    n = d.shape[0]
    rows = []
    for i in range(n):
        others = np.delete(np.arange(n), i)
        di = d[i, others]
        o = np.argsort(di, kind="stable")
        rows.append(DistanceMatrixRow(i, d[i].copy(), others[o], di[o]))
    return rows


def all_neighbor_distances(net: RoadNetwork, pts: PointSet) -> list[DistanceMatrixRow]:
    if pts.n < 2:
        raise ValueError("need at least 2 points")
    if pts.network is not net:
        pts = PointSet(net, pts.edge, pts.offset, pts.labels, pts.point_ids)
    return _rows_from_matrix(pairwise_distances(pts))


class CoverageProfile:
    """Exact piecewise-linear coverage ``l(r)`` around one center.

    Attributes
    ----------
    breakpoints : ndarray
        Nondecreasing radii, starting at 0.
    values : ndarray
        ``l`` evaluated at each breakpoint.
    slopes : ndarray
        Slope of ``l`` on ``[breakpoints[k], breakpoints[k + 1])``. The
        last entry is 0 once the component is covered.
    reachable_length : float
        Total length of the center's component.
    """

    def __init__(self, breakpoints, slopes, total_length, center=None):
        p = np.asarray(breakpoints, dtype=float)
        s = np.asarray(slopes, dtype=float)
        vals = np.empty_like(p)
        if p.size:
            vals[0] = 0.0
            vals[1:] = np.cumsum(s[:-1] * np.diff(p))
        self.breakpoints = p
        self.slopes = s
        self.values = np.minimum(vals, total_length)
        self.total_length = float(total_length)
        self.reachable_length = float(self.values[-1]) if p.size else 0.0
        self.center = center

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        p = self.breakpoints
        if p.size == 0:
            return np.zeros_like(r)
        k = np.searchsorted(p, r, side="right") - 1
        kk = np.clip(k, 0, None)
        out = self.values[kk] + self.slopes[kk] * (r - p[kk])
        out = np.where(k < 0, 0.0, out)
        out = np.clip(out, 0.0, self.reachable_length)
        out = np.where(np.isposinf(r), self.reachable_length, out)
        return out if out.ndim else float(out)

    @property
    def initial_slope(self) -> float:
        return float(self.slopes[0]) if self.slopes.size else 0.0

    def as_dict(self):
        return {
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
            "slopes": self.slopes.tolist(),
            "reachable_length": self.reachable_length,
        }


def _segments_for_center(net: RoadNetwork, edge: int, offset: float, nd: np.ndarray):
    """Endpoint distances (a, b) and lengths of every piece of network."""
    a = nd[net.edge_from].copy()
    b = nd[net.edge_to].copy()
    ln = net.edge_length.copy()
    # split the center's own edge into the two halves that meet at the center
    u, v = net.edge_from[edge], net.edge_to[edge]
    a[edge], b[edge], ln[edge] = nd[u], 0.0, offset
    a = np.append(a, 0.0)
    b = np.append(b, nd[v])
    ln = np.append(ln, net.edge_length[edge] - offset)
    return a, b, ln


def _profile_events(a, b, ln):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    ok = np.isfinite(lo) & (ln > 0)
    lo, hi, ln = lo[ok], hi[ok], ln[ok]
    dead = hi >= lo + ln  # coverage from the near end saturates first
    pos = [lo, (lo + ln)[dead], hi[~dead], ((lo + hi + ln) / 2)[~dead]]
    slope = [
        np.ones(lo.size),
        -np.ones(int(dead.sum())),
        np.ones(int((~dead).sum())),
        -2 * np.ones(int((~dead).sum())),
    ]
    return np.concatenate(pos), np.concatenate(slope)


def _build_profile(net, edge, offset, nd, center=None) -> CoverageProfile:
    a, b, ln = _segments_for_center(net, edge, offset, nd)
    pos, ds = _profile_events(a, b, ln)
    order = np.argsort(pos, kind="stable")
    pos, ds = pos[order], ds[order]
    # merge coincident breakpoints so the slope list has no zero-width pieces
    merged = np.concatenate([[True], np.diff(pos) > TOL])
    group = np.cumsum(merged) - 1
    bp = pos[merged]
    dsum = np.zeros(bp.size)
    np.add.at(dsum, group, ds)
    slopes = np.cumsum(dsum)
    slopes[np.abs(slopes) < 0.5] = 0.0
    if bp.size == 0 or bp[0] > 0:
        bp = np.concatenate([[0.0], bp])
        slopes = np.concatenate([[0.0], slopes])
    else:
        bp[0] = 0.0
    return CoverageProfile(bp, slopes, net.total_length, center)


def coverage_profile(net: RoadNetwork, center: NetworkLocation) -> CoverageProfile:
    e = net.edge_index(center.edge_id)
    nd = location_node_distances(net, [e], [center.offset])[0]
    return _build_profile(net, e, center.offset, nd, center)


def coverage_profiles(pts: PointSet, nd: Optional[np.ndarray] = None) -> list[CoverageProfile]:
    """Coverage profiles centered on every point of ``pts``."""
    net = pts.network
    if nd is None:
        nd = location_node_distances(net, pts.edge, pts.offset)
    ids = net.edge_ids
    return [
        _build_profile(net, int(e), float(t), nd[i], NetworkLocation(ids[e], float(t)))
        for i, (e, t) in enumerate(zip(pts.edge, pts.offset))
    ]


def neighborhood_length(net: RoadNetwork, center: NetworkLocation, r: float) -> float:
    """Total network length within network distance ``r`` of ``center``.

    Computed directly from the edge-penetration rule rather than through a
    profile, so the two serve as cross-checks of each other.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    e = net.edge_index(center.edge_id)
    nd = location_node_distances(net, [e], [center.offset])[0]
    a, b, ln = _segments_for_center(net, e, center.offset, nd)
    with np.errstate(invalid="ignore"):
        pa = np.where(np.isfinite(a), np.maximum(0.0, r - a), 0.0)
        pb = np.where(np.isfinite(b), np.maximum(0.0, r - b), 0.0)
    covered = np.minimum(ln, pa + pb)
    return float(min(covered.sum(), net.total_length))


def radius_for_length(profile: CoverageProfile, h: float) -> float:
    """Smallest ``r`` with ``l(r) >= h``; ``inf`` if the component is too short."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0:
        return 0.0
    vals = profile.values
    if h > profile.reachable_length + TOL:
        return UNREACHABLE
    j = int(np.searchsorted(vals, h - TOL, side="left"))
    if j == 0:
        return 0.0
    j = min(j, vals.size - 1)
    k = j - 1
    s = profile.slopes[k]
    if s <= 0:
        return float(profile.breakpoints[j])
    r = profile.breakpoints[k] + (h - vals[k]) / s
    return float(min(r, profile.breakpoints[j]))


def neighbor_lengths(row: DistanceMatrixRow, profile: CoverageProfile) -> np.ndarray:
    """``l(d_{i,k})`` for every sorted neighbor; unreachable neighbors map to ``inf``."""
    out = np.asarray(profile(np.where(np.isfinite(row.sorted), row.sorted, 0.0)), dtype=float)
    out = np.atleast_1d(out)
    out[~np.isfinite(row.sorted)] = np.inf
    # l is nondecreasing in r; guard against roundoff so searchsorted stays valid
    return np.maximum.accumulate(out) if out.size else out


def count_within_h(row: DistanceMatrixRow, profile: CoverageProfile, h) -> np.ndarray | int:
    """Number of other points inside the length-``h`` neighborhood (inclusive)."""
    lengths = neighbor_lengths(row, profile)
    c = np.searchsorted(lengths, np.asarray(h, dtype=float) + TOL, side="right")
    return int(c) if np.ndim(c) == 0 else c


def neighbor_structure(pts: PointSet):
    """Rows and coverage profiles for every point, sharing one Dijkstra pass."""
    if pts.n < 2:
        raise ValueError("need at least 2 points")
    nd = location_node_distances(pts.network, pts.edge, pts.offset)
    rows = _rows_from_matrix(_pairwise_from_nodes(pts, nd))
    profiles = coverage_profiles(pts, nd)
    return rows, profiles
