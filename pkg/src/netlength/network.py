"""Road network data model, CSV ingestion, validation and point snapping.

Networks are undirected, planar and may contain parallel edges. Every
event point lives on an edge as ``(edge index, offset)`` where the offset
is measured in length units from the edge's ``from_node``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

__all__ = [
    "NetworkFormatError",
    "SnapWarning",
    "EdgeRecord",
    "NetworkLocation",
    "RoadNetwork",
    "PointSet",
    "ValidationReport",
    "load_network",
    "load_points",
    "write_network",
    "write_points",
    "snap_points",
    "validate",
]


class NetworkFormatError(ValueError):
    """Raised for malformed network or point files and inconsistent data."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class SnapWarning(UserWarning):
    """Emitted when a coordinate lies farther from the network than allowed."""


@dataclass(frozen=True)
class EdgeRecord:
    edge_id: str
    from_node: str
    to_node: str
    length: float


@dataclass(frozen=True)
class NetworkLocation:
    edge_id: str
    offset: float


def _natural_key(s: str):
    return (0, int(s), "") if s.lstrip("-").isdigit() else (1, 0, s)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class RoadNetwork:
    """Undirected weighted road network.

    Parameters
    ----------
    nodes : mapping of node id -> (x, y)
        Planar node coordinates. Iteration order is preserved.
    edges : iterable of (edge_id, from_node, to_node, length)
        ``length`` may be ``None``, in which case the Euclidean distance
        between the endpoints is used.
    meta : dict, optional
        Free-form annotations (generators record landmark edges here).

    Attributes
    ----------
    node_ids, edge_ids : tuple of str
    coords : ndarray, shape (n_nodes, 2)
    edge_from, edge_to : ndarray of int
        Endpoint node indices per edge.
    edge_length : ndarray of float
    total_length : float
        Sum of all edge lengths.
    component : ndarray of int
        Connected component label per node.
    """

    def __init__(self, nodes, edges, meta=None):
        self.meta = dict(meta or {})
        node_ids = [str(k) for k in nodes]
        if len(set(node_ids)) != len(node_ids):
            dup = [k for k, c in Counter(node_ids).items() if c > 1]
            raise NetworkFormatError(f"duplicate node_id {dup[0]!r}")
        self.node_ids = tuple(node_ids)
        self._node_index = {k: i for i, k in enumerate(self.node_ids)}
        coords = np.array([tuple(map(float, nodes[k])) for k in nodes], dtype=float)
        self.coords = _readonly(coords.reshape(-1, 2))

        eids, efrom, eto, elen = [], [], [], []
        seen = set()
        for edge_id, u, v, length in edges:
            edge_id, u, v = str(edge_id), str(u), str(v)
            if edge_id in seen:
                raise NetworkFormatError(f"duplicate edge_id {edge_id!r}")
            seen.add(edge_id)
            for end in (u, v):
                if end not in self._node_index:
                    raise NetworkFormatError(
                        f"edge {edge_id!r} references unknown node {end!r}"
                    )
            iu, iv = self._node_index[u], self._node_index[v]
            if length is None or (isinstance(length, float) and math.isnan(length)):
                length = float(np.hypot(*(self.coords[iu] - self.coords[iv])))
            length = float(length)
            if not length > 0 or not math.isfinite(length):
                raise NetworkFormatError(
                    f"edge {edge_id!r} has nonpositive length {length!r}"
                )
            eids.append(edge_id)
            efrom.append(iu)
            eto.append(iv)
            elen.append(length)

        self.edge_ids = tuple(eids)
        self._edge_index = {k: i for i, k in enumerate(self.edge_ids)}
        self.edge_from = _readonly(np.array(efrom, dtype=np.intp))
        self.edge_to = _readonly(np.array(eto, dtype=np.intp))
        self.edge_length = _readonly(np.array(elen, dtype=float))
        # sorted summation keeps total_length independent of row order
        self.total_length = float(math.fsum(sorted(elen)))
        order = sorted(range(len(eids)), key=lambda i: _natural_key(eids[i]))
        rank = np.empty(len(eids), dtype=np.intp)
        rank[order] = np.arange(len(eids))
        self.edge_rank = _readonly(rank)

        n = len(self.node_ids)
        if n:
            adj = coo_matrix(
                (np.ones(len(eids)), (self.edge_from, self.edge_to)), shape=(n, n)
            )
            n_comp, labels = connected_components(adj, directed=False)
        else:
            n_comp, labels = 0, np.zeros(0, dtype=np.intp)
        self.n_components = int(n_comp)
        self.component = _readonly(labels.astype(np.intp))

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    def node_index(self, node_id) -> int:
        return self._node_index[str(node_id)]

    def edge_index(self, edge_id) -> int:
        try:
            return self._edge_index[str(edge_id)]
        except KeyError:
            raise KeyError(f"unknown edge_id {edge_id!r}") from None

    def edge(self, i: int) -> EdgeRecord:
        return EdgeRecord(
            self.edge_ids[i],
            self.node_ids[self.edge_from[i]],
            self.node_ids[self.edge_to[i]],
            float(self.edge_length[i]),
        )

    @property
    def edges(self) -> list[EdgeRecord]:
        return [self.edge(i) for i in range(self.n_edges)]

    def edge_component(self) -> np.ndarray:
        return self.component[self.edge_from]

    def location(self, edge_id, offset) -> NetworkLocation:
        i = self.edge_index(edge_id)
        if not 0 <= offset <= self.edge_length[i]:
            raise ValueError(f"offset {offset!r} outside [0, {self.edge_length[i]!r}]")
        return NetworkLocation(self.edge_ids[i], float(offset))

    def coordinates_of(self, edge_index, offset) -> np.ndarray:
        """Planar coordinates of on-edge positions (linear interpolation)."""
        e = np.asarray(edge_index, dtype=np.intp)
        t = np.asarray(offset, dtype=float) / self.edge_length[e]
        a = self.coords[self.edge_from[e]]
        b = self.coords[self.edge_to[e]]
        return a + t[..., None] * (b - a)

    def __repr__(self):
        return (
            f"RoadNetwork(n_nodes={self.n_nodes}, n_edges={self.n_edges}, "
            f"total_length={self.total_length:.6g})"
        )


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered event points bound to a network.

    ``edge`` holds integer edge indices into ``network``; ``labels`` is an
    optional boolean ground truth (True = aggregation member).
    """

    network: RoadNetwork
    edge: np.ndarray
    offset: np.ndarray
    labels: Optional[np.ndarray] = None
    point_ids: Optional[tuple] = None
    snap_distance: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        edge = np.asarray(self.edge, dtype=np.intp).reshape(-1)
        offset = np.asarray(self.offset, dtype=float).reshape(-1)
        if edge.shape != offset.shape:
            raise ValueError("edge and offset must have the same length")
        net = self.network
        if edge.size:
            if edge.min() < 0 or edge.max() >= net.n_edges:
                raise ValueError("edge index out of range")
            lengths = net.edge_length[edge]
            bad = (offset < 0) | (offset > lengths) | ~np.isfinite(offset)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise ValueError(
                    f"offset {offset[i]!r} outside [0, {lengths[i]!r}] "
                    f"on edge {net.edge_ids[edge[i]]!r}"
                )
        object.__setattr__(self, "edge", _readonly(edge))
        object.__setattr__(self, "offset", _readonly(offset))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=bool).reshape(-1)
            if labels.shape != edge.shape:
                raise ValueError("labels must have one entry per point")
            object.__setattr__(self, "labels", _readonly(labels))
        if self.point_ids is None:
            object.__setattr__(self, "point_ids", tuple(str(i) for i in range(edge.size)))
        elif len(self.point_ids) != edge.size:
            raise ValueError("point_ids must have one entry per point")
        else:
            object.__setattr__(self, "point_ids", tuple(str(p) for p in self.point_ids))

    def __len__(self):
        return int(self.edge.size)

    @property
    def n(self) -> int:
        return len(self)

    def locations(self) -> list[NetworkLocation]:
        ids = self.network.edge_ids
        return [NetworkLocation(ids[e], float(t)) for e, t in zip(self.edge, self.offset)]

    def coordinates(self) -> np.ndarray:
        return self.network.coordinates_of(self.edge, self.offset)

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.intp)
        return PointSet(
            self.network,
            self.edge[idx],
            self.offset[idx],
            None if self.labels is None else self.labels[idx],
            tuple(self.point_ids[i] for i in idx),
        )

    @classmethod
    def from_locations(cls, network, locations, labels=None, point_ids=None):
        edge = [network.edge_index(loc.edge_id) for loc in locations]
        offset = [loc.offset for loc in locations]
        return cls(network, edge, offset, labels, point_ids)

    @classmethod
    def concatenate(cls, parts: Sequence["PointSet"]) -> "PointSet":
        net = parts[0].network
        labels = None
        if any(p.labels is not None for p in parts):
            labels = np.concatenate(
                [p.labels if p.labels is not None else np.zeros(p.n, bool) for p in parts]
            )
        return cls(
            net,
            np.concatenate([p.edge for p in parts]),
            np.concatenate([p.offset for p in parts]),
            labels,
        )


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _read_csv(path, required):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise NetworkFormatError("empty file, header expected", path, 1) from None
        missing = [c for c in required if c not in header]
        if missing:
            raise NetworkFormatError(
                f"header missing column(s) {', '.join(missing)}", path, 1
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise NetworkFormatError(
                    f"expected {len(header)} fields, got {len(rec)}", path, lineno
                )
            rows.append((lineno, dict(zip(header, (c.strip() for c in rec)))))
    return header, rows


def _float(value, what, path, lineno):
    try:
        x = float(value)
    except ValueError:
        raise NetworkFormatError(f"cannot parse {what} {value!r}", path, lineno) from None
    if not math.isfinite(x):
        raise NetworkFormatError(f"non-finite {what} {value!r}", path, lineno)
    return x


def load_network(nodes_file, edges_file) -> RoadNetwork:
    """Read a network from ``node_id,x,y`` and ``edge_id,from_node,to_node,length`` CSVs.

    A blank ``length`` is replaced by the Euclidean length of the edge.
    Errors carry the file name and line number of the offending row.
    """
    _, node_rows = _read_csv(nodes_file, ("node_id", "x", "y"))
    nodes = {}
    for lineno, r in node_rows:
        nid = r["node_id"]
        if nid in nodes:
            raise NetworkFormatError(f"duplicate node_id {nid!r}", nodes_file, lineno)
        nodes[nid] = (
            _float(r["x"], "x", nodes_file, lineno),
            _float(r["y"], "y", nodes_file, lineno),
        )

    _, edge_rows = _read_csv(edges_file, ("edge_id", "from_node", "to_node"))
    edges, seen = [], set()
    for lineno, r in edge_rows:
        eid = r["edge_id"]
        if eid in seen:
            raise NetworkFormatError(f"duplicate edge_id {eid!r}", edges_file, lineno)
        seen.add(eid)
        for end in ("from_node", "to_node"):
            if r[end] not in nodes:
                raise NetworkFormatError(
                    f"dangling node reference {r[end]!r}", edges_file, lineno
                )
        raw = r.get("length", "")
        length = None
        if raw:
            length = _float(raw, "length", edges_file, lineno)
            if length <= 0:
                raise NetworkFormatError(
                    f"nonpositive length {raw!r}", edges_file, lineno
                )
        elif nodes[r["from_node"]] == nodes[r["to_node"]]:
            raise NetworkFormatError(
                "blank length on an edge with coincident endpoints", edges_file, lineno
            )
        edges.append((eid, r["from_node"], r["to_node"], length))
    return RoadNetwork(nodes, edges)


def _parse_label(value, path, lineno):
    v = value.strip().lower()
    if v in ("1", "true", "t", "yes", "member", "aggregation"):
        return True
    if v in ("0", "false", "f", "no", "background", ""):
        return False
    raise NetworkFormatError(f"cannot parse label {value!r}", path, lineno)


def load_points(points_file, network: RoadNetwork, snap_threshold=None) -> PointSet:
    """Read points in pre-snapped (``edge_id,offset``) or coordinate (``x,y``) form."""
    header, rows = _read_csv(points_file, ("point_id",))
    has_labels = "label" in header
    labels = [] if has_labels else None
    ids = []
    if "edge_id" in header and "offset" in header:
        edge, offset = [], []
        for lineno, r in rows:
            try:
                e = network.edge_index(r["edge_id"])
            except KeyError:
                raise NetworkFormatError(
                    f"unknown edge_id {r['edge_id']!r}", points_file, lineno
                ) from None
            t = _float(r["offset"], "offset", points_file, lineno)
            if not 0 <= t <= network.edge_length[e]:
                raise NetworkFormatError(
                    f"offset {t!r} outside [0, {network.edge_length[e]!r}]",
                    points_file,
                    lineno,
                )
            edge.append(e)
            offset.append(t)
            ids.append(r["point_id"])
            if has_labels:
                labels.append(_parse_label(r["label"], points_file, lineno))
        return PointSet(network, edge, offset, labels, tuple(ids))
    if "x" in header and "y" in header:
        coords = []
        for lineno, r in rows:
            coords.append(
                (
                    _float(r["x"], "x", points_file, lineno),
                    _float(r["y"], "y", points_file, lineno),
                )
            )
            ids.append(r["point_id"])
            if has_labels:
                labels.append(_parse_label(r["label"], points_file, lineno))
        return snap_points(network, coords, threshold=snap_threshold, labels=labels,
                           point_ids=tuple(ids))
    raise NetworkFormatError(
        "points header needs edge_id,offset or x,y columns", points_file, 1
    )


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_network(network: RoadNetwork, nodes_file, edges_file):
    with open(nodes_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "x", "y"])
        for nid, (x, y) in zip(network.node_ids, network.coords):
            w.writerow([nid, _fmt(x), _fmt(y)])
    with open(edges_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "from_node", "to_node", "length"])
        # lengths carry full precision so a reload reproduces total_length
        for rec in network.edges:
            w.writerow([rec.edge_id, rec.from_node, rec.to_node, repr(rec.length)])


def write_points(points: PointSet, path):
    net = points.network
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["point_id", "edge_id", "offset"]
        if points.labels is not None:
            cols.append("label")
        w.writerow(cols)
        for i in range(points.n):
            row = [points.point_ids[i], net.edge_ids[points.edge[i]], repr(float(points.offset[i]))]
            if points.labels is not None:
                row.append(int(points.labels[i]))
            w.writerow(row)


# ---------------------------------------------------------------------------
# Snapping and validation
# ---------------------------------------------------------------------------


def snap_points(
    net: RoadNetwork,
    coords: Iterable,
    threshold: Optional[float] = None,
    labels=None,
    point_ids=None,
) -> PointSet:
    """Project planar coordinates onto their nearest edge segment.

    Ties on snap distance go to the lowest ``edge_id`` and then the lowest
    offset. The per-point snap distance is kept on the returned set; a
    :class:`SnapWarning` is issued for every point beyond ``threshold``.
    """
    if net.n_edges == 0:
        raise ValueError("cannot snap onto an empty network")
    pts = np.asarray(list(coords), dtype=float).reshape(-1, 2)
    a = net.coords[net.edge_from]
    b = net.coords[net.edge_to]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    edge = np.empty(len(pts), dtype=np.intp)
    offset = np.empty(len(pts))
    dist = np.empty(len(pts))
    for k, p in enumerate(pts):
        ap = p - a
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(denom > 0, np.einsum("ij,ij->i", ap, ab) / denom, 0.0)
        t = np.clip(t, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(*(p - proj).T)
        off = t * net.edge_length
        best = d.min()
        cand = np.flatnonzero(d <= best + 1e-12 * max(1.0, best))
        j = cand[np.lexsort((off[cand], net.edge_rank[cand]))[0]]
        edge[k], offset[k], dist[k] = j, off[j], d[j]
    if threshold is not None:
        far = np.flatnonzero(dist > threshold)
        for k in far:
            warnings.warn(
                f"point {k} snapped {dist[k]:.6g} away (threshold {threshold:.6g})",
                SnapWarning,
                stacklevel=2,
            )
    return PointSet(net, edge, offset, labels, point_ids, snap_distance=_readonly(dist))


@dataclass
class ValidationReport:
    n_nodes: int
    n_edges: int
    n_components: int
    total_length: float
    degree_histogram: dict
    self_loops: list
    zero_length_edges: list
    warnings: list
    valid: bool

    def as_dict(self):
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "n_components": self.n_components,
            "total_length": self.total_length,
            "degree_histogram": {str(k): v for k, v in self.degree_histogram.items()},
            "self_loops": self.self_loops,
            "zero_length_edges": self.zero_length_edges,
            "warnings": self.warnings,
            "valid": self.valid,
        }


def validate(net: RoadNetwork) -> ValidationReport:
    """Report-only structural check. Self-loops and zero-length edges make the report invalid."""
    deg = np.bincount(
        np.concatenate([net.edge_from, net.edge_to]), minlength=net.n_nodes
    )
    hist = dict(sorted(Counter(int(d) for d in deg).items()))
    loops = [net.edge_ids[i] for i in np.flatnonzero(net.edge_from == net.edge_to)]
    zero = [net.edge_ids[i] for i in np.flatnonzero(net.edge_length <= 0)]
    notes = []
    if net.n_components > 1:
        notes.append(
            f"network has {net.n_components} connected components; "
            "cross-component distances are unreachable"
        )
    if loops:
        notes.append(f"self-loop edge(s): {', '.join(loops)}")
    if zero:
        notes.append(f"zero-length edge(s): {', '.join(zero)}")
    if net.n_edges == 0:
        notes.append("network has no edges")
    for msg in notes:
        logger.warning(msg)
    return ValidationReport(
        n_nodes=net.n_nodes,
        n_edges=net.n_edges,
        n_components=net.n_components,
        total_length=net.total_length,
        degree_histogram=hist,
        self_loops=loops,
        zero_length_edges=zero,
        warnings=notes,
        valid=not loops and not zero and net.n_edges > 0,
    )
