"""Intensity estimators and complete spatial randomness on networks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distance import (
    DistanceMatrixRow,
    coverage_profile,
    location_node_distances,
    radius_for_length,
)
from .network import NetworkLocation, PointSet, RoadNetwork

logger = logging.getLogger(__name__)

__all__ = [
    "Intensity",
    "intensity_global",
    "intensity_nn",
    "make_rng",
    "run_seed",
    "generate_csr",
    "CountDistribution",
    "csr_count_distribution",
]


@dataclass(frozen=True)
class Intensity:
    """Points per unit network length."""

    value: float
    estimator: str = "global"

    def __float__(self):
        return float(self.value)


def intensity_global(n: int, net: RoadNetwork) -> Intensity:
    if net.total_length <= 0 or net.n_edges == 0:
        raise ValueError("empty network has no intensity")
    if n < 1:
        raise ValueError("need at least one point")
    return Intensity(n / net.total_length, "global")


def intensity_nn(rows: Sequence[DistanceMatrixRow]) -> Intensity:
    """Nearest-neighbor estimator ``n / sum_i d_{i,1}``."""
    if len(rows) < 2:
        raise ValueError("need at least 2 points")
    d1 = np.array([r.nearest for r in rows])
    if not np.all(np.isfinite(d1)):
        raise ValueError("a point has no reachable nearest neighbor")
    total = float(d1.sum())
    if total <= 0:
        raise ValueError("nearest-neighbor distances sum to zero")
    return Intensity(len(rows) / total, "nn")


def run_seed(seed, run: int) -> np.random.SeedSequence:
    """Independent stream for Monte Carlo run ``run`` of a master ``seed``."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(int(run),))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_csr(net: RoadNetwork, n: int, seed=None) -> PointSet:
    """Draw ``n`` independent uniform points: edge by length, then uniform offset."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return PointSet(net, np.zeros(0, np.intp), np.zeros(0))
    if net.n_edges == 0 or net.total_length <= 0:
        raise ValueError("cannot place points on an empty network")
    rng = make_rng(seed)
    p = net.edge_length / net.edge_length.sum()
    edge = rng.choice(net.n_edges, size=n, p=p)
    offset = rng.uniform(0.0, 1.0, size=n) * net.edge_length[edge]
    return PointSet(net, edge, offset)


@dataclass
class CountDistribution:
    counts: np.ndarray
    histogram: np.ndarray
    expected: float
    n_points: int
    subset_length: float

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def var(self) -> float:
        return float(self.counts.var(ddof=1))

    def p_zero(self) -> float:
        return float(self.histogram[0] / self.counts.size) if self.histogram.size else 0.0


def csr_count_distribution(
    net: RoadNetwork,
    subset_length: float,
    intensity: Intensity,
    trials: int,
    seed=None,
    center: NetworkLocation | None = None,
) -> CountDistribution:
    """Empirical point counts in a connected subnetwork of length ``subset_length``.

    The subnetwork is the neighborhood of ``center`` (default: the start of
    the first edge) whose total length equals ``subset_length``. Each trial
    places ``round(intensity * total_length)`` CSR points, so counts are
    binomial and approach Poisson when the subset is small.
    """
    if not 0 < subset_length <= net.total_length + 1e-12:
        raise ValueError("subset_length must lie in (0, total_length]")
    if center is None:
        center = NetworkLocation(net.edge_ids[0], 0.0)
    prof = coverage_profile(net, center)
    if subset_length > prof.reachable_length + 1e-9:
        raise ValueError("subset_length exceeds the center's component length")
    radius = radius_for_length(prof, subset_length)
    n = int(round(float(intensity) * net.total_length))
    logger.info(
        "conditional CSR: %d points per trial (lambda=%.6g, L_A=%.6g)",
        n, float(intensity), net.total_length,
    )
    e0 = net.edge_index(center.edge_id)
    nd = location_node_distances(net, [e0], [center.offset])[0]
    rng = make_rng(seed)
    p = net.edge_length / net.edge_length.sum()
    counts = np.empty(trials, dtype=np.int64)
    for k in range(trials):
        edge = rng.choice(net.n_edges, size=n, p=p)
        t = rng.uniform(0.0, 1.0, size=n) * net.edge_length[edge]
        d = np.minimum(nd[net.edge_from[edge]] + t, nd[net.edge_to[edge]] + net.edge_length[edge] - t)
        same = edge == e0
        d[same] = np.minimum(d[same], np.abs(t[same] - center.offset))
        counts[k] = int(np.count_nonzero(d <= radius + 1e-9))
    return CountDistribution(
        counts=counts,
        histogram=np.bincount(counts),
        expected=float(intensity) * subset_length,
        n_points=n,
        subset_length=float(subset_length),
    )
