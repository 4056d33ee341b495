"""Radius-based network K-function, used as the comparison baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distance import TOL, DistanceMatrixRow, neighbor_structure
from .lengthstat import AggregationResult, precision_recall
from .network import PointSet, RoadNetwork
from .process import generate_csr, intensity_global, run_seed

__all__ = [
    "NetKCurves",
    "radius_counts",
    "network_k",
    "netk_benchmark",
    "detect_scale_netk",
    "extract_aggregation_netk",
    "band",
]


def band(runs: np.ndarray, lo_q=2.5, hi_q=97.5):
    """Pointwise band over the first axis. Fewer than 40 runs clamp to min/max."""
    runs = np.asarray(runs, dtype=float)
    if runs.shape[0] < 40:
        return runs.min(axis=0), runs.max(axis=0)
    return (
        np.percentile(runs, lo_q, axis=0, method="linear"),
        np.percentile(runs, hi_q, axis=0, method="linear"),
    )


@dataclass
class NetKCurves:
    r: np.ndarray
    observed: Optional[np.ndarray]
    simulated: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.simulated.mean(axis=0)

    @property
    def deviation(self) -> np.ndarray:
        return self.observed - self.mean

    def with_observed(self, observed) -> "NetKCurves":
        return NetKCurves(self.r, np.asarray(observed, float), self.simulated, self.lo, self.hi)


def radius_counts(rows: Sequence[DistanceMatrixRow], r) -> np.ndarray:
    """``|{j != i : d_ij <= r}|`` per point and radius, shape (n, n_radii)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return np.stack(
        [np.searchsorted(row.sorted, r + TOL, side="right") for row in rows]
    )


def network_k(pts: PointSet, rows, intensity, r_grid) -> np.ndarray:
    n = len(rows)
    if n < 2:
        raise ValueError("need at least 2 points")
    lam = float(intensity)
    if not lam > 0:
        raise ValueError("intensity must be positive")
    return radius_counts(rows, r_grid).sum(axis=0) / (lam * n)


def _one_run(net, n, r_grid, seed, run):
    pts = generate_csr(net, n, run_seed(seed, run))
    rows, _ = neighbor_structure(pts)
    return network_k(pts, rows, intensity_global(n, net), r_grid)


def netk_benchmark(net: RoadNetwork, n: int, m_runs: int, r_grid, seed=0, n_jobs=None) -> NetKCurves:
    """Simulated CSR network K curves with a pointwise 95% envelope."""
    from .montecarlo import run_parallel

    if m_runs < 2:
        raise ValueError("m_runs must be at least 2")
    r_grid = np.asarray(r_grid, dtype=float)
    sims = run_parallel(lambda k: _one_run(net, n, r_grid, seed, k), m_runs, n_jobs)
    lo, hi = band(sims)
    return NetKCurves(r_grid, None, sims, lo, hi)


def detect_scale_netk(curves: NetKCurves) -> Optional[float]:
    """Radius of largest deviation, or ``None`` if the observed curve never leaves the envelope."""
    if curves.observed is None:
        raise ValueError("observed curve missing")
    if not np.any(curves.observed > curves.hi):
        return None
    return float(curves.r[int(np.argmax(curves.deviation))])


def extract_aggregation_netk(pts: PointSet, rows, intensity, r_hat: float) -> AggregationResult:
    """Same procedure as the length version with the radius membership rule."""
    if not r_hat > 0:
        raise ValueError("r_hat must be positive")
    n = len(rows)
    counts = radius_counts(rows, [r_hat])[:, 0]
    center = int(np.argmax(counts))
    row = rows[center]
    inside = row.order[row.sorted <= r_hat + TOL]
    members = np.sort(np.concatenate([[center], inside]))
    p, r = precision_recall(members, pts.labels, n)
    return AggregationResult(center, members, float(r_hat), p, r)
