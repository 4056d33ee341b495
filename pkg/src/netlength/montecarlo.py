"""CSR Monte Carlo envelopes for curve statistics."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .distance import neighbor_structure
from .lengthstat import ScaleGrid, count_matrix
from .netk import band, radius_counts
from .network import RoadNetwork
from .process import generate_csr, intensity_global, run_seed

__all__ = ["THREADS_ENV", "Envelope", "STATISTICS", "default_jobs", "run_parallel", "envelope"]

THREADS_ENV = "NETLENGTH_THREADS"


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_parallel(task: Callable[[int], np.ndarray], m: int, n_jobs=None) -> np.ndarray:
    """Evaluate ``task(k)`` for ``k < m`` and stack results in run order."""
    n_jobs = default_jobs() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1:
        out = [task(k) for k in range(m)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(task, range(m)))
    return np.stack(out)


def _length_k(net, pts, h):
    rows, profiles = neighbor_structure(pts)
    lam = float(intensity_global(pts.n, net))
    return count_matrix(rows, profiles, h).sum(axis=0) / (lam * pts.n)


def _length_l(net, pts, h):
    return _length_k(net, pts, h) - h


def _net_k(net, pts, h):
    rows, _ = neighbor_structure(pts)
    lam = float(intensity_global(pts.n, net))
    return radius_counts(rows, h).sum(axis=0) / (lam * pts.n)


STATISTICS = {"lengthK": _length_k, "lengthL": _length_l, "netK": _net_k}
THEORETICAL = {"lengthK": lambda h: h, "lengthL": lambda h: np.zeros_like(h)}


@dataclass
class Envelope:
    h: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    runs: np.ndarray
    statistic: str = "custom"

    def contains(self, curve, atol=0.0) -> np.ndarray:
        curve = np.broadcast_to(np.asarray(curve, dtype=float), self.h.shape)
        return (curve >= self.lo - atol) & (curve <= self.hi + atol)


def envelope(
    net: RoadNetwork,
    n: int,
    m_runs: int,
    grid: Union[ScaleGrid, np.ndarray],
    statistic: Union[str, Callable] = "lengthL",
    seed=0,
    n_jobs=None,
) -> Envelope:
    """Mean curve and pointwise 2.5/97.5 percentile band over ``m_runs`` CSR datasets.

    Run ``k`` draws from its own seed stream, so its curve is the same
    regardless of ``m_runs`` or the number of worker threads.
    """
    if m_runs < 2:
        raise ValueError("m_runs must be at least 2")
    if n < 2:
        raise ValueError("need at least 2 points per run")
    h = grid.values if isinstance(grid, ScaleGrid) else np.asarray(grid, dtype=float)
    if isinstance(statistic, str):
        try:
            fn = STATISTICS[statistic]
        except KeyError:
            raise ValueError(f"unknown statistic {statistic!r}") from None
        name = statistic
    else:
        fn, name = statistic, getattr(statistic, "__name__", "custom")

    def task(k):
        return np.asarray(fn(net, generate_csr(net, n, run_seed(seed, k)), h), dtype=float)

    runs = run_parallel(task, m_runs, n_jobs)
    lo, hi = band(runs)
    return Envelope(h, runs.mean(axis=0), lo, hi, runs, name)
