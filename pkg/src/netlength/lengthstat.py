"""Length K / L functions over equal-length neighborhoods.

The statistical unit around point ``i`` is the ``h``-neighborhood: the
connected piece of network centered on ``i`` whose total length is ``h``.
Point ``j`` falls inside it when the coverage at radius ``d_ij`` does not
exceed ``h``, i.e. ``l_i(d_ij) <= h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .distance import TOL, CoverageProfile, DistanceMatrixRow, neighbor_lengths
from .network import PointSet, RoadNetwork
from .process import Intensity

__all__ = [
    "ScaleGrid",
    "CurveSamples",
    "Minimum",
    "ScaleEstimate",
    "AggregationResult",
    "count_matrix",
    "length_k",
    "length_l",
    "local_length_l",
    "derivative",
    "minima_prominence",
    "detect_scale",
    "DETECTION_RULES",
    "extract_aggregation",
    "precision_recall",
]


@dataclass(frozen=True)
class ScaleGrid:
    """Uniform scale grid ``step, 2*step, ..., <= h_max``."""

    step: float
    h_max: float

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("grid step must be positive")
        if not self.h_max >= self.step:
            raise ValueError("h_max must be at least one grid step")

    @classmethod
    def default(cls, net: RoadNetwork, n_steps: int = 500) -> "ScaleGrid":
        return cls(net.total_length / n_steps, net.total_length / 2)

    @property
    def values(self) -> np.ndarray:
        m = int(math.floor(self.h_max / self.step + 1e-9))
        return self.step * np.arange(1, m + 1)

    def check(self, net: RoadNetwork):
        if self.h_max > net.total_length + TOL:
            raise ValueError("h_max exceeds the network's total length")
        return self


@dataclass
class CurveSamples:
    h: np.ndarray
    k_obs: np.ndarray
    k_expected: np.ndarray
    l_obs: Optional[np.ndarray] = None
    l_prime: Optional[np.ndarray] = None
    local: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def step(self) -> float:
        return float(self.h[1] - self.h[0]) if self.h.size > 1 else float(self.h[0])

    def to_rows(self):
        for k in range(self.h.size):
            yield (
                self.h[k],
                self.k_obs[k],
                self.k_expected[k],
                np.nan if self.l_obs is None else self.l_obs[k],
                np.nan if self.l_prime is None else self.l_prime[k],
            )


@dataclass(frozen=True)
class Minimum:
    h: float
    value: float
    prominence: float


@dataclass
class ScaleEstimate:
    """Maximal-aggregation scale picked from the derivative of L."""

    h_hat: Optional[float]
    argmax_L: float
    chosen_minimum: Optional[float]
    minima: list
    detected: bool

    def as_dict(self):
        return {
            "h_hat": self.h_hat,
            "argmax_L": self.argmax_L,
            "chosen_minimum": self.chosen_minimum,
            "minima": [{"h": m.h, "prominence": m.prominence} for m in self.minima],
            "detected": self.detected,
        }


@dataclass
class AggregationResult:
    center: int
    members: np.ndarray
    scale: float
    precision: Optional[float] = None
    recall: Optional[float] = None

    def as_dict(self, point_ids: Optional[Sequence[str]] = None):
        if point_ids is None:
            ids = [int(i) for i in self.members]
            center = int(self.center)
        else:
            ids = [point_ids[i] for i in self.members]
            center = point_ids[self.center]
        return {
            "center_point_id": center,
            "member_point_ids": ids,
            "scale": self.scale,
            "precision": self.precision,
            "recall": self.recall,
        }


def _validate_inputs(rows, profiles, intensity):
    n = len(rows)
    if n < 2:
        raise ValueError("need at least 2 points")
    if len(profiles) != n:
        raise ValueError("rows and profiles must describe the same points")
    lam = float(intensity)
    if not lam > 0:
        raise ValueError("intensity must be positive")
    return n, lam


def count_matrix(rows, profiles, h) -> np.ndarray:
    """Neighborhood counts, shape (n_points, n_scales)."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    out = np.empty((len(rows), h.size), dtype=np.int64)
    for i, (row, prof) in enumerate(zip(rows, profiles)):
        out[i] = np.searchsorted(neighbor_lengths(row, prof), h + TOL, side="right")
    return out


def length_k(
    pts: PointSet,
    rows: Sequence[DistanceMatrixRow],
    profiles: Sequence[CoverageProfile],
    intensity: Intensity,
    grid: ScaleGrid,
    counts: Optional[np.ndarray] = None,
) -> CurveSamples:
    """``K(h) = sum_i count_i(h) / (lambda * n)`` on ``grid``."""
    n, lam = _validate_inputs(rows, profiles, intensity)
    h = grid.values
    if counts is None:
        counts = count_matrix(rows, profiles, h)
    # integer column sums are exact, so the result does not depend on reduction order
    k_obs = counts.sum(axis=0) / (lam * n)
    return CurveSamples(h=h, k_obs=k_obs, k_expected=h.copy())


def length_l(curve: CurveSamples) -> CurveSamples:
    return replace(curve, l_obs=curve.k_obs - curve.h)


def local_length_l(
    i: int,
    pts: PointSet,
    rows,
    profiles,
    intensity: Intensity,
    h: float,
    normalize: bool = False,
) -> float:
    """Local L of point ``i``. With ``normalize`` the ``1/n`` factor is dropped."""
    n, lam = _validate_inputs(rows, profiles, intensity)
    if not h > 0:
        raise ValueError("h must be positive")
    c = np.searchsorted(neighbor_lengths(rows[i], profiles[i]), h + TOL, side="right")
    scale = lam if normalize else lam * n
    return float(c / scale - h)


def derivative(curve: CurveSamples) -> CurveSamples:
    """Central differences inside, one-sided at both ends."""
    if curve.l_obs is None:
        curve = length_l(curve)
    if curve.h.size < 3:
        raise ValueError("need at least 3 grid samples to differentiate")
    return replace(curve, l_prime=np.gradient(curve.l_obs, curve.h, edge_order=1))


def _runs(y):
    starts = np.flatnonzero(np.concatenate([[True], y[1:] != y[:-1]]))
    ends = np.concatenate([starts[1:], [y.size]]) - 1
    return starts, ends


def minima_prominence(y: np.ndarray):
    """Interior local minima of ``y`` and their prominence.

    Plateaus count once, at their middle sample. The prominence is the
    smaller of the two rises seen when walking left and right either to a
    strictly lower sample or to the end of the array.
    """
    y = np.asarray(y, dtype=float)
    starts, ends = _runs(y)
    idx, prom = [], []
    for k in range(1, starts.size - 1):
        v = y[starts[k]]
        if not (y[starts[k - 1]] > v and y[starts[k + 1]] > v):
            continue
        left = y[: starts[k]][::-1]
        lower = np.flatnonzero(left < v)
        rise_l = (left[: lower[0]] if lower.size else left).max() - v
        right = y[ends[k] + 1:]
        lower = np.flatnonzero(right < v)
        rise_r = (right[: lower[0]] if lower.size else right).max() - v
        idx.append((starts[k] + ends[k]) // 2)
        prom.append(min(rise_l, rise_r))
    return np.array(idx, dtype=np.intp), np.array(prom, dtype=float)


DETECTION_RULES = ("depth", "prominence")


def detect_scale(
    curve: CurveSamples,
    prominence_threshold: float = 0.2,
    rule: str = "depth",
    depth_tolerance: float = 0.4,
) -> ScaleEstimate:
    """Pick the maximal-aggregation scale from the L' minima beyond argmax L.

    Candidates are the interior minima of ``l_prime`` at ``h >= argmax L``.
    Every candidate is reported with its prominence.

    Parameters
    ----------
    curve : CurveSamples
        Needs ``l_obs``; ``l_prime`` is computed when missing.
    prominence_threshold : float
        For ``rule="prominence"``: minimum prominence as a fraction of the
        full ``l_prime`` range.
    rule : {"depth", "prominence"}
        ``"depth"`` takes the first candidate whose value lies within
        ``depth_tolerance`` times the post-maximum ``l_prime`` range of the
        deepest candidate, i.e. the first minimum that reaches the bottom of
        the drop. ``"prominence"`` takes the most prominent candidate among
        those passing ``prominence_threshold``.
    depth_tolerance : float
        Fraction used by the depth rule.

    Returns
    -------
    ScaleEstimate
        ``h_hat`` is half the chosen minimum's scale; ``detected`` is false
        when no candidate qualifies.
    """
    if rule not in DETECTION_RULES:
        raise ValueError(f"unknown detection rule {rule!r}")
    if curve.l_prime is None:
        curve = derivative(curve)
    h, l, lp = curve.h, curve.l_obs, curve.l_prime
    k_max = int(np.argmax(l))
    argmax_l = float(h[k_max])
    idx, prom = minima_prominence(lp)
    keep = h[idx] >= argmax_l
    idx, prom = idx[keep], prom[keep]
    minima = [Minimum(float(h[i]), float(lp[i]), float(p)) for i, p in zip(idx, prom)]
    if rule == "prominence":
        span = float(lp.max() - lp.min())
        ok = prom >= prominence_threshold * span
        if span <= 0 or not ok.any():
            return ScaleEstimate(None, argmax_l, None, minima, False)
        best = np.flatnonzero(ok)[int(np.argmax(prom[ok]))]
    else:
        tail = lp[k_max:]
        span = float(tail.max() - tail.min())
        if idx.size == 0 or span <= 0:
            return ScaleEstimate(None, argmax_l, None, minima, False)
        best = int(np.flatnonzero(lp[idx] <= lp[idx].min() + depth_tolerance * span)[0])
    chosen = float(h[idx[best]])
    return ScaleEstimate(chosen / 2, argmax_l, chosen, minima, True)


def precision_recall(members: np.ndarray, labels: Optional[np.ndarray], n: int):
    if labels is None:
        return None, None
    sel = np.zeros(n, dtype=bool)
    sel[members] = True
    tp = int(np.count_nonzero(sel & labels))
    precision = tp / int(sel.sum()) if sel.any() else 0.0
    recall = tp / int(labels.sum()) if labels.any() else float("nan")
    return precision, recall


def extract_aggregation(
    pts: PointSet,
    rows,
    profiles,
    intensity: Intensity,
    h_hat: float,
    normalize: bool = False,
) -> AggregationResult:
    """Center = highest local L at ``h_hat`` (lowest index on ties); members = its h-neighborhood."""
    n, lam = _validate_inputs(rows, profiles, intensity)
    if not h_hat > 0:
        raise ValueError("h_hat must be positive")
    counts = count_matrix(rows, profiles, [h_hat])[:, 0]
    scale = lam if normalize else lam * n
    local = counts / scale - h_hat
    center = int(np.argmax(local))
    lengths = neighbor_lengths(rows[center], profiles[center])
    inside = rows[center].order[lengths <= h_hat + TOL]
    members = np.sort(np.concatenate([[center], inside]))
    p, r = precision_recall(members, pts.labels, n)
    return AggregationResult(center, members, float(h_hat), p, r)
