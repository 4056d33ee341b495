"""Estimator-style wrappers: fit a point pattern, predict aggregation membership."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .distance import TOL, distances_from, neighbor_structure
from .lengthstat import (
    DETECTION_RULES,
    ScaleGrid,
    count_matrix,
    derivative,
    detect_scale,
    extract_aggregation,
    length_k,
    length_l,
    precision_recall,
)
from .netk import detect_scale_netk, extract_aggregation_netk, netk_benchmark, network_k
from .process import intensity_global, intensity_nn
from .validation import check_labels, check_point_set, check_positive, check_same_network

__all__ = ["LengthLFunction", "NetworkKFunction", "estimate_intensity", "make_grid"]

INTENSITY_ESTIMATORS = ("global", "nn")


def estimate_intensity(kind, pts, rows):
    if kind == "global":
        return intensity_global(pts.n, pts.network)
    if kind == "nn":
        return intensity_nn(rows)
    raise ValueError(f"intensity must be one of {INTENSITY_ESTIMATORS}, got {kind!r}")


def make_grid(net, step=None, h_max=None) -> ScaleGrid:
    """Scale grid with the per-network defaults filled in."""
    step = check_positive(step, "step", allow_none=True)
    h_max = check_positive(h_max, "h_max", allow_none=True)
    default = ScaleGrid.default(net)
    grid = ScaleGrid(default.step if step is None else step, default.h_max if h_max is None else h_max)
    return grid.check(net)


def _refresh_scores(agg, labels, n):
    agg.precision, agg.recall = precision_recall(agg.members, labels, n)
    return agg


class _AggregationMixin:
    def _membership(self, X, within):
        check_is_fitted(self, "n_points_")
        if X is None:
            mask = np.zeros(self.n_points_, dtype=bool)
            if self.aggregation_ is not None:
                mask[self.aggregation_.members] = True
            return mask
        X = check_same_network(check_point_set(X, min_points=1), self.network_)
        if self.aggregation_ is None:
            return np.zeros(X.n, dtype=bool)
        edge, offset = self.center_location_
        return within(distances_from(self.network_, edge, offset, X))

    def fit_predict(self, X, y=None):
        return self.fit(X, y).predict()


class LengthLFunction(_AggregationMixin, BaseEstimator):
    """Length L-function analysis of a point pattern on a road network.

    Parameters
    ----------
    h_step, h_max : float, optional
        Scale grid. Defaults to ``total_length / 500`` and ``total_length / 2``.
    intensity : {"global", "nn"}
        Intensity estimator.
    rule : {"depth", "prominence"}
        Selection rule for the L' minimum, see :func:`detect_scale`.
    depth_tolerance, prominence_threshold : float
        Parameters of the two rules.
    normalize_local : bool
        Drop the ``1/n`` factor from the local L values.

    Attributes
    ----------
    curve_ : CurveSamples
        K, L and L' on the grid. ``curve_.local`` holds local L values at
        the detected scale.
    scale_ : ScaleEstimate
    aggregation_ : AggregationResult or None
        None when no scale was detected.
    """

    def __init__(
        self,
        h_step=None,
        h_max=None,
        intensity="global",
        rule="depth",
        depth_tolerance=0.4,
        prominence_threshold=0.2,
        normalize_local=False,
    ):
        self.h_step = h_step
        self.h_max = h_max
        self.intensity = intensity
        self.rule = rule
        self.depth_tolerance = depth_tolerance
        self.prominence_threshold = prominence_threshold
        self.normalize_local = normalize_local

    def fit(self, X, y=None):
        pts = check_point_set(X)
        labels = check_labels(y, pts)
        if self.rule not in DETECTION_RULES:
            raise ValueError(f"rule must be one of {DETECTION_RULES}, got {self.rule!r}")
        net = pts.network
        grid = make_grid(net, self.h_step, self.h_max)
        rows, profiles = neighbor_structure(pts)
        lam = estimate_intensity(self.intensity, pts, rows)
        curve = derivative(length_l(length_k(pts, rows, profiles, lam, grid)))
        est = detect_scale(curve, self.prominence_threshold, self.rule, self.depth_tolerance)

        self.network_ = net
        self.n_points_ = pts.n
        self.grid_ = grid
        self.intensity_ = lam
        self.curve_ = curve
        self.scale_ = est
        self.aggregation_ = None
        self.center_location_ = None
        if est.detected:
            agg = extract_aggregation(pts, rows, profiles, lam, est.h_hat, self.normalize_local)
            self.aggregation_ = _refresh_scores(agg, labels, pts.n)
            c = agg.center
            self.center_location_ = (int(pts.edge[c]), float(pts.offset[c]))
            self._center_profile = profiles[c]
            counts = count_matrix(rows, profiles, [est.h_hat])[:, 0]
            scale = float(lam) if self.normalize_local else float(lam) * pts.n
            curve.local = counts / scale - est.h_hat
        return self

    def predict(self, X=None):
        """Membership in the extracted aggregation.

        Without ``X`` the fitted points are labeled. Points of another set
        on the same network are members when they fall inside the
        ``h_hat``-neighborhood of the fitted center.
        """

        def within(d):
            prof = self._center_profile
            ln = np.where(np.isfinite(d), prof(np.where(np.isfinite(d), d, 0.0)), np.inf)
            return ln <= self.scale_.h_hat + TOL

        return self._membership(X, within)


class NetworkKFunction(_AggregationMixin, BaseEstimator):
    """Radius-based network K-function with a CSR Monte Carlo envelope.

    Parameters
    ----------
    r_step, r_max : float, optional
        Radius grid. Defaults to half the length-function defaults, so a
        radius ``r`` lines up with the scale ``2r``.
    n_runs : int
        Number of CSR simulations for the envelope.
    seed : int
        Base seed of the simulations.
    n_jobs : int, optional
        Worker threads; defaults to the ``NETLENGTH_THREADS`` variable.
    intensity : {"global", "nn"}

    Attributes
    ----------
    curves_ : NetKCurves
    r_hat_ : float or None
    aggregation_ : AggregationResult or None
    """

    def __init__(self, r_step=None, r_max=None, n_runs=10, seed=0, n_jobs=None, intensity="global"):
        self.r_step = r_step
        self.r_max = r_max
        self.n_runs = n_runs
        self.seed = seed
        self.n_jobs = n_jobs
        self.intensity = intensity

    def fit(self, X, y=None):
        pts = check_point_set(X)
        labels = check_labels(y, pts)
        net = pts.network
        default = ScaleGrid.default(net)
        step = default.step / 2 if self.r_step is None else self.r_step
        r_max = default.h_max / 2 if self.r_max is None else self.r_max
        grid = make_grid(net, step, r_max)
        rows, _ = neighbor_structure(pts)
        lam = estimate_intensity(self.intensity, pts, rows)
        r = grid.values
        bench = netk_benchmark(net, pts.n, int(self.n_runs), r, self.seed, self.n_jobs)
        curves = bench.with_observed(network_k(pts, rows, lam, r))
        r_hat = detect_scale_netk(curves)

        self.network_ = net
        self.n_points_ = pts.n
        self.intensity_ = lam
        self.curves_ = curves
        self.r_hat_ = r_hat
        # shared name with the length estimator so the membership mixin works
        self.scale_ = r_hat
        self.aggregation_ = None
        self.center_location_ = None
        if r_hat is not None:
            agg = extract_aggregation_netk(pts, rows, lam, r_hat)
            self.aggregation_ = _refresh_scores(agg, labels, pts.n)
            c = agg.center
            self.center_location_ = (int(pts.edge[c]), float(pts.offset[c]))
        return self

    def predict(self, X=None):
        return self._membership(X, lambda d: d <= self.r_hat_ + TOL)
