"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .network import PointSet, RoadNetwork

__all__ = ["check_point_set", "check_labels", "check_positive", "check_same_network"]


def check_point_set(X, min_points: int = 2) -> PointSet:
    """Return ``X`` if it is a :class:`PointSet` with at least ``min_points`` points."""
    if not isinstance(X, PointSet):
        raise TypeError(f"expected a PointSet, got {type(X).__name__}")
    if X.n < min_points:
        raise ValueError(f"need at least {min_points} points")
    return X


def check_labels(y, pts: PointSet) -> Optional[np.ndarray]:
    """Boolean membership labels from ``y``, falling back to ``pts.labels``."""
    if y is None:
        return pts.labels
    y = np.asarray(y)
    if y.shape != (pts.n,):
        raise ValueError(f"labels must have shape ({pts.n},), got {y.shape}")
    if y.dtype != bool:
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be boolean or 0/1")
        y = y.astype(bool)
    return y


def check_positive(value, name: str, allow_none: bool = False):
    if value is None and allow_none:
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number") from None
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"{name} must be positive and finite")
    return v


def check_same_network(pts: PointSet, net: RoadNetwork) -> PointSet:
    if pts.network is not net:
        raise ValueError("points live on a different network than the fitted one")
    return pts
