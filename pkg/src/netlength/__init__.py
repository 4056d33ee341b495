"""Length K- and L-functions for point patterns constrained to road networks."""

from .distance import (
    CoverageProfile,
    DistanceMatrixRow,
    coverage_profile,
    neighborhood_length,
    neighbor_structure,
    pairwise_distances,
    shortest_distance,
)
from .estimators import LengthLFunction, NetworkKFunction
from .lengthstat import (
    AggregationResult,
    CurveSamples,
    ScaleEstimate,
    ScaleGrid,
    detect_scale,
    extract_aggregation,
    length_k,
    length_l,
    local_length_l,
)
from .montecarlo import Envelope, envelope
from .netk import NetKCurves, detect_scale_netk, netk_benchmark, network_k
from .network import (
    NetworkFormatError,
    NetworkLocation,
    PointSet,
    RoadNetwork,
    load_network,
    load_points,
    snap_points,
    validate,
)
from .process import Intensity, generate_csr, intensity_global, intensity_nn
from .synth import case_spec, compose_case, hybrid_network, make_network

__version__ = "0.1.0"

__all__ = [
    "AggregationResult",
    "CoverageProfile",
    "CurveSamples",
    "DistanceMatrixRow",
    "Envelope",
    "Intensity",
    "LengthLFunction",
    "NetKCurves",
    "NetworkFormatError",
    "NetworkKFunction",
    "NetworkLocation",
    "PointSet",
    "RoadNetwork",
    "ScaleEstimate",
    "ScaleGrid",
    "case_spec",
    "compose_case",
    "coverage_profile",
    "detect_scale",
    "detect_scale_netk",
    "envelope",
    "extract_aggregation",
    "generate_csr",
    "hybrid_network",
    "intensity_global",
    "intensity_nn",
    "length_k",
    "length_l",
    "load_network",
    "load_points",
    "local_length_l",
    "make_network",
    "neighbor_structure",
    "neighborhood_length",
    "netk_benchmark",
    "network_k",
    "pairwise_distances",
    "shortest_distance",
    "snap_points",
    "validate",
]
