"""Tangent bundles of tori, spheres and their products with Sasaki-type metrics."""

from .manifolds import (
    BundlePoint, FlatTorus, PiecewiseCurve, Product, ProductCurve, Rescaled, RoundSphere,
    SphereArc, TorusSegment, TransportResult, curve_length, curve_points, loop_holonomy,
    manifold_from_descriptor, parallel_transport, polygon_loop, sphere_frame,
)
from .sasaki import (
    BundleSample, LengthNormCertificate, SasakiResult, bundle_ball_sample, fiber_inclusion,
    fiber_metric_sample, holonomic_space, holonomy_radius_estimate, length_norm_estimate,
    norm_map, polygon_challenge, sasaki_distance, sasaki_distance_by_curves, sasaki_matrix,
)

__all__ = [
    "BundlePoint", "BundleSample", "FlatTorus", "LengthNormCertificate", "PiecewiseCurve",
    "Product", "ProductCurve", "Rescaled", "RoundSphere", "SasakiResult", "SphereArc",
    "TorusSegment", "TransportResult", "bundle_ball_sample", "curve_length", "curve_points",
    "fiber_inclusion", "fiber_metric_sample", "holonomic_space", "holonomy_radius_estimate",
    "length_norm_estimate", "loop_holonomy", "manifold_from_descriptor", "norm_map",
    "parallel_transport", "polygon_challenge", "polygon_loop", "sasaki_distance",
    "sasaki_distance_by_curves", "sasaki_matrix", "sphere_frame",
]
