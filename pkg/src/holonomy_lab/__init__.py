"""Holonomic metrics, Sasaki-type bundle distances and GH bounds for collapsing bundles."""

from . import bundles
from .errors import (
    ChartError, DomainError, EmptyLiftWarning, MalformedInputError, NonCauchyWarning,
    ToleranceError, UnattainableError,
)
from .holonomic import (
    CircleNormedGroup, FiniteNormedGroup, GroupElementSample, HolonomicSequence, HolonomicSpace,
    SphereLengthNorm, check_group_norm, check_holonomic_property, convexity_radius,
    holonomic_distance, holonomic_distance_matrix, holonomic_metric_sample,
    holonomy_radius_at_zero, holonomy_radius_zero_upper, limit_semimetric,
    normalize_representation, sign_space, sphere_space, trivial_space, wane_group_closure,
    wane_set_estimate,
)
from .metric_core import (
    Correspondence, FiniteMetricSpace, SemiMetricSample, check_metric_axioms,
    correspondence_distortion, covering_number, eps_isometry_defect, euclidean_space,
    hausdorff_distance, quotient_by_zero, restricted_ball,
)
from .parallelism import (
    Relation, SampledSubmetry, compose, constant_norm_check, holonomy_monoid_sample, involution,
    is_horizontal, parallel_translate_setvalued, submetry_defect, submetry_from_bundle,
)
from .quotients import (
    CircleSO2, FiniteList, FullSO, ProductGroup, Trivial, cone_scaling_check, cyclic_group,
    orbit_distance, quotient_sample, sign_group,
)

__version__ = "0.1.0"
