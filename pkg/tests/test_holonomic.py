import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holonomy_lab.errors import DomainError, MalformedInputError, NonCauchyWarning, ToleranceError
from holonomy_lab.holonomic import (
    CircleNormedGroup, FiniteNormedGroup, GroupElementSample, HolonomicSequence, HolonomicSpace,
    SphereLengthNorm, TableNorm, check_group_norm, check_holonomic_property, convexity_radius,
    default_schedule, holonomic_distance, holonomic_distance_matrix, holonomic_metric_sample,
    holonomy_radius_at_zero, holonomy_radius_zero_upper, limit_semimetric, normalize_representation,
    sign_space, sphere_space, trivial_space, wane_group_closure, wane_set_estimate, wrap_angle,
)
from holonomy_lab.metric_core import check_metric_axioms, quotient_by_zero
from holonomy_lab.quotients import plane_rotation
from oracles import brute_circle_holonomic, brute_finite_holonomic, sphere_norm_unfolded
from spaces import KINDS, random_space

vec2 = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).map(np.array)

# frozen from a 2e6-point grid of the closed-form ratio (see test_radius_oracles)
SPHERE_CONVEXITY_RADIUS = 2.641402552064211
SPHERE_HOLONOMY_RADIUS_AT_ZERO = 2.4558625558625193


class TestGroups:
    def test_element_must_be_orthogonal(self):
        with pytest.raises(DomainError):
            GroupElementSample(np.array([[2.0, 0], [0, 1]]), 0.0)
        with pytest.raises(DomainError):
            GroupElementSample(np.eye(2), -1.0)

    def test_finite_group_needs_identity_and_inverses(self):
        with pytest.raises(DomainError):
            FiniteNormedGroup.from_matrices([-np.eye(2)], [1.0])
        r = plane_rotation(2, (0, 1), 0.5)
        with pytest.raises(DomainError):
            FiniteNormedGroup.from_matrices([np.eye(2), r], [0.0, 1.0])

    def test_circle_basis_validated(self):
        with pytest.raises(MalformedInputError):
            CircleNormedGroup(3, SphereLengthNorm(), np.ones((3, 2)))

    def test_json_round_trip(self):
        rng = np.random.default_rng(5)
        for kind in KINDS:
            H = random_space(rng, kind)
            H2 = HolonomicSpace.from_dict(H.to_dict())
            u, v = rng.normal(size=(2, H.k))
            assert holonomic_distance(H2, u, v).value == pytest.approx(holonomic_distance(H, u, v).value,
                                                                     abs=1e-12)

    def test_from_dict_errors(self):
        with pytest.raises(MalformedInputError):
            HolonomicSpace.from_dict({"group": {}})
        with pytest.raises(MalformedInputError):
            HolonomicSpace.from_dict({"k": 2, "group": {"type": "lie"}})

    def test_wrap_angle(self):
        assert wrap_angle(np.pi) == np.pi
        assert wrap_angle(-np.pi) == np.pi
        assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


class TestGroupNorm:
    def test_trivial_and_sign(self):
        assert check_group_norm(trivial_space(3)).passed
        assert check_group_norm(sign_space(2, 0.7)).passed

    def test_sphere_norm(self):
        assert check_group_norm(sphere_space(1.0)).passed

    def test_sphere_norm_matches_unfolded_formula(self):
        th = np.linspace(-7, 7, 1001)
        assert np.allclose(SphereLengthNorm(1.3)(th), sphere_norm_unfolded(th, 1.3))

    def test_bad_norms_detected(self):
        bad = HolonomicSpace(2, FiniteNormedGroup.from_matrices([np.eye(2), -np.eye(2)], [0.5, 1.0]))
        rep = check_group_norm(bad)
        assert not rep.identity_zero
        # L(theta) = theta^2 near 0 is not subadditive
        sq = HolonomicSpace(2, CircleNormedGroup(2, TableNorm(
            [[t, t * t] for t in np.linspace(0, np.pi, 50)])))
        assert not check_group_norm(sq).subadditive

    def test_random_spaces_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            assert check_group_norm(random_space(rng)).passed


class TestDistance:
    @given(vec2, vec2)
    def test_trivial_is_euclidean(self, u, v):
        assert holonomic_distance(trivial_space(2), u, v).value == pytest.approx(np.linalg.norm(u - v))

    @given(vec2, st.floats(0.01, 5))
    def test_sign_group_antipodes(self, u, c):
        H = sign_space(2, c)
        d = holonomic_distance(H, u, -u).value
        assert d == pytest.approx(min(2 * np.linalg.norm(u), c), abs=1e-12)
        mats, norms = H.group.matrices, H.group.norms
        assert d == pytest.approx(brute_finite_holonomic(mats, norms, u, -u), abs=1e-12)

    @given(vec2, vec2, st.floats(0.2, 2.0))
    def test_sphere_matches_dense_grid(self, u, v, r):
        H = sphere_space(r)
        d = holonomic_distance(H, u, v).value
        ref = brute_circle_holonomic(SphereLengthNorm(r), u, v)
        # the dense grid over-estimates by at most its mesh effect
        assert d <= ref + 1e-12
        assert d >= ref - 1e-6

    def test_tie_breaks_toward_smaller_norm(self):
        # u = 0, v = 0: every element gives L(a); the identity wins
        res = holonomic_distance(sign_space(2, 1.0), np.zeros(2), np.zeros(2))
        assert res.norm_value == 0.0 and res.value == 0.0

    def test_wrong_length(self):
        with pytest.raises(MalformedInputError):
            holonomic_distance(trivial_space(2), [1, 2, 3], [0, 0])

    def test_matrix_matches_pointwise(self):
        rng = np.random.default_rng(1)
        for kind in KINDS:
            H = random_space(rng, kind, k=3)
            U = rng.normal(size=(6, 3))
            D = holonomic_distance_matrix(H, U)
            ref = np.array([[holonomic_distance(H, a, b).value for b in U] for a in U])
            np.fill_diagonal(ref, 0.0)
            assert np.allclose(D, ref, atol=1e-9)
            V = rng.normal(size=(4, 3))
            D2 = holonomic_distance_matrix(H, U, V)
            assert D2.shape == (6, 4)

    @given(st.integers(0, 10_000), st.sampled_from(KINDS))
    def test_semimetric_and_contraction(self, seed, kind):
        rng = np.random.default_rng(seed)
        H = random_space(rng, kind)
        P = rng.normal(size=(8, H.k)) * rng.uniform(0.1, 3)
        S = holonomic_metric_sample(H, P)
        assert check_metric_axioms(S, tol=1e-9).is_semimetric
        E = np.linalg.norm(P[:, None] - P[None], axis=2)
        assert np.all(S.dist <= E + 1e-12)


class TestRadii:
    def test_radius_oracles(self):
        t = np.linspace(1e-6, np.pi, 2_000_001)
        L = np.sqrt(t * (4 * np.pi - t))
        m = 2 * np.sin(t / 2)
        assert (L / m).min() == pytest.approx(SPHERE_CONVEXITY_RADIUS, abs=1e-9)
        assert (L / np.sqrt(2 * m)).min() == pytest.approx(SPHERE_HOLONOMY_RADIUS_AT_ZERO, abs=1e-9)

    def test_sphere_values(self):
        H = sphere_space(1.0)
        assert convexity_radius(H) == pytest.approx(SPHERE_CONVEXITY_RADIUS, abs=1e-9)
        assert holonomy_radius_zero_upper(H) == pytest.approx(SPHERE_CONVEXITY_RADIUS, abs=1e-9)
        assert holonomy_radius_at_zero(H) == pytest.approx(SPHERE_HOLONOMY_RADIUS_AT_ZERO, abs=1e-9)

    @given(st.floats(0.1, 10))
    def test_radii_scale_linearly(self, r):
        assert convexity_radius(sphere_space(r)) == pytest.approx(r * SPHERE_CONVEXITY_RADIUS, rel=1e-9)

    def test_trivial_infinite_and_sign(self):
        assert convexity_radius(trivial_space(3)) == np.inf
        assert holonomy_radius_zero_upper(trivial_space(2)) == np.inf
        for k in (1, 2, 4):
            assert convexity_radius(sign_space(k, 1.3)) == pytest.approx(0.65)

    def test_euclidean_inside_holonomy_radius(self):
        # the exact holonomy radius at 0 is below 0.99 * convexity radius for the sphere;
        # inside it d_L is Euclidean
        H = sphere_space(1.0)
        rng = np.random.default_rng(2)
        rad = 0.999 * holonomy_radius_at_zero(H)
        x = rng.normal(size=(60, 2))
        P = x / np.linalg.norm(x, axis=1, keepdims=True) * rad * np.sqrt(rng.random((60, 1)))
        D = holonomic_distance_matrix(H, P)
        E = np.linalg.norm(P[:, None] - P[None], axis=2)
        assert np.abs(D - E).max() < 1e-6

    def test_not_euclidean_just_below_convexity_radius(self):
        # recorded deviation: at 0.99 * CvxRad antipodal pairs are already shortcut
        H = sphere_space(1.0)
        rad = 0.99 * SPHERE_CONVEXITY_RADIUS
        # extremal pair: u along (a - id) v with a the rotation minimizing L / sqrt(||a - id||)
        t = np.linspace(1e-3, np.pi, 100_001)
        theta = t[np.argmin(np.sqrt(t * (4 * np.pi - t)) / np.sqrt(2 * np.sin(t / 2)))]
        v = np.array([rad, 0.0])
        w = plane_rotation(2, (0, 1), theta) @ v - v
        u = rad * w / np.linalg.norm(w)
        assert holonomic_distance(H, u, v).value < np.linalg.norm(u - v) - 1e-3


class TestHolonomicProperty:
    def test_trivial_always(self):
        assert check_holonomic_property(trivial_space(2), [0, 0], 100.0).holds

    def test_sphere_below_radius(self):
        H = sphere_space(1.0)
        assert check_holonomic_property(H, [0, 0], 0.99 * holonomy_radius_at_zero(H)).holds

    def test_sign_group_threshold(self):
        # L(-id) = 1: the bound 4 <v, w> <= 1 holds on B_R(0) iff R <= 1/2
        H = sign_space(2, 1.0)
        assert check_holonomic_property(H, [0, 0], 0.45).holds
        res = check_holonomic_property(H, [0, 0], 1.0)
        assert not res.holds
        v, w, a, excess = res.counterexample
        assert np.sum((v - w) ** 2) - np.sum((a @ v - w) ** 2) - 1.0 == pytest.approx(excess)

    def test_positive_radius(self):
        with pytest.raises(DomainError):
            check_holonomic_property(trivial_space(2), [0, 0], 0.0)


class TestLimits:
    def test_schedule(self):
        assert default_schedule(16) == [1, 2, 4, 8, 16]
        assert default_schedule(10) == [1, 2, 4, 8, 10]

    def test_constant_sequence(self):
        H = sign_space(2, 1.0)
        P = np.random.default_rng(0).normal(size=(10, 2))
        lim = limit_semimetric(HolonomicSequence.constant(H), P, 8)
        assert lim.converged
        assert np.allclose(lim.sample.dist, holonomic_distance_matrix(H, P))
        assert not check_metric_axioms(lim.sample).degenerate_pairs

    def test_rescaled_sphere_limit_is_norm_difference(self):
        rng = np.random.default_rng(0)
        P = rng.normal(size=(12, 2))
        P[0] = 0
        seq = HolonomicSequence.rescaled(sphere_space(1.0))
        lim = limit_semimetric(seq, P, 2 ** 23, tol=1e-6)
        norms = np.linalg.norm(P, axis=1)
        assert lim.converged
        assert np.abs(lim.sample.dist - np.abs(norms[:, None] - norms[None])).max() < 1e-6

    def test_sup_difference_bounded_by_norm_sup(self):
        # |d_{L_i} - d_inf| <= sup L / i on every pair
        H = sphere_space(1.0)
        P = np.random.default_rng(4).normal(size=(10, 2))
        norms = np.linalg.norm(P, axis=1)
        d_inf = np.abs(norms[:, None] - norms[None])
        for i in (1, 3, 9, 27):
            D = holonomic_distance_matrix(H.scaled(1.0 / i), P)
            assert np.abs(D - d_inf).max() <= H.group.norm.sup / i + 1e-12

    def test_degenerate_limit_quotient_is_norm_levels(self):
        r = np.array([0.0, 0.5, 1.0])
        ang = np.linspace(0, 2 * np.pi, 5, endpoint=False)
        P = np.array([[0.0, 0.0]] + [[a * np.cos(t), a * np.sin(t)] for a in r[1:] for t in ang])
        lim = limit_semimetric(HolonomicSequence.rescaled(sphere_space(1.0)), P, 2 ** 23)
        assert check_metric_axioms(lim.sample, tol=1e-6).degenerate_pairs
        q = quotient_by_zero(lim.sample, tol=1e-6)
        assert q.space.n == 3
        assert np.allclose(q.space.dist, np.abs(r[:, None] - r[None]), atol=1e-6)

    def test_non_cauchy_warns(self):
        seq = HolonomicSequence(2, lambda i: sign_space(2, 1.0 + (i % 2)), "oscillating")
        P = np.array([[0.6, 0.0], [-0.6, 0.0]])
        with pytest.warns(NonCauchyWarning):
            lim = limit_semimetric(seq, P, 5, indices=[1, 2, 3])
        assert not lim.converged and len(lim.table) == 2

    def test_nondegenerate_when_radius_bounded_below(self):
        # constant Z/2 with c=1: convexity radius 1/2 for every i
        seq = HolonomicSequence.constant(sign_space(2, 1.0))
        P = np.random.default_rng(7).normal(size=(15, 2))
        q = quotient_by_zero(limit_semimetric(seq, P, 4).sample)
        assert q.space.n == 15


class TestWane:
    def test_constant_nondegenerate_only_identity(self):
        est = wane_set_estimate(HolonomicSequence.constant(sign_space(2, 1.0)), 0.5, 50)
        assert len(est) == 1
        c = wane_group_closure(est)
        assert c.label == "trivial"

    def test_rescaled_sphere_covers_circle(self):
        seq = HolonomicSequence.rescaled(sphere_space(1.0))
        sup = sphere_space(1.0).group.norm.sup
        est = wane_set_estimate(seq, 0.05, int(np.ceil(sup / 0.05)))
        assert len(est) == 4096
        c = wane_group_closure(est)
        assert c.label == "SO(2)" and c.residual < 1e-3

    def test_short_horizon_misses_elements(self):
        est = wane_set_estimate(HolonomicSequence.rescaled(sphere_space(1.0)), 0.05, 10)
        assert 1 < len(est) < 4096

    def test_sign_group_rescaled(self):
        est = wane_set_estimate(HolonomicSequence.rescaled(sign_space(2, 1.0)), 0.05, 100)
        c = wane_group_closure(est)
        assert c.label == "Z/2"

    def test_certificates_witness_threshold(self):
        est = wane_set_estimate(HolonomicSequence.rescaled(sphere_space(1.0)), 0.1, 200)
        assert all(val <= 0.1 for _, _, val in est.certificates)

    def test_unclassified_flag(self):
        # a finite group of order 30 exceeds the cyclic catalog bound
        m = np.arange(30)
        mats = plane_rotation(2, (0, 1), 2 * np.pi * m / 30)
        H = HolonomicSpace(2, FiniteNormedGroup.from_matrices(mats, np.minimum(m, 30 - m) * 0.1))
        est = wane_set_estimate(HolonomicSequence.rescaled(H), 10.0, 1)
        c = wane_group_closure(est, max_cyclic=24)
        assert c.unclassified and c.group is None

    def test_bad_threshold(self):
        with pytest.raises(DomainError):
            wane_set_estimate(HolonomicSequence.constant(trivial_space(2)), 0.0, 3)

    def test_zero_pairs_explained_by_wane_elements(self):
        # every degenerate pair of the limit has v = a u for some wane element a
        ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
        P = np.stack([np.cos(ang), np.sin(ang)], 1)
        seq = HolonomicSequence.rescaled(sphere_space(1.0))
        lim = limit_semimetric(seq, P, 2 ** 23)
        est = wane_set_estimate(seq, 0.05, 200)
        for i, j in check_metric_axioms(lim.sample, tol=1e-6).degenerate_pairs:
            gap = np.linalg.norm(P[j] - est.elements @ P[i], axis=1).min()
            assert gap < 1e-2


class TestNormalize:
    def test_identity_conjugators(self):
        H = sphere_space(1.0)
        (H2,) = normalize_representation([H], [np.eye(2)])
        u, v = np.array([1.0, 0.2]), np.array([-0.3, 0.9])
        assert holonomic_distance(H2, u, v).value == pytest.approx(holonomic_distance(H, u, v).value)

    def test_sign_group_is_central(self):
        H = sign_space(2, 0.8)
        R = plane_rotation(2, (0, 1), 0.7)
        (H2,) = normalize_representation([H], [R])
        assert np.allclose(H2.group.matrices, H.group.matrices)

    def test_reflection_group_conjugated(self):
        F = np.diag([1.0, -1.0])
        H = HolonomicSpace(2, FiniteNormedGroup.from_matrices([np.eye(2), F], [0.0, 0.6]))
        R = plane_rotation(2, (0, 1), 1.1)
        (H2,) = normalize_representation([H], [R])
        rng = np.random.default_rng(0)
        for u, v in rng.normal(size=(20, 2, 2)):
            assert holonomic_distance(H2, R @ u, R @ v).value == pytest.approx(
                holonomic_distance(H, u, v).value, abs=1e-12)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(DomainError):
            normalize_representation([trivial_space(2)], [np.diag([1.0, 2.0])])
        with pytest.raises(MalformedInputError):
            normalize_representation([trivial_space(2)], [])


def test_tolerance_error_is_value_error():
    assert issubclass(ToleranceError, ValueError)


def test_warnings_filter_scope():
    # the limit code never leaks warnings when converged
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        limit_semimetric(HolonomicSequence.constant(trivial_space(2)), np.eye(2), 2)
