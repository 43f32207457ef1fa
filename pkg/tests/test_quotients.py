import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holonomy_lab.errors import DomainError, MalformedInputError
from holonomy_lab.metric_core import check_metric_axioms
from holonomy_lab.quotients import (
    CircleSO2, FiniteList, FullSO, ProductGroup, Trivial, cone_scaling_check, cyclic_group,
    group_from_descriptor, op_norm, orbit_distance, plane_rotation, quotient_sample, sign_group,
)
from holonomy_lab.sampling import ball_grid

vec = lambda k: arrays(np.float64, k, elements=st.floats(-3, 3))  # noqa: E731

GROUPS_2D = [Trivial(2), sign_group(2), cyclic_group(2, 5), CircleSO2(2), FullSO(2)]


def brute_orbit(elements, u, v):
    return min(np.linalg.norm(u - g @ v) for g in elements)


class TestOrbitDistance:
    @given(vec(2), vec(2))
    def test_trivial(self, u, v):
        assert orbit_distance(Trivial(2), u, v) == pytest.approx(np.linalg.norm(u - v))

    @given(vec(2), vec(2))
    def test_full_so2_matches_dense_rotations(self, u, v):
        d = orbit_distance(FullSO(2), u, v)
        assert d == pytest.approx(abs(np.linalg.norm(u) - np.linalg.norm(v)), abs=1e-12)
        dense = brute_orbit(plane_rotation(2, (0, 1), np.linspace(0, 2 * np.pi, 20001)), u, v)
        assert abs(d - dense) < 1e-6 * (1 + np.linalg.norm(v))
        assert orbit_distance(CircleSO2(2), u, v) == pytest.approx(d, abs=1e-12)

    @given(vec(3), vec(3))
    def test_sign_group(self, u, v):
        d = orbit_distance(sign_group(3), u, v)
        assert d == pytest.approx(min(np.linalg.norm(u - v), np.linalg.norm(u + v)))

    @given(vec(4), vec(4))
    def test_circle_in_plane_against_brute(self, u, v):
        G = CircleSO2(4, (1, 3))
        dense = brute_orbit(G.sample(4096), u, v)
        d = G.orbit_distance(u, v)
        assert d <= dense + 1e-12
        assert dense - d < 1e-2

    @given(vec(4), vec(4))
    def test_product_splits(self, u, v):
        G = ProductGroup(Trivial(2), FullSO(2))
        expected = np.hypot(np.linalg.norm(u[:2] - v[:2]), abs(np.linalg.norm(u[2:]) - np.linalg.norm(v[2:])))
        assert G.orbit_distance(u, v) == pytest.approx(expected)

    @given(st.sampled_from(GROUPS_2D), vec(2), vec(2), st.integers(0, 4))
    def test_invariance(self, G, u, v, j):
        g = G.sample(5)[j % len(G.sample(5))]
        assert G.orbit_distance(u, g @ v) == pytest.approx(G.orbit_distance(u, v), abs=1e-9)

    @given(st.sampled_from(GROUPS_2D), arrays(np.float64, (6, 2), elements=st.floats(-2, 2)))
    def test_metric_on_representatives(self, G, P):
        D = G.orbit_distance_matrix(P, P)
        assert np.allclose(D, D.T, atol=1e-12)
        assert check_metric_axioms(D, tol=1e-9).n_triangle_violations == 0

    def test_dimension_checked(self):
        with pytest.raises(MalformedInputError):
            orbit_distance(Trivial(2), [1, 2, 3], [0, 0, 0])


class TestGroups:
    def test_finite_list_must_be_closed(self):
        with pytest.raises(DomainError):
            FiniteList(np.stack([np.eye(2), plane_rotation(2, (0, 1), 0.3)]))

    def test_names(self):
        assert Trivial(3).name == "trivial"
        assert sign_group(2).name == "Z/2"
        assert cyclic_group(2, 7).name == "C7"
        assert CircleSO2(2).name == "SO(2)"
        assert CircleSO2(4, (2, 3)).name == "SO(2)[2,3]"
        assert ProductGroup(Trivial(2), CircleSO2(2)).name == "trivialxSO(2)"

    def test_nearest_and_residual(self):
        G = FullSO(3)
        R = plane_rotation(3, (0, 2), 0.4)
        assert G.membership_residual(R) < 1e-12
        assert CircleSO2(3, (0, 1)).membership_residual(R) > 0.1
        assert op_norm(sign_group(2).nearest(-np.eye(2) + 1e-3) + np.eye(2)) < 1e-2

    @pytest.mark.parametrize("G", [Trivial(2), sign_group(2), cyclic_group(3, 4, (0, 2)), CircleSO2(3, (1, 2)),
                                   FullSO(2), ProductGroup(Trivial(2), CircleSO2(2))])
    def test_descriptor_round_trip(self, G):
        H = group_from_descriptor(G.descriptor())
        u, v = np.random.default_rng(0).normal(size=(2, G.k))
        assert H.orbit_distance(u, v) == pytest.approx(G.orbit_distance(u, v))

    def test_bad_descriptor(self):
        with pytest.raises(MalformedInputError):
            group_from_descriptor({"type": "lie"})
        with pytest.raises(MalformedInputError):
            group_from_descriptor({"type": "trivial"})


class TestQuotientSample:
    def test_trivial_is_euclidean_grid(self):
        q = quotient_sample(Trivial(2), 1.0, 5)
        pts = ball_grid(2, 1.0, 5, kind="polar")
        assert q.space.n == len(pts)
        assert np.allclose(q.space.dist, np.linalg.norm(pts[:, None] - pts[None], axis=2))

    def test_so2_is_segment(self):
        q = quotient_sample(FullSO(2), 1.0, 6)
        radii = np.linspace(0, 1, 6)
        assert q.space.n == 6
        assert np.allclose(q.space.dist, np.abs(radii[:, None] - radii[None]), atol=1e-12)
        assert q.space.base == 0

    def test_sign_fold_against_brute_force(self):
        pts = ball_grid(2, 1.0, 5, kind="cartesian")
        q = quotient_sample(sign_group(2), 1.0, 0, points=pts)
        # grid is symmetric, so every nonzero point merges with its negative
        assert q.space.n == (len(pts) - 1) // 2 + 1
        reps = pts[q.representatives]
        brute = np.array([[min(np.linalg.norm(a - b), np.linalg.norm(a + b)) for b in reps] for a in reps])
        assert np.allclose(q.space.dist, brute)

    def test_origin_is_base(self):
        q = quotient_sample(FullSO(2), 2.0, 4)
        assert np.linalg.norm(q.points[q.representatives[q.space.base]]) == 0


class TestConeScaling:
    def test_exact_for_so2(self):
        U = np.random.default_rng(0).normal(size=(20, 2))
        rep = cone_scaling_check(FullSO(2), U)
        assert rep.passed and rep.max_deviation == 0.0

    @given(st.floats(-3, 3), arrays(np.float64, (5, 3), elements=st.floats(-2, 2)))
    def test_sign_random_scalar(self, a, U):
        rep = cone_scaling_check(sign_group(3), U, scalars=(a,))
        assert rep.max_deviation <= 1e-12 * (1 + abs(a))

    def test_zero_scalar(self):
        rep = cone_scaling_check(CircleSO2(2), np.ones((3, 2)), scalars=(0.0,))
        assert rep.max_deviation == 0.0
