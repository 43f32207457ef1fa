import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holonomy_lab.errors import DomainError, MalformedInputError, ToleranceError
from holonomy_lab.metric_core import (
    Correspondence, FiniteMetricSpace, SemiMetricSample, check_metric_axioms,
    correspondence_distortion, covering_number, eps_isometry_defect, euclidean_space,
    hausdorff_distance, quotient_by_zero, restricted_ball,
)

point_clouds = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 3)),
                      elements=st.floats(-5, 5, allow_nan=False))

# coordinates on a lattice so distinct points never underflow to distance zero
lattice_clouds = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 3)),
                        elements=st.integers(-8, 8).map(lambda m: m / 4))


def line(xs):
    return euclidean_space(np.asarray(xs, dtype=float)[:, None], base=0)


class TestConstruction:
    def test_rejects_asymmetric(self):
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0, 1), [[0, 1], [2, 0]])

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0, 1), [[0.1, 1], [1, 0]])

    def test_rejects_negative_and_nan(self):
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0, 1), [[0, -1], [-1, 0]])
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0, 1), [[0, np.nan], [np.nan, 0]])

    def test_rejects_label_mismatch_and_bad_base(self):
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0,), [[0, 1], [1, 0]])
        with pytest.raises(MalformedInputError):
            SemiMetricSample((0, 1), [[0, 1], [1, 0]], base=5)

    def test_json_round_trip(self):
        X = euclidean_space(np.array([[0.0, 0.0], [3.0, 4.0]]), labels=[(0, 1), (2, 3)], base=1)
        Y = FiniteMetricSpace.from_json(X.to_json())
        assert Y.labels == X.labels and Y.base == 1
        assert np.array_equal(Y.dist, X.dist)
        assert json.loads(X.to_json())["dist"][0][1] == 5.0

    def test_from_dict_missing_field(self):
        with pytest.raises(MalformedInputError):
            SemiMetricSample.from_dict({"labels": [0]})

    def test_csv_header_is_labels(self):
        text = line([0.0, 1.0]).to_csv().splitlines()
        assert text[0] == "0,1"
        assert text[1] == "0.0,1.0"


class TestAxioms:
    def test_three_point_violation(self):
        D = np.array([[0, 1, 3], [1, 0, 1], [3, 1, 0]], dtype=float)
        rep = check_metric_axioms(D)
        # (a,c) and (c,a) through b
        assert rep.n_triangle_violations == 2
        assert {(i, j) for i, j, _, _ in rep.triangle_violations} == {(0, 2), (2, 0)}
        assert not rep.is_semimetric

    @given(point_clouds)
    def test_euclidean_samples_pass(self, P):
        rep = check_metric_axioms(euclidean_space(P))
        assert rep.is_semimetric

    def test_degenerate_pairs_reported(self):
        D = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
        rep = check_metric_axioms(D)
        assert rep.degenerate_pairs == [(0, 1)]
        assert rep.is_semimetric and not rep.is_metric


class TestHausdorff:
    def test_identical_and_singletons(self):
        X = line([0, 1, 3])
        assert hausdorff_distance(X, [0, 1], [1, 0]) == 0
        assert hausdorff_distance(X, [0], [2]) == 3

    def test_interval_grids(self):
        # grids of [0,1] and [0,2] inside a grid of [0,2]
        xs = np.linspace(0, 2, 41)
        X = line(xs)
        A = np.nonzero(xs <= 1 + 1e-12)[0]
        assert hausdorff_distance(X, A, range(41)) == pytest.approx(1.0)

    def test_empty_set_rejected(self):
        with pytest.raises(DomainError):
            hausdorff_distance(line([0, 1]), [], [0])

    @given(lattice_clouds, st.data())
    def test_zero_iff_same_set(self, P, data):
        X = euclidean_space(P)
        n = X.n
        A = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
        B = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
        h = hausdorff_distance(X, A, B)
        pts_a = {tuple(P[i]) for i in A}
        pts_b = {tuple(P[i]) for i in B}
        assert (h == 0) == (pts_a == pts_b)


class TestCorrespondence:
    @given(point_clouds)
    def test_identity_distortion_is_zero(self, P):
        X = euclidean_space(P)
        assert correspondence_distortion(X, X, Correspondence.identity(X.n)).distortion == 0.0

    def test_two_point_spaces(self):
        b = correspondence_distortion(line([0, 1]), line([0, 2]), Correspondence.identity(2))
        assert b.distortion == 1.0 and b.gh_upper == 0.5

    def test_not_total_rejected(self):
        with pytest.raises(DomainError):
            Correspondence(frozenset({(0, 0)}), 2, 1)

    @given(point_clouds, point_clouds, st.data())
    def test_gh_sandwich(self, P, Q, data):
        # any correspondence bounds GH from above, GH bounds |diam X - diam Y| / 2 from above
        X, Y = euclidean_space(P), euclidean_space(Q)
        f = data.draw(st.lists(st.integers(0, Y.n - 1), min_size=X.n, max_size=X.n))
        pairs = set(enumerate(f)) | {(0, j) for j in range(Y.n)}
        b = correspondence_distortion(X, Y, Correspondence(frozenset(pairs), X.n, Y.n))
        assert b.gh_upper >= abs(X.dist.max() - Y.dist.max()) / 2 - 1e-12


class TestEpsIsometry:
    def test_identity(self):
        X = line([0, 1, 2])
        d = eps_isometry_defect([0, 1, 2], X, X)
        assert (d.distortion, d.surjectivity_defect) == (0.0, 0.0)

    def test_collapse_two_points(self):
        X = line([0.0, 0.7])
        Y = line([0.0])
        d = eps_isometry_defect([0, 0], X, Y)
        assert d.distortion == pytest.approx(0.7) and d.surjectivity_defect == 0.0

    def test_must_be_total(self):
        with pytest.raises(MalformedInputError):
            eps_isometry_defect([0], line([0, 1]), line([0, 1]))


class TestCovering:
    def test_eps_above_radius(self):
        X = line(np.linspace(0, 1, 11))
        assert covering_number(X, 1.0, 1.0) == 1

    def test_interval(self):
        X = line(np.linspace(0, 1, 100))
        assert covering_number(X, 0.25, 1.0) <= 3

    def test_torus_sample_stable_across_seeds(self):
        from holonomy_lab.bundles import FlatTorus
        T = FlatTorus()
        counts = []
        for seed in (0, 1):
            P = np.random.default_rng(seed).random((400, 2))
            P[0] = 0
            D = np.array([T.distance(P, p) for p in P])
            counts.append(covering_number(FiniteMetricSpace(tuple(range(400)), D, 0), 0.3, 0.5))
        assert abs(counts[0] - counts[1]) <= 1

    def test_needs_base_and_positive_eps(self):
        X = euclidean_space(np.zeros((2, 1)) + [[0], [1]])
        with pytest.raises(DomainError):
            covering_number(X, 0.1, 1)
        with pytest.raises(DomainError):
            covering_number(line([0, 1]), 0.0, 1)

    @given(arrays(np.float64, st.integers(2, 30), elements=st.floats(0, 3)),
           st.floats(0.01, 2), st.floats(0.01, 2), st.floats(0, 3), st.floats(0, 3))
    def test_monotone(self, xs, e1, e2, r1, r2):
        X = line(np.concatenate([[0.0], xs]))
        lo, hi = sorted((e1, e2))
        assert covering_number(X, hi, r1) <= covering_number(X, lo, r1)
        rl, rh = sorted((r1, r2))
        assert covering_number(X, e1, rl) <= covering_number(X, e1, rh)


class TestRestrictedBall:
    def test_large_and_small(self):
        X = line([0, 1, 2.5])
        assert restricted_ball(X, 0, 10).n == 3
        B = restricted_ball(X, 1, 0.5)
        assert B.n == 1 and B.base == 0

    def test_torus_matches_filter(self):
        from holonomy_lab.bundles import FlatTorus
        T = FlatTorus()
        P = np.random.default_rng(3).random((200, 2))
        D = np.array([T.distance(P, p) for p in P])
        X = FiniteMetricSpace(tuple(range(200)), D, 0)
        B = restricted_ball(X, 7, 0.5)
        assert B.n == int(np.sum(D[7] <= 0.5))
        assert B.labels[B.base] == 7


class TestQuotientByZero:
    def test_nondegenerate_identity(self):
        X = line([0, 1, 2])
        q = quotient_by_zero(X)
        assert q.space.n == 3 and list(q.classes) == [0, 1, 2]

    def test_one_zero_pair(self):
        D = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
        q = quotient_by_zero(SemiMetricSample((0, 1, 2), D, 1))
        assert q.space.n == 2 and list(q.classes) == [0, 0, 1] and q.space.base == 0

    def test_inconsistent_merge_raises(self):
        D = np.array([[0, 0, 1], [0, 0, 2], [1, 2, 0]], dtype=float)
        with pytest.raises(ToleranceError):
            quotient_by_zero(SemiMetricSample((0, 1, 2), D))

    @given(arrays(np.float64, st.integers(2, 15), elements=st.sampled_from([0.0, 0.5, 1.0, 2.0])))
    def test_quotient_is_nondegenerate(self, xs):
        q = quotient_by_zero(line(xs), tol=1e-6)
        assert not check_metric_axioms(q.space, tol=1e-6).degenerate_pairs
        assert q.space.n == len(set(xs.tolist()))
