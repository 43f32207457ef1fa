"""Finite metric spaces, semi-metrics and Gromov-Hausdorff bookkeeping.

Gromov-Hausdorff distances are never searched for. Upper bounds come from an
explicit correspondence or map supplied by the caller, which is tractable and
is all the collapse experiments need.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, MalformedInputError, ToleranceError

AXIOM_TOL = 1e-9
QUOTIENT_TOL = 1e-6


def _as_matrix(dist) -> np.ndarray:
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise MalformedInputError(f"distance matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise MalformedInputError("distance matrix has non-finite entries")
    if np.any(D < 0):
        raise MalformedInputError("distance matrix has negative entries")
    return D


@dataclass(frozen=True)
class SemiMetricSample:
    """Labeled points with a symmetric, zero-diagonal distance matrix.

    Distinct points at distance zero are allowed. The triangle inequality is
    not enforced on construction (it costs O(n^3)); use
    :func:`check_metric_axioms`.
    """

    labels: tuple
    dist: np.ndarray
    base: int | None = None

    def __post_init__(self):
        D = _as_matrix(self.dist)
        labels = tuple(self.labels) if self.labels is not None else tuple(range(D.shape[0]))
        if len(labels) != D.shape[0]:
            raise MalformedInputError(f"{len(labels)} labels for {D.shape[0]} points")
        if not np.allclose(D, D.T, rtol=0.0, atol=AXIOM_TOL):
            raise MalformedInputError("distance matrix is not symmetric")
        if np.any(np.abs(np.diag(D)) > AXIOM_TOL):
            raise MalformedInputError("distance matrix has nonzero diagonal")
        if self.base is not None and not 0 <= self.base < D.shape[0]:
            raise MalformedInputError(f"base index {self.base} out of range")
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        D.setflags(write=False)
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __len__(self) -> int:
        return self.n

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def subspace(self, indices: Sequence[int], base: int | None = None):
        idx = np.asarray(indices, dtype=int)
        return type(self)(tuple(self.labels[i] for i in idx), self.dist[np.ix_(idx, idx)], base)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {"labels": [_jsonable(x) for x in self.labels],
                "dist": self.dist.tolist(), "base": self.base}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict):
        try:
            return cls(tuple(_hashable(x) for x in data["labels"]), data["dist"], data.get("base"))
        except KeyError as exc:
            raise MalformedInputError(f"missing field {exc}") from None

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([str(x) for x in self.labels])
        for row in self.dist:
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


class FiniteMetricSpace(SemiMetricSample):
    """A :class:`SemiMetricSample` intended to be nondegenerate."""


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _hashable(x):
    if isinstance(x, list):
        return tuple(_hashable(y) for y in x)
    return x


def euclidean_space(points, labels=None, base: int | None = None) -> FiniteMetricSpace:
    """Finite subspace of Euclidean space spanned by the rows of ``points``."""
    from scipy.spatial.distance import cdist

    P = np.atleast_2d(np.asarray(points, dtype=float))
    if labels is None:
        labels = tuple(range(P.shape[0]))
    return FiniteMetricSpace(tuple(labels), cdist(P, P), base)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------

@dataclass
class MetricAxiomReport:
    symmetric: bool
    zero_diag: bool
    triangle_violations: list = field(default_factory=list)
    degenerate_pairs: list = field(default_factory=list)
    n_triangle_violations: int = 0
    max_triangle_excess: float = 0.0

    @property
    def is_semimetric(self) -> bool:
        return self.symmetric and self.zero_diag and self.n_triangle_violations == 0

    @property
    def is_metric(self) -> bool:
        return self.is_semimetric and not self.degenerate_pairs


def check_metric_axioms(D, tol: float = AXIOM_TOL, max_report: int = 1000) -> MetricAxiomReport:
    """Check symmetry, zero diagonal, triangle inequality and nondegeneracy.

    ``D`` is a sample object or a raw square matrix. Triangle violations are
    triples ``(i, j, k, excess)`` with ``d(i,j) > d(i,k) + d(k,j) + tol``;
    degenerate pairs are ``(i, j)``, ``i < j``, with ``d(i,j) <= tol``.
    """
    M = _as_matrix(D.dist if isinstance(D, SemiMetricSample) else D)
    n = M.shape[0]
    symmetric = bool(np.all(np.abs(M - M.T) <= tol))
    zero_diag = bool(np.all(np.abs(np.diag(M)) <= tol))
    violations = []
    count = 0
    worst = 0.0
    for k in range(n):
        excess = M - (M[:, k][:, None] + M[k, :][None, :])
        bad = excess > tol
        c = int(bad.sum())
        if c:
            count += c
            worst = max(worst, float(excess[bad].max()))
            if len(violations) < max_report:
                for i, j in zip(*np.nonzero(bad)):
                    violations.append((int(i), int(j), k, float(excess[i, j])))
                    if len(violations) >= max_report:
                        break
    iu, ju = np.triu_indices(n, 1)
    zero = M[iu, ju] <= tol
    degenerate = [(int(i), int(j)) for i, j in zip(iu[zero], ju[zero])]
    return MetricAxiomReport(symmetric, zero_diag, violations, degenerate, count, worst)


# ---------------------------------------------------------------------------
# Hausdorff and Gromov-Hausdorff bounds
# ---------------------------------------------------------------------------

def _index_set(A, n: int, name: str) -> np.ndarray:
    idx = np.unique(np.asarray(list(A), dtype=int))
    if idx.size == 0:
        raise DomainError(f"{name} is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise MalformedInputError(f"{name} has out-of-range indices")
    return idx


def hausdorff_distance(space: SemiMetricSample, A: Iterable[int], B: Iterable[int]) -> float:
    """Hausdorff distance between two index subsets of one finite space."""
    a = _index_set(A, space.n, "A")
    b = _index_set(B, space.n, "B")
    block = space.dist[np.ix_(a, b)]
    return float(max(block.min(axis=1).max(), block.min(axis=0).max()))


@dataclass(frozen=True)
class Correspondence:
    """Total-in-both-directions relation between ``X`` and ``Y`` indices."""

    pairs: frozenset
    n_x: int
    n_y: int

    def __post_init__(self):
        pairs = frozenset((int(i), int(j)) for i, j in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        xs = {i for i, _ in pairs}
        ys = {j for _, j in pairs}
        if any(not 0 <= i < self.n_x for i in xs) or any(not 0 <= j < self.n_y for j in ys):
            raise MalformedInputError("correspondence index out of range")
        if len(xs) != self.n_x or len(ys) != self.n_y:
            raise DomainError(
                f"correspondence is not total: covers {len(xs)}/{self.n_x} of X "
                f"and {len(ys)}/{self.n_y} of Y")

    @classmethod
    def identity(cls, n: int) -> "Correspondence":
        return cls(frozenset((i, i) for i in range(n)), n, n)

    @classmethod
    def from_map(cls, f: Sequence[int], n_y: int) -> "Correspondence":
        """Graph of a surjective map ``X -> Y``."""
        return cls(frozenset((i, int(j)) for i, j in enumerate(f)), len(f), n_y)

    def arrays(self):
        ordered = sorted(self.pairs)
        return (np.array([i for i, _ in ordered], dtype=int),
                np.array([j for _, j in ordered], dtype=int))


@dataclass(frozen=True)
class CorrespondenceBound:
    distortion: float
    gh_upper: float


def correspondence_distortion(X: SemiMetricSample, Y: SemiMetricSample,
                              R: Correspondence) -> CorrespondenceBound:
    """Distortion of ``R``; half of it bounds the Gromov-Hausdorff distance."""
    if R.n_x != X.n or R.n_y != Y.n:
        raise DomainError("correspondence sizes do not match the spaces")
    I, J = R.arrays()
    dis = float(np.abs(X.dist[np.ix_(I, I)] - Y.dist[np.ix_(J, J)]).max())
    return CorrespondenceBound(dis, 0.5 * dis)


@dataclass(frozen=True)
class EpsIsometryDefect:
    distortion: float
    surjectivity_defect: float

    @property
    def eps(self) -> float:
        """Smallest eps (in the closed sense) for which the map is an eps-isometry."""
        return max(self.distortion, self.surjectivity_defect)

    @property
    def gh_upper(self) -> float:
        return 2.0 * self.eps


def eps_isometry_defect(f: Sequence[int], X: SemiMetricSample,
                        Y: SemiMetricSample) -> EpsIsometryDefect:
    """Distortion and image-density defect of an index map ``f: X -> Y``."""
    f = np.asarray(f, dtype=int)
    if f.shape != (X.n,):
        raise MalformedInputError(f"map must send all {X.n} points of X, got shape {f.shape}")
    if f.size and (f.min() < 0 or f.max() >= Y.n):
        raise MalformedInputError("map index out of range")
    dis = float(np.abs(X.dist - Y.dist[np.ix_(f, f)]).max()) if X.n else 0.0
    image = np.unique(f)
    surj = float(Y.dist[:, image].min(axis=1).max())
    return EpsIsometryDefect(dis, surj)


def covering_number(X: SemiMetricSample, eps: float, R: float) -> int:
    """Greedy count of ``2*eps``-balls covering the ball ``B_R(base)``.

    Centers are taken from the sample points in order of distance to the
    base point (ties by index).
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if X.base is None:
        raise DomainError("covering_number needs a base point")
    d0 = X.dist[X.base]
    ball = np.nonzero(d0 <= R)[0]
    order = ball[np.lexsort((ball, d0[ball]))]
    covered = np.zeros(X.n, dtype=bool)
    count = 0
    for c in order:
        if covered[c]:
            continue
        count += 1
        covered |= X.dist[c] <= 2.0 * eps
    return count


def restricted_ball(X: SemiMetricSample, center: int, R: float):
    """Points within ``R`` of ``center`` with the restricted metric, based at ``center``."""
    if R <= 0:
        raise DomainError("radius must be positive")
    idx = np.nonzero(X.dist[center] <= R)[0]
    return X.subspace(idx, base=int(np.searchsorted(idx, center)))


@dataclass(frozen=True)
class Quotient:
    space: FiniteMetricSpace
    classes: np.ndarray  # class index of every original point
    representatives: np.ndarray


def quotient_by_zero(D: SemiMetricSample, tol: float = QUOTIENT_TOL) -> Quotient:
    """Identify points at distance ``<= tol`` (transitively) and return the quotient.

    Raises :class:`ToleranceError` when two classes see each other at
    distances differing by more than ``2*tol``: the merge would not be
    well defined.
    """
    M = D.dist
    n = M.shape[0]
    adj = csr_matrix(M <= tol)
    n_cls, labels = connected_components(adj, directed=False)
    # renumber classes by first occurrence
    first = np.full(n_cls, n, dtype=int)
    np.minimum.at(first, labels, np.arange(n))
    order = np.argsort(first, kind="stable")
    remap = np.empty(n_cls, dtype=int)
    remap[order] = np.arange(n_cls)
    classes = remap[labels]
    reps = first[order]
    if n_cls < n:
        perm = np.argsort(classes, kind="stable")
        S = M[np.ix_(perm, perm)]
        starts = np.searchsorted(classes[perm], np.arange(n_cls))
        lo = np.minimum.reduceat(np.minimum.reduceat(S, starts, axis=0), starts, axis=1)
        hi = np.maximum.reduceat(np.maximum.reduceat(S, starts, axis=0), starts, axis=1)
        spread = hi - lo
        off = ~np.eye(n_cls, dtype=bool)
        bad = np.argwhere((spread > 2 * tol) & off)
        if bad.size:
            a, b = bad[0]
            raise ToleranceError(
                f"classes {int(a)} and {int(b)} disagree by {spread[a, b]:.3g} > 2*tol "
                f"({bad.shape[0] // 2} offending class pairs)")
    Q = M[np.ix_(reps, reps)]
    labels_out = tuple(D.labels[r] for r in reps)
    base = None if D.base is None else int(classes[D.base])
    return Quotient(FiniteMetricSpace(labels_out, Q, base), classes, reps)
