"""Holonomic spaces ``(R^k, H, L)`` and their metrics.

``H`` is either a finite list of orthogonal matrices or a one-parameter
rotation circle ``theta -> R_theta`` in a 2-plane. ``L`` is a group-norm on
``H``. The holonomic metric is

    d_L(u, v) = inf_a sqrt(L(a)^2 + ||u - a v||^2).

Infima over circles use :func:`holonomy_lab._optimize.grid_minimize`
(2048-point seed grid, golden-section refinement to 1e-10).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ._optimize import GRID_SIZE, grid_minimize
from .errors import DomainError, MalformedInputError, NonCauchyWarning, ToleranceError
from .metric_core import SemiMetricSample
from .quotients import (
    CircleSO2, FiniteList, FullSO, OrthSubgroup, ProductGroup, Trivial,
    cyclic_group, op_norm, sign_group,
)

ORTH_TOL = 1e-9


def wrap_angle(theta):
    """Map angles to ``(-pi, pi]``."""
    t = np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(t == -np.pi, np.pi, t)


# ---------------------------------------------------------------------------
# group norms on circles
# ---------------------------------------------------------------------------

class CircleNorm:
    """A group-norm on ``SO(2)`` as a function of the rotation angle."""

    def __call__(self, theta) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def scaled(self, factor: float) -> "CircleNorm":
        return ScaledNorm(self, factor)

    @property
    def sup(self) -> float:
        """Largest value over the circle (grid estimate)."""
        return float(self(np.linspace(-np.pi, np.pi, 4097)).max())


@dataclass(frozen=True)
class SphereLengthNorm(CircleNorm):
    """Length norm of the round 2-sphere of radius ``radius``.

    A loop enclosing area ``A`` rotates the fiber by ``A`` (mod ``2*pi``), and
    the shortest such loops are circles, of length ``sqrt(A (4 pi - A))``
    at unit radius. With ``phi`` the angular distance of the rotation to
    the identity (``0 <= phi <= pi``) this gives ``r sqrt(phi (4 pi - phi))``.
    """

    radius: float = 1.0

    def __call__(self, theta):
        phi = np.abs(wrap_angle(theta))
        return self.radius * np.sqrt(phi * (4 * np.pi - phi))

    def descriptor(self):
        return {"kind": "sphere", "radius": self.radius}

    @property
    def sup(self):
        return self.radius * np.sqrt(3.0) * np.pi


@dataclass(frozen=True)
class ScaledNorm(CircleNorm):
    base: CircleNorm
    factor: float

    def __call__(self, theta):
        return self.factor * self.base(theta)

    def descriptor(self):
        d = dict(self.base.descriptor())
        d["scale"] = d.get("scale", 1.0) * self.factor
        return d

    def scaled(self, factor):
        return ScaledNorm(self.base, self.factor * factor)

    @property
    def sup(self):
        return self.factor * self.base.sup


class TableNorm(CircleNorm):
    """Norm given by samples ``(theta, L)``, linearly interpolated and symmetrized."""

    def __init__(self, table):
        T = np.asarray(table, dtype=float)
        if T.ndim != 2 or T.shape[1] != 2:
            raise MalformedInputError("norm_table must be a list of [theta, L] pairs")
        phi = np.abs(wrap_angle(T[:, 0]))
        order = np.argsort(phi)
        self.phi = phi[order]
        self.values = T[order, 1]
        if self.phi[0] != 0.0:
            self.phi = np.concatenate([[0.0], self.phi])
            self.values = np.concatenate([[0.0], self.values])

    def __call__(self, theta):
        return np.interp(np.abs(wrap_angle(theta)), self.phi, self.values)

    def descriptor(self):
        return {"kind": "table", "table": np.stack([self.phi, self.values], 1).tolist()}


def norm_from_descriptor(d: dict) -> CircleNorm:
    kind = d.get("kind")
    if kind == "sphere":
        base: CircleNorm = SphereLengthNorm(float(d.get("radius", 1.0)))
    elif kind == "table":
        base = TableNorm(d["table"])
    else:
        raise MalformedInputError(f"unknown circle norm kind {kind!r}")
    scale = float(d.get("scale", 1.0))
    return base if scale == 1.0 else base.scaled(scale)


# ---------------------------------------------------------------------------
# groups with norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupElementSample:
    matrix: np.ndarray
    norm_value: float

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise MalformedInputError("group element must be a square matrix")
        if not np.allclose(M @ M.T, np.eye(M.shape[0]), atol=ORTH_TOL):
            raise DomainError("group element is not orthogonal")
        if self.norm_value < 0:
            raise DomainError("group-norm values are nonnegative")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "norm_value", float(self.norm_value))


class FiniteNormedGroup:
    """Finite group given by its elements, identity included, closed under inverses."""

    def __init__(self, elements: Sequence[GroupElementSample]):
        if not elements:
            raise DomainError("a group needs at least the identity")
        self.elements = tuple(elements)
        self.matrices = np.stack([e.matrix for e in self.elements])
        self.norms = np.array([e.norm_value for e in self.elements])
        self.k = self.matrices.shape[1]
        if not np.any(np.all(np.abs(self.matrices - np.eye(self.k)) <= ORTH_TOL, axis=(1, 2))):
            raise DomainError("element list must contain the identity")
        self._inverse = self._index_of(np.transpose(self.matrices, (0, 2, 1)))
        if np.any(self._inverse < 0):
            raise DomainError("element list is not closed under inverses")

    def _index_of(self, mats: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        flat = self.matrices.reshape(len(self.matrices), -1)
        d = cdist(mats.reshape(len(mats), -1), flat)
        idx = d.argmin(axis=1)
        return np.where(d[np.arange(len(mats)), idx] <= tol, idx, -1)

    @property
    def identity_index(self) -> int:
        return int(np.argmin(np.abs(self.matrices - np.eye(self.k)).sum(axis=(1, 2))))

    def descriptor(self):
        return {"type": "finite",
                "elements": [{"matrix": e.matrix.tolist(), "norm": e.norm_value} for e in self.elements]}

    @classmethod
    def from_matrices(cls, mats, norms):
        return cls([GroupElementSample(m, c) for m, c in zip(mats, norms)])


class CircleNormedGroup:
    """Rotations ``R_theta`` in the plane spanned by orthonormal ``basis`` columns."""

    def __init__(self, k: int, norm: CircleNorm, basis=None):
        self.k = int(k)
        if basis is None:
            basis = np.eye(self.k)[:, :2]
        B = np.asarray(basis, dtype=float)
        if B.shape != (self.k, 2) or not np.allclose(B.T @ B, np.eye(2), atol=ORTH_TOL):
            raise MalformedInputError("circle basis must be k x 2 with orthonormal columns")
        self.basis = B
        self.norm = norm
        self._P = B @ B.T
        self._J = np.outer(B[:, 1], B[:, 0]) - np.outer(B[:, 0], B[:, 1])

    @classmethod
    def in_plane(cls, k: int, plane: tuple[int, int], norm: CircleNorm):
        B = np.zeros((k, 2))
        B[plane[0], 0] = 1.0
        B[plane[1], 1] = 1.0
        return cls(k, norm, B)

    def matrix(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=float)[..., None, None]
        return np.eye(self.k) + (np.cos(t) - 1.0) * self._P + np.sin(t) * self._J

    def angle_of(self, g) -> np.ndarray:
        g = np.asarray(g)
        e1, e2 = self.basis[:, 0], self.basis[:, 1]
        c = np.einsum("i,...ij,j->...", e1, g, e1) + np.einsum("i,...ij,j->...", e2, g, e2)
        s = np.einsum("i,...ij,j->...", e2, g, e1) - np.einsum("i,...ij,j->...", e1, g, e2)
        return np.arctan2(s, c)

    def coordinate_plane(self) -> tuple[int, int] | None:
        idx = [int(np.argmax(np.abs(self.basis[:, c]))) for c in range(2)]
        B = np.zeros_like(self.basis)
        B[idx[0], 0] = np.sign(self.basis[idx[0], 0])
        B[idx[1], 1] = np.sign(self.basis[idx[1], 1])
        return tuple(idx) if np.allclose(B, self.basis, atol=ORTH_TOL) else None

    def descriptor(self):
        return {"type": "circle", "basis": self.basis.tolist(), "norm": self.norm.descriptor()}


@dataclass(frozen=True)
class HolonomicSpace:
    """Holonomic space on ``R^k`` with the standard inner-product norm."""

    k: int
    group: FiniteNormedGroup | CircleNormedGroup

    def __post_init__(self):
        if self.group.k != self.k:
            raise MalformedInputError(f"group acts on R^{self.group.k}, space is R^{self.k}")

    @property
    def is_trivial(self) -> bool:
        return isinstance(self.group, FiniteNormedGroup) and len(self.group.elements) == 1

    def scaled(self, factor: float) -> "HolonomicSpace":
        """Same group, norm multiplied by ``factor``."""
        g = self.group
        if isinstance(g, FiniteNormedGroup):
            return HolonomicSpace(self.k, FiniteNormedGroup.from_matrices(g.matrices, g.norms * factor))
        return HolonomicSpace(self.k, CircleNormedGroup(self.k, g.norm.scaled(factor), g.basis))

    def to_dict(self) -> dict:
        return {"k": self.k, "group": self.group.descriptor()}

    @classmethod
    def from_dict(cls, d: dict) -> "HolonomicSpace":
        try:
            k = int(d["k"])
            g = d["group"]
            if g["type"] == "finite":
                elems = [GroupElementSample(e["matrix"], e["norm"]) for e in g["elements"]]
                return cls(k, FiniteNormedGroup(elems))
            if g["type"] == "circle":
                norm = norm_from_descriptor(g["norm"]) if "norm" in g else TableNorm(g["norm_table"])
                if "basis" in g:
                    return cls(k, CircleNormedGroup(k, norm, g["basis"]))
                return cls(k, CircleNormedGroup.in_plane(k, tuple(g.get("plane", (0, 1))), norm))
        except KeyError as exc:
            raise MalformedInputError(f"holonomic space descriptor missing field {exc}") from None
        raise MalformedInputError(f"unknown group type {g.get('type')!r}")


def trivial_space(k: int) -> HolonomicSpace:
    return HolonomicSpace(k, FiniteNormedGroup([GroupElementSample(np.eye(k), 0.0)]))


def sign_space(k: int, c: float) -> HolonomicSpace:
    """``H = {id, -id}`` with ``L(-id) = c``."""
    return HolonomicSpace(k, FiniteNormedGroup.from_matrices([np.eye(k), -np.eye(k)], [0.0, c]))


def sphere_space(radius: float = 1.0) -> HolonomicSpace:
    """Fiber of the tangent bundle of the round sphere of the given radius."""
    return HolonomicSpace(2, CircleNormedGroup(2, SphereLengthNorm(radius)))


# ---------------------------------------------------------------------------
# group-norm axioms
# ---------------------------------------------------------------------------

@dataclass
class GroupNormReport:
    identity_zero: bool
    positive: bool
    symmetric: bool
    subadditive: bool
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.identity_zero and self.positive and self.symmetric and self.subadditive


def check_group_norm(space: HolonomicSpace, tol: float = 1e-9, n_grid: int = 360) -> GroupNormReport:
    """Group-norm axioms on all element pairs (finite) or a theta grid (circle).

    The circle grid is ``2*pi*m/n_grid`` so every sum of grid angles is again
    on the grid.
    """
    g = space.group
    viol = []
    if isinstance(g, FiniteNormedGroup):
        e = g.identity_index
        L = g.norms
        ident = abs(L[e]) <= tol
        if not ident:
            viol.append(("identity", e, float(L[e])))
        pos = [i for i in range(len(L)) if i != e and L[i] <= tol]
        viol += [("positivity", i, float(L[i])) for i in pos]
        sym_bad = np.nonzero(np.abs(L - L[g._inverse]) > tol)[0]
        viol += [("symmetry", int(i), float(L[i] - L[g._inverse[i]])) for i in sym_bad]
        prods = np.einsum("aij,bjk->abik", g.matrices, g.matrices).reshape(-1, g.k, g.k)
        idx = g._index_of(prods)
        n = len(L)
        A, B = np.divmod(np.arange(n * n), n)
        if np.any(idx < 0):
            raise DomainError("element list is not closed under products")
        excess = L[idx] - L[A] - L[B]
        sub_bad = np.nonzero(excess > tol)[0]
        viol += [("subadditivity", (int(A[t]), int(B[t])), float(excess[t])) for t in sub_bad]
        return GroupNormReport(ident, not pos, sym_bad.size == 0, sub_bad.size == 0, viol)

    theta = 2 * np.pi * np.arange(n_grid) / n_grid
    L = g.norm(theta)
    ident = abs(L[0]) <= tol
    if not ident:
        viol.append(("identity", 0.0, float(L[0])))
    pos_bad = np.nonzero(L[1:] <= tol)[0] + 1
    viol += [("positivity", float(theta[i]), float(L[i])) for i in pos_bad]
    inv = (-np.arange(n_grid)) % n_grid
    sym_bad = np.nonzero(np.abs(L - L[inv]) > tol)[0]
    viol += [("symmetry", float(theta[i]), float(L[i] - L[inv[i]])) for i in sym_bad]
    s = (np.arange(n_grid)[:, None] + np.arange(n_grid)[None, :]) % n_grid
    excess = L[s] - L[:, None] - L[None, :]
    bad = np.argwhere(excess > tol)
    viol += [("subadditivity", (float(theta[a]), float(theta[b])), float(excess[a, b])) for a, b in bad[:100]]
    return GroupNormReport(ident, pos_bad.size == 0, sym_bad.size == 0, bad.size == 0, viol)


# ---------------------------------------------------------------------------
# holonomic distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolonomicDistance:
    value: float
    element: np.ndarray
    norm_value: float


def _circle_objective(g: CircleNormedGroup, U: np.ndarray, V: np.ndarray):
    """Per-pair coefficients of ``theta -> L^2 + ||u - R_theta v||^2``."""
    base = (U ** 2).sum(1) + (V ** 2).sum(1) - 2 * (U * V).sum(1)
    b = np.einsum("ni,ij,nj->n", U, g._P, V)
    c = np.einsum("ni,ij,nj->n", U, g._J, V)

    def f(theta, idx):
        return (g.norm(theta) ** 2 + base[idx, None]
                - 2 * (np.cos(theta) - 1.0) * b[idx, None] - 2 * np.sin(theta) * c[idx, None])

    return f


def _circle_pairs(g: CircleNormedGroup, U, V, n_grid=GRID_SIZE):
    f = _circle_objective(g, U, V)
    theta, val = grid_minimize(f, -np.pi, np.pi, len(U), n_grid=n_grid, include=(0.0,))
    return np.sqrt(np.maximum(val, 0.0)), theta


def holonomic_distance(space: HolonomicSpace, u, v) -> HolonomicDistance:
    """``d_L(u, v)`` together with a minimizing group element."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != space.k or v.size != space.k:
        raise MalformedInputError(f"vectors must have length {space.k}")
    g = space.group
    if isinstance(g, FiniteNormedGroup):
        order = np.argsort(g.norms, kind="stable")
        diffs = u[None] - np.einsum("gij,j->gi", g.matrices[order], v)
        vals = g.norms[order] ** 2 + (diffs ** 2).sum(1)
        best = int(np.argmin(vals))
        j = order[best]
        return HolonomicDistance(float(np.sqrt(vals[best])), g.matrices[j], float(g.norms[j]))
    d, theta = _circle_pairs(g, u[None], v[None])
    t = float(theta[0])
    return HolonomicDistance(float(d[0]), g.matrix(t), float(g.norm(t)))


def holonomic_distance_matrix(space: HolonomicSpace, U, V=None) -> np.ndarray:
    """All-pairs ``d_L`` between rows of ``U`` and rows of ``V`` (default ``U``)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    sym = V is None
    V = U if sym else np.atleast_2d(np.asarray(V, dtype=float))
    g = space.group
    if isinstance(g, FiniteNormedGroup):
        best = None
        for a, L in zip(g.matrices, g.norms):
            sq = L ** 2 + cdist(U, V @ a.T, "sqeuclidean")
            best = sq if best is None else np.minimum(best, sq)
        D = np.sqrt(best)
    else:
        if sym:
            iu, ju = np.triu_indices(len(U), 1)
        else:
            iu, ju = (x.ravel() for x in np.meshgrid(np.arange(len(U)), np.arange(len(V)), indexing="ij"))
        d, _ = _circle_pairs(g, U[iu], V[ju])
        D = np.zeros((len(U), len(V)))
        D[iu, ju] = d
        if sym:
            D[ju, iu] = d
    if sym:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


def holonomic_metric_sample(space: HolonomicSpace, points, base: int | None = 0) -> SemiMetricSample:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    labels = tuple(tuple(np.round(p, 12)) for p in P)
    return SemiMetricSample(labels, holonomic_distance_matrix(space, P), base)


# ---------------------------------------------------------------------------
# holonomic property and radii
# ---------------------------------------------------------------------------

def _sample_elements(space: HolonomicSpace, n_theta: int = 256):
    g = space.group
    if isinstance(g, FiniteNormedGroup):
        return g.matrices, g.norms
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return g.matrix(theta), g.norm(theta)


@dataclass(frozen=True)
class HolonomicPropertyResult:
    holds: bool
    counterexample: tuple | None = None  # (v, w, a, excess)


def check_holonomic_property(space: HolonomicSpace, u, R: float, samples: int = 2000,
                             seed: int = 0, tol: float = 1e-12) -> HolonomicPropertyResult:
    """Test ``||v - w||^2 - ||a v - w||^2 <= L(a)^2`` for random ``v, w`` in ``B_R(u)``."""
    if R <= 0:
        raise DomainError("radius must be positive")
    u = np.asarray(u, dtype=float).ravel()
    rng = np.random.default_rng(seed)

    def ball(n):
        x = rng.standard_normal((n, space.k))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        r = R * rng.random(n) ** (1.0 / space.k)
        return u + x * r[:, None]

    V, W = ball(samples), ball(samples)
    A, L = _sample_elements(space)
    lhs = ((V - W) ** 2).sum(1)[None] - ((np.einsum("aij,nj->ani", A, V) - W[None]) ** 2).sum(2)
    excess = lhs - L[:, None] ** 2
    a, n = np.unravel_index(np.argmax(excess), excess.shape)
    if excess[a, n] > tol:
        return HolonomicPropertyResult(False, (V[n], W[n], A[a], float(excess[a, n])))
    return HolonomicPropertyResult(True)


def _ratio_inf(space: HolonomicSpace, power: float) -> float:
    """``inf_a L(a) / ||a - id||^power`` over non-identity elements."""
    g = space.group
    if isinstance(g, FiniteNormedGroup):
        moving = op_norm(g.matrices - np.eye(g.k))
        keep = moving > ORTH_TOL
        if not np.any(keep):
            return np.inf
        return float(np.min(g.norms[keep] / moving[keep] ** power))

    def f(theta, idx):
        return g.norm(theta) / np.abs(2 * np.sin(theta / 2)) ** power

    best = np.inf
    for lo, hi in ((1e-9, np.pi), (-np.pi, -1e-9)):
        _, val = grid_minimize(f, lo, hi, 1)
        best = min(best, float(val[0]))
    return best


def convexity_radius(space: HolonomicSpace) -> float:
    """``inf_a L(a) / ||a - id||_op``; ``inf`` for the trivial group."""
    return _ratio_inf(space, 1.0)


def holonomy_radius_zero_upper(space: HolonomicSpace) -> float:
    """Upper bound for the holonomy radius at the origin (equal to the convexity radius)."""
    return _ratio_inf(space, 1.0)


def holonomy_radius_at_zero(space: HolonomicSpace) -> float:
    """Holonomy radius at the origin for the Euclidean norm.

    For ``v, w`` in ``B_R(0)`` the supremum of ``||v-w||^2 - ||av-w||^2`` is
    ``2 R^2 ||a - id||_op``, so the radius is ``inf_a L(a)/sqrt(2||a - id||)``.
    """
    return _ratio_inf(space, 0.5) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# sequences, limits and wane sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolonomicSequence:
    """``i -> (R^k, H, L_i)`` for ``i = 1, 2, ...`` with a shared group."""

    k: int
    space_at: Callable[[int], HolonomicSpace]
    description: str = ""

    @classmethod
    def rescaled(cls, space: HolonomicSpace) -> "HolonomicSequence":
        """``L_i = L / i``: tangent fibers of the metrics ``g / i^2``."""
        return cls(space.k, lambda i: space.scaled(1.0 / i), "L/i")

    @classmethod
    def constant(cls, space: HolonomicSpace) -> "HolonomicSequence":
        return cls(space.k, lambda i: space, "constant")


@dataclass
class LimitSemimetric:
    sample: SemiMetricSample
    table: list          # (i, sup |d_i - d_prev|)
    converged: bool
    indices: list


def default_schedule(i_max: int) -> list[int]:
    """``1, 2, 4, ...`` up to ``i_max``, always ending at ``i_max``."""
    out = []
    i = 1
    while i < i_max:
        out.append(i)
        i *= 2
    out.append(i_max)
    return out


def limit_semimetric(seq: HolonomicSequence, points, i_max: int, tol: float = 1e-6,
                     indices: Sequence[int] | None = None) -> LimitSemimetric:
    """Evaluate ``d_{L_i}`` on all pairs along a schedule of indices up to ``i_max``.

    The last matrix is returned as the limit estimate. When the last
    successive sup-difference exceeds ``tol`` a :class:`NonCauchyWarning`
    is emitted and ``converged`` is false.
    """
    if i_max < 1:
        raise DomainError("i_max must be >= 1")
    sched = list(indices) if indices is not None else default_schedule(i_max)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    prev = None
    table = []
    for i in sched:
        D = holonomic_distance_matrix(seq.space_at(i), P)
        if prev is not None:
            table.append((i, float(np.abs(D - prev).max())))
        prev = D
    converged = bool(table) and table[-1][1] <= tol
    if not converged:
        warnings.warn(f"distance matrices not Cauchy within {tol:g}: {table[-3:]}", NonCauchyWarning,
                      stacklevel=2)
    labels = tuple(tuple(np.round(p, 12)) for p in P)
    origin = int(np.argmin(np.linalg.norm(P, axis=1)))
    return LimitSemimetric(SemiMetricSample(labels, prev, origin), table, converged, sched)


@dataclass
class WaneEstimate:
    """Elements ``a`` with ``min_{i <= i_max} L_i(a) <= threshold``.

    This over-approximates the wane set; it shrinks toward it as the
    threshold goes to zero and ``i_max`` grows.
    """

    elements: np.ndarray           # stack of k x k matrices
    certificates: list             # (i, a_i, L_i(a_i))
    threshold: float
    i_max: int

    def __len__(self):
        return len(self.elements)


def wane_set_estimate(seq: HolonomicSequence, threshold: float, i_max: int,
                      n_grid: int = 4096) -> WaneEstimate:
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    first = seq.space_at(1).group
    if isinstance(first, FiniteNormedGroup):
        mats = first.matrices
        norm_rows = lambda s: s.group.norms  # noqa: E731
    else:
        theta = wrap_angle(2 * np.pi * np.arange(n_grid) / n_grid)
        mats = first.matrix(theta)
        norm_rows = lambda s: s.group.norm(theta)  # noqa: E731
    found = np.full(len(mats), -1)
    value = np.full(len(mats), np.inf)
    for i in range(1, i_max + 1):
        L = norm_rows(seq.space_at(i))
        hit = (found < 0) & (L <= threshold)
        found[hit] = i
        value[hit] = L[hit]
        if np.all(found > 0):
            break
    keep = np.nonzero(found > 0)[0]
    certs = [(int(found[j]), mats[j], float(value[j])) for j in keep]
    return WaneEstimate(mats[keep], certs, threshold, i_max)


# ---------------------------------------------------------------------------
# closure and classification
# ---------------------------------------------------------------------------

def _cluster(mats: np.ndarray, tol: float) -> np.ndarray:
    """Greedy representatives of clusters of radius ``tol`` in operator norm."""
    if len(mats) == 0:
        return mats
    k = mats.shape[1]
    flat = mats.reshape(len(mats), -1)
    tree = cKDTree(flat)
    assigned = np.zeros(len(mats), dtype=bool)
    reps = []
    for i in range(len(mats)):
        if assigned[i]:
            continue
        reps.append(i)
        nb = np.array(tree.query_ball_point(flat[i], np.sqrt(k) * tol), dtype=int)
        nb = nb[~assigned[nb]]
        close = nb[op_norm(mats[nb] - mats[i]) <= tol]
        assigned[close] = True
        assigned[i] = True
    return mats[np.array(reps)]


def _hausdorff_residual(S: np.ndarray, G: OrthSubgroup, n_sample: int = 4096) -> float:
    member = max(G.membership_residual(s) for s in S) if len(S) <= 512 else max(
        G.membership_residual(s) for s in S[np.linspace(0, len(S) - 1, 512).astype(int)])
    if member > 1.0:
        return member
    C = G.sample(n_sample)
    tree = cKDTree(S.reshape(len(S), -1))
    kq = min(8, len(S))
    _, nn = tree.query(C.reshape(len(C), -1), k=kq)
    nn = np.asarray(nn).reshape(len(C), kq)
    cover = op_norm(C[:, None] - S[nn]).min(axis=1).max()
    return float(max(member, cover))


def _complexity(G: OrthSubgroup) -> float:
    if isinstance(G, Trivial):
        return 0.0
    if isinstance(G, FiniteList):
        return 1.0 + len(G.elements) / 1000.0
    if isinstance(G, CircleSO2):
        return 2.0
    if isinstance(G, ProductGroup):
        return _complexity(G.first) + _complexity(G.second) + 0.5
    if isinstance(G, FullSO):
        return 3.0 + G.k
    return 10.0


@dataclass
class WaneClosure:
    group: OrthSubgroup | None
    label: str
    residual: float
    elements: np.ndarray
    unclassified: bool
    residuals: dict
    capped: bool = False


def close_elements(mats: np.ndarray, tol: float, cap: int = 512, max_rounds: int = 8):
    """Close a matrix set under products and inverses, clustering at ``tol``.

    Generation uses at most ``cap`` evenly spaced representatives per side
    of each product round; returns ``(elements, capped)``.
    """
    S = _cluster(np.concatenate([mats, np.transpose(mats, (0, 2, 1))]), tol)
    capped = False
    for _ in range(max_rounds):
        pick = lambda X: X if len(X) <= cap else X[np.linspace(0, len(X) - 1, cap).astype(int)]  # noqa: E731
        A = pick(S)
        prods = np.einsum("aij,bjk->abik", A, A).reshape(-1, S.shape[1], S.shape[2])
        cand = np.concatenate([prods, np.transpose(prods, (0, 2, 1))])
        tree = cKDTree(S.reshape(len(S), -1))
        d, _ = tree.query(cand.reshape(len(cand), -1))
        fresh = cand[d > tol]
        if len(fresh) == 0:
            break
        fresh = _cluster(fresh, tol)
        S = np.concatenate([S, fresh])
        if len(S) > 8 * cap:
            capped = True
            break
    return S, capped


def _moving_coordinates(S: np.ndarray, tol: float) -> list[int]:
    k = S.shape[1]
    dev = np.abs(S - np.eye(k)).max(axis=(0, 2))
    dev = np.maximum(dev, np.abs(S - np.eye(k)).max(axis=(0, 1)))
    return [i for i in range(k) if dev[i] > tol]


def _candidates(S: np.ndarray, tol: float, max_cyclic: int) -> list[OrthSubgroup]:
    k = S.shape[1]
    moving = _moving_coordinates(S, tol)
    cands: list[OrthSubgroup] = [Trivial(k)]
    if k >= 1:
        cands.append(sign_group(k))
    planes = [(i, j) for a, i in enumerate(moving) for j in moving[a + 1:]]
    for plane in planes:
        if 2 <= len(S) <= max_cyclic:
            cands.append(cyclic_group(k, len(S), plane))
        cands.append(CircleSO2(k, plane))
    if k >= 2:
        cands.append(FullSO(k))
    # two-block products split at a coordinate boundary, both blocks moving
    for cut in range(2, k - 1):
        left = [m for m in moving if m < cut]
        right = [m for m in moving if m >= cut]
        if len(left) >= 2 and len(right) >= 2:
            coupled = np.abs(S[:, :cut, cut:]).max() > tol or np.abs(S[:, cut:, :cut]).max() > tol
            if coupled:
                continue
            A = _classify(_cluster(S[:, :cut, :cut], tol), tol, max_cyclic)[0]
            B = _classify(_cluster(S[:, cut:, cut:], tol), tol, max_cyclic)[0]
            if A is not None and B is not None:
                cands.append(ProductGroup(A, B))
    return cands


def _classify(S: np.ndarray, tol: float, max_cyclic: int):
    residuals = {}
    best = None
    for G in _candidates(S, tol, max_cyclic):
        r = _hausdorff_residual(S, G)
        residuals[G.name] = r
        if r < tol and (best is None or (_complexity(G), r) < (_complexity(best[0]), best[1])):
            best = (G, r)
    if best is None:
        return None, min(residuals.values()), residuals
    return best[0], best[1], residuals


def wane_group_closure(est: WaneEstimate, tol: float = 1e-3, cap: int = 512,
                       max_cyclic: int = 24) -> WaneClosure:
    """Close a wane-set estimate into a group and match it against the catalog.

    The catalog holds the trivial group, ``{+-id}``, cyclic groups of order
    ``<= max_cyclic`` and rotation circles in coordinate planes, full
    ``SO(k)`` and two-block products. Residuals are operator-norm Hausdorff
    distances between the closed element set and each candidate; the
    simplest candidate under ``tol`` wins. With no match, ``group`` is
    ``None`` and ``unclassified`` is set.
    """
    if len(est.elements) == 0:
        raise DomainError("wane estimate is empty (it should contain the identity)")
    S, capped = close_elements(est.elements, tol, cap=cap)
    G, r, residuals = _classify(S, tol, max_cyclic)
    if G is None:
        return WaneClosure(None, "unclassified", r, S, True, residuals, capped)
    return WaneClosure(G, G.name, r, S, False, residuals, capped)


# ---------------------------------------------------------------------------
# change of representation
# ---------------------------------------------------------------------------

def normalize_representation(spaces: Sequence[HolonomicSpace], conjugators: Sequence,
                             check_pairs: int = 8, seed: int = 0, tol: float = 1e-9):
    """Conjugate every ``(H_i, L_i)`` by ``phi_i``: ``H -> phi H phi^-1``, ``L~(b) = L(phi^-1 b phi)``.

    Distances satisfy ``d_L~(phi u, phi v) = d_L(u, v)``; this is verified on
    ``check_pairs`` random pairs per space.
    """
    if len(spaces) != len(conjugators):
        raise MalformedInputError("need one conjugator per space")
    rng = np.random.default_rng(seed)
    out = []
    for space, phi in zip(spaces, conjugators):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (space.k, space.k) or not np.allclose(phi @ phi.T, np.eye(space.k), atol=ORTH_TOL):
            raise DomainError("conjugator must be an orthogonal k x k matrix")
        g = space.group
        if isinstance(g, FiniteNormedGroup):
            mats = np.einsum("ij,ajk,lk->ail", phi, g.matrices, phi)
            new = HolonomicSpace(space.k, FiniteNormedGroup.from_matrices(mats, g.norms))
        else:
            new = HolonomicSpace(space.k, CircleNormedGroup(space.k, g.norm, phi @ g.basis))
        U = rng.standard_normal((check_pairs, space.k))
        V = rng.standard_normal((check_pairs, space.k))
        for u, v in zip(U, V):
            a = holonomic_distance(space, u, v).value
            b = holonomic_distance(new, phi @ u, phi @ v).value
            if abs(a - b) > tol * max(1.0, a):
                raise ToleranceError(f"conjugation changed a distance: {a} vs {b}")
        out.append(new)
    return out
