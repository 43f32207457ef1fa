"""Orbit spaces ``R^k / G`` for a small catalog of closed subgroups ``G <= O(k)``.

These are the predicted limit fibers of collapsing bundles. Only the groups
that the collapse examples produce are cataloged: trivial, finite lists,
rotation circles in a coordinate plane, full ``SO(k)`` and block products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.spatial.distance import cdist

from .errors import DomainError, MalformedInputError
from .metric_core import FiniteMetricSpace, SemiMetricSample, quotient_by_zero
from .sampling import ball_grid

ORBIT_MERGE_TOL = 1e-9
CLOSURE_TOL = 1e-9


def op_norm(A: np.ndarray) -> np.ndarray:
    """Spectral norm of a matrix or of each matrix in a stack."""
    A = np.asarray(A, dtype=float)
    return np.linalg.svd(A, compute_uv=False)[..., 0]


def rotation_2d(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def plane_rotation(k: int, plane: tuple[int, int], theta) -> np.ndarray:
    """Rotation by ``theta`` in coordinate plane ``plane`` of ``R^k`` (stack-aware)."""
    theta = np.asarray(theta, dtype=float)
    out = np.broadcast_to(np.eye(k), theta.shape + (k, k)).copy()
    i, j = plane
    c, s = np.cos(theta), np.sin(theta)
    out[..., i, i] = c
    out[..., j, j] = c
    out[..., i, j] = -s
    out[..., j, i] = s
    return out


class OrthSubgroup:
    """Closed subgroup of ``O(k)`` acting linearly on ``R^k``."""

    k: int
    name: str = "group"
    is_finite: bool = False

    def orbit_distance_matrix(self, U, V) -> np.ndarray:
        raise NotImplementedError

    def orbit_distance(self, u, v) -> float:
        """``inf_g ||u - g v||``."""
        u = np.asarray(u, dtype=float).reshape(1, -1)
        v = np.asarray(v, dtype=float).reshape(1, -1)
        self._check_dim(u)
        self._check_dim(v)
        return float(self.orbit_distance_matrix(u, v)[0, 0])

    def nearest(self, g: np.ndarray) -> np.ndarray:
        """An element of the group close to ``g`` in operator norm."""
        raise NotImplementedError

    def membership_residual(self, g: np.ndarray) -> float:
        return float(op_norm(np.asarray(g) - self.nearest(g)))

    def sample(self, n: int) -> np.ndarray:
        """Stack of group elements; all of them for finite groups."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def _check_dim(self, x):
        if x.shape[-1] != self.k:
            raise MalformedInputError(f"expected vectors of length {self.k}, got {x.shape[-1]}")

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


@dataclass(frozen=True, repr=False)
class Trivial(OrthSubgroup):
    k: int
    is_finite = True

    @property
    def name(self):
        return "trivial"

    def orbit_distance_matrix(self, U, V):
        return cdist(np.atleast_2d(U), np.atleast_2d(V))

    def nearest(self, g):
        return np.eye(self.k)

    def sample(self, n=1):
        return np.eye(self.k)[None]

    def descriptor(self):
        return {"type": "trivial", "k": self.k}


class FiniteList(OrthSubgroup):
    is_finite = True

    def __init__(self, elements, label: str | None = None):
        E = np.asarray(elements, dtype=float)
        if E.ndim != 3 or E.shape[1] != E.shape[2]:
            raise MalformedInputError("elements must be a stack of square matrices")
        self.k = E.shape[1]
        self.elements = E
        self.label = label
        self._check_closed()

    @property
    def name(self):
        return self.label or f"finite({len(self.elements)})"

    def _check_closed(self):
        E = self.elements
        flat = E.reshape(len(E), -1)
        if not np.allclose(np.einsum("nij,nkj->nik", E, E), np.eye(self.k), atol=CLOSURE_TOL):
            raise DomainError("finite group elements must be orthogonal")
        prods = np.einsum("aij,bjk->abik", E, E).reshape(-1, self.k * self.k)
        if cdist(prods, flat).min(axis=1).max() > CLOSURE_TOL:
            raise DomainError("element list is not closed under products")
        inv = np.transpose(E, (0, 2, 1)).reshape(len(E), -1)
        if cdist(inv, flat).min(axis=1).max() > CLOSURE_TOL:
            raise DomainError("element list is not closed under inverses")

    def orbit_distance_matrix(self, U, V):
        U = np.atleast_2d(U)
        V = np.atleast_2d(V)
        GV = np.einsum("gij,nj->gni", self.elements, V)
        return np.min([cdist(U, gv) for gv in GV], axis=0)

    def nearest(self, g):
        i = int(np.argmin(op_norm(self.elements - np.asarray(g)[None])))
        return self.elements[i]

    def sample(self, n=None):
        return self.elements

    def descriptor(self):
        return {"type": "finite", "k": self.k, "elements": self.elements.tolist()}


def cyclic_group(k: int, order: int, plane: tuple[int, int] = (0, 1)) -> FiniteList:
    return FiniteList(plane_rotation(k, plane, 2 * np.pi * np.arange(order) / order),
                      label=f"C{order}")


def sign_group(k: int) -> FiniteList:
    """``{id, -id}``."""
    return FiniteList(np.stack([np.eye(k), -np.eye(k)]), label="Z/2")


@dataclass(frozen=True, repr=False)
class CircleSO2(OrthSubgroup):
    """Rotations in the coordinate plane ``plane``, identity elsewhere."""

    k: int
    plane: tuple = (0, 1)

    def __post_init__(self):
        i, j = self.plane
        if not (0 <= i < self.k and 0 <= j < self.k and i != j):
            raise MalformedInputError(f"bad plane {self.plane} for k={self.k}")
        object.__setattr__(self, "plane", (int(i), int(j)))

    @property
    def name(self):
        return "SO(2)" if self.k == 2 else f"SO(2)[{self.plane[0]},{self.plane[1]}]"

    def _split(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mask = np.ones(self.k, dtype=bool)
        mask[list(self.plane)] = False
        return np.linalg.norm(X[:, list(self.plane)], axis=1), X[:, mask]

    def orbit_distance_matrix(self, U, V):
        ru, pu = self._split(U)
        rv, pv = self._split(V)
        sq = (ru[:, None] - rv[None, :]) ** 2
        if pu.shape[1]:
            sq = sq + cdist(pu, pv, "sqeuclidean")
        return np.sqrt(sq)

    def angle_of(self, g):
        i, j = self.plane
        g = np.asarray(g)
        return np.arctan2(g[..., j, i] - g[..., i, j], g[..., i, i] + g[..., j, j])

    def nearest(self, g):
        return plane_rotation(self.k, self.plane, self.angle_of(g))

    def sample(self, n=4096):
        return plane_rotation(self.k, self.plane, 2 * np.pi * np.arange(n) / n)

    def descriptor(self):
        return {"type": "circle", "k": self.k, "plane": list(self.plane)}


@dataclass(frozen=True, repr=False)
class FullSO(OrthSubgroup):
    k: int

    @property
    def name(self):
        return f"SO({self.k})"

    def orbit_distance_matrix(self, U, V):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if self.k == 1:
            return cdist(U, V)
        return np.abs(np.linalg.norm(U, axis=1)[:, None] - np.linalg.norm(V, axis=1)[None, :])

    def nearest(self, g):
        u, _, vt = np.linalg.svd(np.asarray(g, dtype=float))
        d = np.ones(self.k)
        d[-1] = np.sign(np.linalg.det(u @ vt)) or 1.0
        return (u * d) @ vt

    def sample(self, n=4096):
        if self.k == 1:
            return np.eye(1)[None]
        if self.k == 2:
            return rotation_2d(2 * np.pi * np.arange(n) / n)
        from scipy.stats import special_ortho_group

        return special_ortho_group.rvs(self.k, size=n, random_state=0)

    def descriptor(self):
        return {"type": "full_so", "k": self.k}


@dataclass(frozen=True, repr=False)
class ProductGroup(OrthSubgroup):
    """``G1 x G2`` acting block-diagonally on ``R^k1 x R^k2``."""

    first: OrthSubgroup
    second: OrthSubgroup

    @property
    def k(self):
        return self.first.k + self.second.k

    @property
    def name(self):
        return f"{self.first.name}x{self.second.name}"

    @property
    def is_finite(self):
        return self.first.is_finite and self.second.is_finite

    def orbit_distance_matrix(self, U, V):
        U = np.atleast_2d(U)
        V = np.atleast_2d(V)
        k1 = self.first.k
        d1 = self.first.orbit_distance_matrix(U[:, :k1], V[:, :k1])
        d2 = self.second.orbit_distance_matrix(U[:, k1:], V[:, k1:])
        return np.hypot(d1, d2)

    def nearest(self, g):
        g = np.asarray(g)
        k1 = self.first.k
        return block_diag(self.first.nearest(g[:k1, :k1]), self.second.nearest(g[k1:, k1:]))

    def sample(self, n=64):
        A = self.first.sample(n)
        B = self.second.sample(n)
        return np.array([block_diag(a, b) for a in A for b in B])

    def descriptor(self):
        return {"type": "product", "factors": [self.first.descriptor(), self.second.descriptor()]}


def group_from_descriptor(d: dict) -> OrthSubgroup:
    try:
        kind = d["type"]
        if kind == "trivial":
            return Trivial(int(d["k"]))
        if kind == "finite":
            return FiniteList(d["elements"], label=d.get("label"))
        if kind == "circle":
            return CircleSO2(int(d["k"]), tuple(d.get("plane", (0, 1))))
        if kind == "full_so":
            return FullSO(int(d["k"]))
        if kind == "product":
            a, b = d["factors"]
            return ProductGroup(group_from_descriptor(a), group_from_descriptor(b))
        if kind == "sign":
            return sign_group(int(d["k"]))
        if kind == "cyclic":
            return cyclic_group(int(d["k"]), int(d["order"]), tuple(d.get("plane", (0, 1))))
    except KeyError as exc:
        raise MalformedInputError(f"group descriptor missing field {exc}") from None
    raise MalformedInputError(f"unknown group type {kind!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def orbit_distance(G: OrthSubgroup, u, v) -> float:
    return G.orbit_distance(u, v)


@dataclass(frozen=True)
class QuotientSample:
    space: FiniteMetricSpace
    points: np.ndarray       # grid points before merging
    classes: np.ndarray      # orbit class of each grid point
    representatives: np.ndarray


def quotient_sample(G: OrthSubgroup, R: float, n: int, kind: str | None = None,
                    points: np.ndarray | None = None) -> QuotientSample:
    """Orbit-distance sample of ``B_R(0) / G`` on a deterministic grid.

    Grid points in one orbit (orbit distance ``<= 1e-9``) are merged; the
    base point is the class of the origin.
    """
    if points is None:
        kind = kind or ("polar" if G.k == 2 else "cartesian")
        points = ball_grid(G.k, R, n, kind=kind)
    points = np.asarray(points, dtype=float)
    D = G.orbit_distance_matrix(points, points)
    origin = int(np.argmin(np.linalg.norm(points, axis=1)))
    labels = tuple(tuple(np.round(p, 12)) for p in points)
    q = quotient_by_zero(SemiMetricSample(labels, D, origin), tol=ORBIT_MERGE_TOL)
    return QuotientSample(q.space, points, q.classes, q.representatives)


@dataclass(frozen=True)
class ConeScalingReport:
    max_deviation: float
    n_checked: int
    passed: bool


def cone_scaling_check(G: OrthSubgroup, samples, scalars: Sequence[float] = (0.0, 0.5, -0.5, 2.0, -2.0),
                       tol: float = 1e-12) -> ConeScalingReport:
    """Check ``d(0, a u) = |a| d(0, u)`` for the orbit metric."""
    U = np.atleast_2d(np.asarray(samples, dtype=float))
    zero = np.zeros((1, G.k))
    base = G.orbit_distance_matrix(zero, U)[0]
    worst = 0.0
    for a in scalars:
        lhs = G.orbit_distance_matrix(zero, a * U)[0]
        worst = max(worst, float(np.abs(lhs - abs(a) * base).max()))
    return ConeScalingReport(worst, len(U) * len(scalars), worst <= tol)
