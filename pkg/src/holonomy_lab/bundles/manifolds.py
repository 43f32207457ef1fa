"""Parametric base manifolds, piecewise curves and parallel transport.

Tangent bundles of four closed-form families: flat tori, round spheres,
products and constant rescalings. Fiber vectors are written in a fixed
frame: the global flat frame on a torus, and on the sphere the frame
obtained by rotating the north-pole frame ``(e_x, e_y)`` along the great
circle to the point (undefined only at the south pole).

Sphere points are unit vectors of ``R^3``; the radius enters lengths only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import block_diag

from ..errors import ChartError, DomainError, MalformedInputError

CONTINUITY_TOL = 1e-9
ORTH_TOL = 1e-9
# Frames are rejected within this distance of the south pole (in 1 + z).
CHART_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# rotations and the sphere frame
# ---------------------------------------------------------------------------

def rodrigues(axis, angle) -> np.ndarray:
    """Rotation about unit ``axis`` by ``angle`` (broadcasting over leading dims)."""
    n = np.asarray(axis, dtype=float)
    t = np.asarray(angle, dtype=float)
    shape = np.broadcast_shapes(n.shape[:-1], t.shape)
    n = np.broadcast_to(n, shape + (3,))
    t = np.broadcast_to(t, shape)
    c, s = np.cos(t)[..., None, None], np.sin(t)[..., None, None]
    K = np.zeros(shape + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -n[..., 2], n[..., 1]
    K[..., 1, 0], K[..., 1, 2] = n[..., 2], -n[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -n[..., 1], n[..., 0]
    return c * np.eye(3) + s * K + (1 - c) * n[..., :, None] * n[..., None, :]


def rotate_vector(axis, angle, v) -> np.ndarray:
    """Rodrigues rotation applied directly to vectors ``v``."""
    n = np.asarray(axis, dtype=float)
    t = np.asarray(angle, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)
    nv = np.sum(n * v, axis=-1, keepdims=True)
    return v * np.cos(t) + np.cross(n, v) * np.sin(t) + n * nv * (1 - np.cos(t))


def sphere_frame(x) -> np.ndarray:
    """Orthonormal tangent frame at unit vector(s) ``x`` as a ``(..., 3, 2)`` array."""
    x = np.asarray(x, dtype=float)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    if np.any(1.0 + c < CHART_MARGIN):
        raise ChartError("sphere frame is undefined at the south pole")
    w = 1.0 / (1.0 + c)
    e1 = np.stack([1 - a * a * w, -a * b * w, -a], -1)
    e2 = np.stack([-a * b * w, 1 - b * b * w, -b], -1)
    return np.stack([e1, e2], -1)


def arc_transport_ambient(start, axis, angle) -> np.ndarray:
    """Ambient ``3 x 3`` parallel transport along ``t -> Rot(axis, t*angle) start``.

    The transported vector turns with the curve about ``axis`` and, relative to
    that co-rotating frame, about the normal by ``-angle * <axis, start>``.
    For great circles the second factor is the identity.
    """
    start = np.asarray(start, dtype=float)
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    cos_a = np.sum(axis * start, axis=-1)
    return rodrigues(axis, angle) @ rodrigues(start, -angle * cos_a)


def _unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise DomainError("zero vector has no direction")
    return x / n


# ---------------------------------------------------------------------------
# segments and curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TorusSegment:
    """Straight segment ``t -> start + t * displacement`` in covering coordinates."""

    start: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).reshape(2))
        object.__setattr__(self, "displacement", np.asarray(self.displacement, dtype=float).reshape(2))

    @property
    def end(self):
        return self.start + self.displacement

    def point(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.start + t * self.displacement

    def reversed(self):
        return TorusSegment(self.end, -self.displacement)


@dataclass(frozen=True, eq=False)
class SphereArc:
    """Arc ``t -> Rot(axis, t * angle) start``: a great circle when ``axis`` is
    orthogonal to ``start``, otherwise a latitude circle about ``axis``."""

    start: np.ndarray
    axis: np.ndarray
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "start", _unit(np.asarray(self.start, dtype=float).reshape(3)))
        object.__setattr__(self, "axis", _unit(np.asarray(self.axis, dtype=float).reshape(3)))
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def end(self):
        return rodrigues(self.axis, self.angle) @ self.start

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return np.einsum("...ij,j->...i", rodrigues(self.axis, t * self.angle), self.start)

    def reversed(self):
        return SphereArc(self.end, self.axis, -self.angle)

    @property
    def unit_length(self) -> float:
        """Length on the unit sphere."""
        return abs(self.angle) * float(np.linalg.norm(np.cross(self.axis, self.start)))


Segment = Union[TorusSegment, SphereArc]


@dataclass(frozen=True)
class PiecewiseCurve:
    """Concatenation of segments; consecutive endpoints agree within 1e-9."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise MalformedInputError("a curve needs at least one segment")
        kinds = {type(s) for s in segs}
        if len(kinds) != 1:
            raise MalformedInputError("segments of one curve must share a manifold type")
        for a, b in zip(segs, segs[1:]):
            if np.linalg.norm(a.end - b.start) > CONTINUITY_TOL:
                raise MalformedInputError("consecutive segments do not share endpoints")
        object.__setattr__(self, "segments", segs)

    @property
    def start(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    def reversed(self) -> "PiecewiseCurve":
        return PiecewiseCurve(tuple(s.reversed() for s in reversed(self.segments)))

    def then(self, other: "PiecewiseCurve") -> "PiecewiseCurve":
        """This curve followed by ``other``."""
        return PiecewiseCurve(self.segments + other.segments)

    def sample_points(self, per_segment: int = 32) -> np.ndarray:
        t = np.linspace(0.0, 1.0, per_segment)
        return np.concatenate([s.point(t) for s in self.segments])


@dataclass(frozen=True)
class ProductCurve:
    """Pieces ``(c1, c2)`` traversed jointly, each factor at constant relative speed.

    With both factors parametrized proportionally to arclength a piece has
    length ``sqrt(l1^2 + l2^2)``, the shortest over reparametrizations.
    """

    pieces: tuple  # of (curve in M1, curve in M2)

    def __post_init__(self):
        if not self.pieces:
            raise MalformedInputError("a product curve needs at least one piece")
        object.__setattr__(self, "pieces", tuple(tuple(p) for p in self.pieces))

    @property
    def start(self):
        a, b = self.pieces[0]
        return np.concatenate([a.start, b.start])

    @property
    def end(self):
        a, b = self.pieces[-1]
        return np.concatenate([a.end, b.end])

    def reversed(self) -> "ProductCurve":
        return ProductCurve(tuple((a.reversed(), b.reversed()) for a, b in reversed(self.pieces)))

    def then(self, other: "ProductCurve") -> "ProductCurve":
        return ProductCurve(self.pieces + other.pieces)


Curve = Union[PiecewiseCurve, ProductCurve]


def constant_curve(M: "ParametricManifold", p) -> Curve:
    return M.geodesic(p, p)


# ---------------------------------------------------------------------------
# manifolds
# ---------------------------------------------------------------------------

class ParametricManifold:
    coord_dim: int
    k: int

    def distance(self, p, q) -> np.ndarray:
        raise NotImplementedError

    def geodesic(self, p, q) -> Curve:
        raise NotImplementedError

    def length(self, curve: Curve) -> float:
        raise NotImplementedError

    def transport(self, curve: Curve) -> np.ndarray:
        raise NotImplementedError

    def same_point(self, p, q, tol: float = CONTINUITY_TOL) -> bool:
        return float(self.distance(p, q)) <= tol

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.coord_dim:
            raise MalformedInputError(f"points have {self.coord_dim} coordinates")
        return p

    def descriptor(self) -> dict:
        raise NotImplementedError


def lagrange_gauss(B: np.ndarray) -> np.ndarray:
    """Reduced basis (columns) of a planar lattice."""
    b1, b2 = B[:, 0].copy(), B[:, 1].copy()
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    while True:
        m = round((b1 @ b2) / (b1 @ b1))
        b2 = b2 - m * b1
        if b2 @ b2 >= b1 @ b1:
            break
        b1, b2 = b2, b1
    return np.stack([b1, b2], 1)


@dataclass(frozen=True, eq=False)
class FlatTorus(ParametricManifold):
    """``R^2 / (scale * basis) Z^2`` with the flat metric; holonomy is trivial."""

    basis: np.ndarray = field(default_factory=lambda: np.eye(2))
    scale: float = 1.0
    coord_dim = 2
    k = 2

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float).reshape(2, 2)
        if abs(np.linalg.det(B)) < 1e-12:
            raise DomainError("lattice basis is singular")
        if self.scale <= 0:
            raise DomainError("scale must be positive")
        object.__setattr__(self, "basis", B)
        lat = lagrange_gauss(self.scale * B)
        object.__setattr__(self, "_lattice", lat)
        object.__setattr__(self, "_lattice_inv", np.linalg.inv(lat))
        n = np.arange(-2, 3)
        shifts = np.stack(np.meshgrid(n, n, indexing="ij"), -1).reshape(-1, 2)
        object.__setattr__(self, "_shifts", shifts @ lat.T)

    @property
    def lattice(self) -> np.ndarray:
        return self._lattice

    def shortest_displacement(self, p, q) -> np.ndarray:
        """Shortest covering-space vector from ``p`` to a translate of ``q``."""
        d = self.check_point(q) - self.check_point(p)
        d = d - np.round(d @ self._lattice_inv.T) @ self._lattice.T
        cand = d[..., None, :] + self._shifts
        j = np.argmin(np.einsum("...si,...si->...s", cand, cand), axis=-1)
        return np.take_along_axis(cand, j[..., None, None], axis=-2)[..., 0, :]

    def distance(self, p, q):
        return np.linalg.norm(self.shortest_displacement(p, q), axis=-1)

    def geodesic(self, p, q):
        p = self.check_point(p)
        return PiecewiseCurve((TorusSegment(p, self.shortest_displacement(p, q)),))

    def length(self, curve):
        return float(sum(np.linalg.norm(s.displacement) for s in curve.segments))

    def transport(self, curve):
        return np.eye(2)

    def wrap(self, p) -> np.ndarray:
        """Coordinates reduced to the fundamental parallelogram."""
        p = self.check_point(p)
        return p - np.floor(p @ self._lattice_inv.T) @ self._lattice.T

    def descriptor(self):
        return {"variant": "torus", "basis": self.basis.tolist(), "scale": self.scale}


@dataclass(frozen=True)
class RoundSphere(ParametricManifold):
    radius: float = 1.0
    coord_dim = 3
    k = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("radius must be positive")

    def check_point(self, p):
        p = super().check_point(p)
        if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > 1e-9):
            raise MalformedInputError("sphere points must be unit vectors")
        return p

    def distance(self, p, q):
        p, q = self.check_point(p), self.check_point(q)
        cr = np.linalg.norm(np.cross(p, q), axis=-1)
        return self.radius * np.arctan2(cr, np.sum(p * q, axis=-1))

    def geodesic_axis(self, p, q):
        """Axis and angle of the minimal great-circle arc (deterministic if antipodal)."""
        p, q = self.check_point(p), self.check_point(q)
        cr = np.cross(p, q)
        n = np.linalg.norm(cr, axis=-1)
        angle = np.arctan2(n, np.sum(p * q, axis=-1))
        # any axis orthogonal to p is valid for coincident or antipodal points
        fallback = np.cross(p, np.where(np.abs(p[..., :1]) < 0.9, [1.0, 0, 0], [0, 1.0, 0]))
        fallback /= np.linalg.norm(fallback, axis=-1, keepdims=True)
        safe = n[..., None] > 1e-12
        axis = np.where(safe, cr / np.where(safe, n[..., None], 1.0), fallback)
        return axis, angle

    def geodesic(self, p, q):
        axis, angle = self.geodesic_axis(p, q)
        return PiecewiseCurve((SphereArc(p, axis, float(angle)),))

    def length(self, curve):
        return self.radius * float(sum(s.unit_length for s in curve.segments))

    def transport(self, curve):
        P = np.eye(3)
        for s in curve.segments:
            P = arc_transport_ambient(s.start, s.axis, s.angle) @ P
        return sphere_frame(curve.end).T @ P @ sphere_frame(curve.start)

    def latitude_loop(self, p, rho: float, orientation: int = 1) -> PiecewiseCurve:
        """Circle of geodesic radius ``rho`` (unit sphere) through ``p``, centered
        in the direction of the first frame vector."""
        p = self.check_point(p)
        center = np.cos(rho) * p + np.sin(rho) * sphere_frame(p)[:, 0]
        return PiecewiseCurve((SphereArc(p, center, orientation * 2 * np.pi),))

    def exp(self, p, w):
        """Exponential map with ``w`` in frame coordinates (unit-sphere lengths)."""
        p = self.check_point(p)
        w = np.asarray(w, dtype=float)
        v = np.einsum("...ij,...j->...i", sphere_frame(p), w)
        t = np.linalg.norm(v, axis=-1, keepdims=True)
        d = v / np.where(t > 0, t, 1.0)
        return np.cos(t) * p + np.sin(t) * d

    def descriptor(self):
        return {"variant": "sphere", "r": self.radius}


@dataclass(frozen=True)
class Product(ParametricManifold):
    first: ParametricManifold
    second: ParametricManifold

    @property
    def coord_dim(self):
        return self.first.coord_dim + self.second.coord_dim

    @property
    def k(self):
        return self.first.k + self.second.k

    def split(self, p):
        p = np.asarray(p, dtype=float)
        c = self.first.coord_dim
        return p[..., :c], p[..., c:]

    def split_fiber(self, u):
        u = np.asarray(u, dtype=float)
        return u[..., :self.first.k], u[..., self.first.k:]

    def distance(self, p, q):
        (p1, p2), (q1, q2) = self.split(p), self.split(q)
        return np.hypot(self.first.distance(p1, q1), self.second.distance(p2, q2))

    def geodesic(self, p, q):
        (p1, p2), (q1, q2) = self.split(p), self.split(q)
        return ProductCurve(((self.first.geodesic(p1, q1), self.second.geodesic(p2, q2)),))

    def length(self, curve):
        return float(sum(np.hypot(self.first.length(a), self.second.length(b)) for a, b in curve.pieces))

    def transport(self, curve):
        P = np.eye(self.k)
        for a, b in curve.pieces:
            P = block_diag(self.first.transport(a), self.second.transport(b)) @ P
        return P

    def descriptor(self):
        return {"variant": "product", "factors": [self.first.descriptor(), self.second.descriptor()]}


@dataclass(frozen=True)
class Rescaled(ParametricManifold):
    """Metric ``lam^2 g``: lengths scale by ``lam``, the connection is unchanged."""

    base: ParametricManifold
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise DomainError("rescaling factor must be positive")

    @property
    def coord_dim(self):
        return self.base.coord_dim

    @property
    def k(self):
        return self.base.k

    def check_point(self, p):
        return self.base.check_point(p)

    def distance(self, p, q):
        return self.lam * self.base.distance(p, q)

    def geodesic(self, p, q):
        return self.base.geodesic(p, q)

    def length(self, curve):
        return self.lam * self.base.length(curve)

    def transport(self, curve):
        return self.base.transport(curve)

    def descriptor(self):
        return {"variant": "rescaled", "lam": self.lam, "base": self.base.descriptor()}


def unwrap_scale(M: ParametricManifold) -> tuple[ParametricManifold, float]:
    """Strip nested :class:`Rescaled` layers, returning ``(inner, total factor)``."""
    lam = 1.0
    while isinstance(M, Rescaled):
        lam *= M.lam
        M = M.base
    return M, lam


def manifold_from_descriptor(d: dict) -> ParametricManifold:
    """Build a manifold from JSON such as ``{"variant": "sphere", "r": 1.0}``."""
    try:
        v = d["variant"]
        if v == "torus":
            return FlatTorus(np.asarray(d.get("basis", np.eye(2)), dtype=float), float(d.get("scale", 1.0)))
        if v == "sphere":
            return RoundSphere(float(d.get("r", 1.0)))
        if v == "product":
            a, b = d["factors"]
            return Product(manifold_from_descriptor(a), manifold_from_descriptor(b))
        if v == "rescaled":
            return Rescaled(manifold_from_descriptor(d["base"]), float(d["lam"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad manifold descriptor: {exc}") from None
    raise MalformedInputError(f"unknown manifold variant {d.get('variant')!r}")


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransportResult:
    matrix: np.ndarray
    length: float

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if not np.allclose(M @ M.T, np.eye(M.shape[0]), atol=ORTH_TOL):
            raise DomainError("transport matrix is not orthogonal")
        object.__setattr__(self, "matrix", M)


@dataclass(frozen=True, eq=False)
class BundlePoint:
    """Vector ``fiber`` in the frame at ``base``."""

    base: np.ndarray
    fiber: np.ndarray
    chart: str = "standard"

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "fiber", np.asarray(self.fiber, dtype=float))


def curve_length(M: ParametricManifold, curve: Curve) -> float:
    return M.length(curve)


def parallel_transport(M: ParametricManifold, curve: Curve) -> TransportResult:
    return TransportResult(M.transport(curve), M.length(curve))


def loop_holonomy(M: ParametricManifold, p, loop: Curve) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not (M.same_point(loop.start, p) and M.same_point(loop.end, p)):
        raise DomainError("loop must start and end at p")
    return M.transport(loop)


def polygon_loop(M: RoundSphere, vertices: Sequence) -> PiecewiseCurve:
    """Closed geodesic polygon through ``vertices`` (unit vectors) and back."""
    V = [np.asarray(v, dtype=float) for v in vertices]
    segs = []
    for a, b in zip(V, V[1:] + V[:1]):
        axis, angle = M.geodesic_axis(a, b)
        segs.append(SphereArc(a, axis, float(angle)))
    # chain exact endpoints so rounding never breaks continuity
    fixed = [segs[0]]
    for s in segs[1:]:
        fixed.append(SphereArc(fixed[-1].end, s.axis, s.angle))
    return PiecewiseCurve(tuple(fixed))


def curve_points(M: ParametricManifold, curve: Curve, per_segment: int = 32) -> np.ndarray:
    """Sampled points of a curve, for plotting dumps."""
    if isinstance(curve, ProductCurve):
        out = []
        for a, b in curve.pieces:
            pa = curve_points(M.first, a, per_segment)
            pb = curve_points(M.second, b, per_segment)
            n = max(len(pa), len(pb))
            ia = np.linspace(0, len(pa) - 1, n).round().astype(int)
            ib = np.linspace(0, len(pb) - 1, n).round().astype(int)
            out.append(np.hstack([pa[ia], pb[ib]]))
        return np.concatenate(out)
    return curve.sample_points(per_segment)
