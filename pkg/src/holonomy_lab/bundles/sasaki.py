"""Sasaki-type distances on tangent bundles of the parametric manifolds.

For ``u`` over ``p`` and ``v`` over ``q`` the distance is the infimum over
base curves ``alpha`` from ``p`` to ``q`` of ``sqrt(len(alpha)^2 +
||P^alpha u - v||^2)``. Closed forms and curve families used here:

torus
    trivial transport, so the infimum separates: ``sqrt(d(p, q)^2 + ||u - v||^2)``.
sphere
    the minimal geodesic preceded by a latitude loop at ``p`` of signed
    geodesic radius ``t`` in ``[-pi, pi]`` (``t = 0`` is no loop). The loop
    transports are computed from the segment formulas, not from the
    length-norm formula. Values are upper bounds.
product
    the product of bundle metrics: ``hypot`` of the factor distances.

Lower bounds: ``sqrt(d(p, q)^2 + (|u| - |v|)^2)`` holds for every curve,
since the base length and the change of norm are both dominated by the
curve length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import brentq, minimize

from .._optimize import GRID_SIZE, grid_minimize, make_grid
from ..errors import DomainError, MalformedInputError, UnattainableError
from ..holonomic import (
    CircleNormedGroup, HolonomicSpace, SphereLengthNorm, holonomy_radius_zero_upper,
    sphere_space, trivial_space,
)
from ..metric_core import FiniteMetricSpace
from ..sampling import ball_grid, product_grid
from .manifolds import (
    BundlePoint, FlatTorus, ParametricManifold, PiecewiseCurve, Product, ProductCurve,
    Rescaled, RoundSphere, TorusSegment, arc_transport_ambient, polygon_loop,
    rotate_vector, sphere_frame, unwrap_scale,
)

_T_LO, _T_HI = -np.pi, np.pi


@dataclass(frozen=True)
class SasakiResult:
    value: float
    exact: bool
    lower: float
    family: str


# ---------------------------------------------------------------------------
# sphere loop family
# ---------------------------------------------------------------------------

def _loop_angles(P: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Holonomy angle (frame at ``p``) of the latitude loop of signed radius ``t``.

    ``P`` has shape ``(N, 3)`` and ``t`` shape ``(N, m)``.
    """
    F = sphere_frame(P)                                   # (N, 3, 2)
    rho = np.abs(t)
    phi = 2 * np.pi * np.sign(t)
    e1 = F[:, None, :, 0]
    center = np.cos(rho)[..., None] * P[:, None, :] + np.sin(rho)[..., None] * e1
    start = np.broadcast_to(P[:, None, :], center.shape)
    # same factorization as arc_transport_ambient, applied to e1 only
    w = rotate_vector(start, -phi * np.sum(center * start, -1), np.broadcast_to(e1, center.shape))
    w = rotate_vector(center, phi, w)
    return np.arctan2(np.sum(F[:, None, :, 1] * w, -1), np.sum(e1 * w, -1))


def _sphere_family_min(radius: float, P: np.ndarray, U: np.ndarray, V: np.ndarray,
                       ell0: np.ndarray, n_grid: int = GRID_SIZE):
    """``min_t (ell0 + radius*2*pi*sin|t|)^2 + ||H(t) u - v||^2`` for each row.

    Returns ``(value, t_argmin)``.
    """
    uu = (U ** 2).sum(1) + (V ** 2).sum(1)
    dot = (U * V).sum(1)
    cross = U[:, 0] * V[:, 1] - U[:, 1] * V[:, 0]
    grid = make_grid(_T_LO, _T_HI, n_grid, include=(0.0,))
    uniq, inv = np.unique(P, axis=0, return_inverse=True)
    inv = inv.ravel()
    h_grid = _loop_angles(uniq, np.broadcast_to(grid, (len(uniq), grid.size)))
    loop_len = radius * 2 * np.pi * np.sin(np.abs(grid))
    # objective on the grid = A @ B^T, expanded in the pair and grid factors
    A = np.stack([ell0 ** 2 + uu, 2 * ell0, np.ones_like(uu), -2 * dot, -2 * cross], 1)
    B = np.stack([np.broadcast_to(np.ones_like(loop_len), h_grid.shape),
                  np.broadcast_to(loop_len, h_grid.shape),
                  np.broadcast_to(loop_len ** 2, h_grid.shape),
                  np.cos(h_grid), np.sin(h_grid)], -1)           # (n_unique, G, 5)

    def f(t, idx):
        h = _loop_angles(P[idx], t)
        length = ell0[idx, None] + radius * 2 * np.pi * np.sin(np.abs(t))
        return length ** 2 + uu[idx, None] - 2 * (np.cos(h) * dot[idx, None] + np.sin(h) * cross[idx, None])

    def f_grid(t, idx):
        out = np.empty(t.shape)
        g = inv[idx]
        for j in np.unique(g):
            rows = np.nonzero(g == j)[0]
            out[rows] = A[idx[rows]] @ B[j].T
        return out

    t, _ = grid_minimize(f, _T_LO, _T_HI, len(P), n_grid=n_grid, include=(0.0,), f_grid=f_grid)

    # the expanded square cancels badly near zero, so the argmin and the
    # plain geodesic (t = 0) are re-evaluated as hypot(length, |R(h) u - v|)
    def stable(t):
        h = _loop_angles(P, t[:, None])[:, 0]
        c, s = np.cos(h), np.sin(h)
        moved = np.stack([c * U[:, 0] - s * U[:, 1], s * U[:, 0] + c * U[:, 1]], 1)
        return np.hypot(ell0 + radius * 2 * np.pi * np.sin(np.abs(t)), np.linalg.norm(moved - V, axis=1))

    at_min, at_zero = stable(t), stable(np.zeros_like(t))
    zero_wins = at_zero <= at_min
    return np.where(zero_wins, at_zero, at_min), np.where(zero_wins, 0.0, t)


def _sphere_pairs(S: RoundSphere, lam: float, P, U, Q, V):
    r = lam * S.radius
    axis, angle = S.geodesic_axis(P, Q)
    G = arc_transport_ambient(P, axis, angle)               # (N, 3, 3)
    T = np.einsum("nia,nij,njb->nab", sphere_frame(Q), G, sphere_frame(P))
    Vp = np.einsum("nba,nb->na", T, V)                       # T^t v
    d, _ = _sphere_family_min(r, P, U, Vp, r * angle)
    return d


# ---------------------------------------------------------------------------
# batched dispatch
# ---------------------------------------------------------------------------

def _factors(M: Product, lam: float):
    if lam == 1:
        return M.first, M.second
    return Rescaled(M.first, lam), Rescaled(M.second, lam)


def _pairs(M: ParametricManifold, P, U, Q, V):
    """Upper bounds and exactness for rows ``(P[n], U[n]) -> (Q[n], V[n])``."""
    M, lam = unwrap_scale(M)
    if isinstance(M, FlatTorus):
        d = lam * M.distance(P, Q)
        return np.sqrt(d ** 2 + ((U - V) ** 2).sum(1)), True
    if isinstance(M, RoundSphere):
        return _sphere_pairs(M, lam, P, U, Q, V), False
    if isinstance(M, Product):
        (P1, P2), (Q1, Q2) = M.split(P), M.split(Q)
        (U1, U2), (V1, V2) = M.split_fiber(U), M.split_fiber(V)
        f1, f2 = _factors(M, lam)
        a, ea = _unique_pairs(f1, P1, U1, Q1, V1)
        b, eb = _unique_pairs(f2, P2, U2, Q2, V2)
        return np.hypot(a, b), ea and eb
    raise DomainError(f"no Sasaki distance for {type(M).__name__}")


def _unique_pairs(M, P, U, Q, V):
    # product grids repeat each factor's rows many times
    rows = np.hstack([P, U, Q, V])
    key = rows @ np.random.default_rng(0).normal(size=rows.shape[1])
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    uniq = rows[first]
    if len(uniq) == len(rows) or not np.array_equal(uniq[inv.ravel()], rows):
        return _pairs(M, P, U, Q, V)
    cuts = np.cumsum([P.shape[1], U.shape[1], Q.shape[1]])
    d, exact = _pairs(M, *np.split(uniq, cuts, axis=1))
    return d[inv.ravel()], exact


def _family_name(M: ParametricManifold) -> str:
    M, _ = unwrap_scale(M)
    if isinstance(M, FlatTorus):
        return "closed form"
    if isinstance(M, RoundSphere):
        return "minimal geodesic after a latitude loop at the start point"
    if isinstance(M, Product):
        return f"product[{_family_name(M.first)}; {_family_name(M.second)}]"
    return "unknown"


def lower_bound(M: ParametricManifold, P, U, Q, V) -> np.ndarray:
    d = M.distance(P, Q)
    return np.hypot(d, np.linalg.norm(U, axis=-1) - np.linalg.norm(V, axis=-1))


def sasaki_distance(M: ParametricManifold, u: BundlePoint, v: BundlePoint) -> SasakiResult:
    P, U = np.atleast_2d(M.check_point(u.base)), np.atleast_2d(u.fiber)
    Q, V = np.atleast_2d(M.check_point(v.base)), np.atleast_2d(v.fiber)
    if U.shape[1] != M.k or V.shape[1] != M.k:
        raise MalformedInputError(f"fiber vectors have length {M.k}")
    d, exact = _pairs(M, P, U, Q, V)
    lo = float(lower_bound(M, P, U, Q, V)[0])
    return SasakiResult(float(max(d[0], lo)) if exact else float(d[0]), exact, lo, _family_name(M))


def sasaki_matrix(M: ParametricManifold, bases, fibers) -> np.ndarray:
    """All-pairs Sasaki upper bounds between bundle points ``(bases[n], fibers[n])``."""
    B = np.atleast_2d(np.asarray(bases, dtype=float))
    F = np.atleast_2d(np.asarray(fibers, dtype=float))
    n = len(B)
    i, j = np.triu_indices(n, 1)
    D = np.zeros((n, n))
    if len(i):
        d, _ = _pairs(M, B[i], F[i], B[j], F[j])
        D[i, j] = d
        D[j, i] = d
    return D


def norm_map(u: BundlePoint) -> float:
    """Distance from ``u`` to the zero vector over the same point: ``||u||``."""
    return float(np.linalg.norm(u.fiber))


# ---------------------------------------------------------------------------
# nested optimizer over broken geodesics (flat tori)
# ---------------------------------------------------------------------------

def sasaki_distance_by_curves(M: ParametricManifold, u: BundlePoint, v: BundlePoint,
                              n_translates: int = 3) -> float:
    """Minimize ``sqrt(len^2 + ||P u - v||^2)`` over two-segment broken lines.

    Each candidate curve runs ``p -> w -> q + n`` for a lattice vector ``n``
    among the ``n_translates`` nearest translates; ``w`` is optimized by
    Nelder-Mead. Lengths and transports come from the curve machinery.
    Flat tori (optionally rescaled) only.
    """
    T, lam = unwrap_scale(M)
    if not isinstance(T, FlatTorus):
        raise DomainError("curve optimizer is implemented for flat tori")
    p, q = T.check_point(u.base), T.check_point(v.base)
    d0 = T.shortest_displacement(p, q)
    cand = d0 + T._shifts
    order = np.argsort(np.linalg.norm(cand, axis=1))[:n_translates]
    best = np.inf
    for disp in cand[order]:
        target = p + disp

        def objective(w):
            curve = PiecewiseCurve((TorusSegment(p, w - p), TorusSegment(w, target - w)))
            length = M.length(curve)
            moved = M.transport(curve) @ u.fiber
            return length ** 2 + float(np.sum((moved - v.fiber) ** 2))

        w0 = p + 0.5 * disp + np.array([0.1, -0.07]) * max(1.0, np.linalg.norm(disp))
        res = minimize(objective, w0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        best = min(best, res.fun)
    return float(np.sqrt(best))


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------

@dataclass
class BundleSample:
    """A finite piece of ``pi^{-1}(B_R(p))`` with projection bookkeeping."""

    space: FiniteMetricSpace
    bases: np.ndarray        # base point of each sample
    fibers: np.ndarray       # fiber vector of each sample (frame at its base)
    proj: np.ndarray         # index of the base point in ``base_points``
    base_points: np.ndarray
    central: np.ndarray      # indices of the samples over p
    fiber_grid: np.ndarray   # fiber grid at p

    @property
    def base_space(self) -> FiniteMetricSpace:
        return self.space.subspace(np.nonzero(self.fiber_index == 0)[0], base=0)

    @property
    def fiber_index(self) -> np.ndarray:
        n_f = len(self.fiber_grid)
        return np.arange(len(self.bases)) % n_f


def fiber_grid(k: int, R: float, n: int, kind: str | None = None) -> np.ndarray:
    if kind is None:
        kind = "cartesian"
    return ball_grid(k, R, n, kind=kind)


def fiber_metric_sample(M: ParametricManifold, p, R: float, n: int, kind: str | None = None,
                        points=None) -> FiniteMetricSpace:
    """Same-fiber Sasaki distances on a grid of ``B_R(0)`` in the fiber over ``p``."""
    p = M.check_point(p)
    W = fiber_grid(M.k, R, n, kind) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    D = sasaki_matrix(M, np.broadcast_to(p, (len(W), p.size)), W)
    labels = tuple(tuple(np.round(w, 12)) for w in W)
    origin = int(np.argmin(np.linalg.norm(W, axis=1)))
    return FiniteMetricSpace(labels, D, origin)


def base_grid(M: ParametricManifold, p, R: float, n: int) -> np.ndarray:
    """Deterministic points of ``B_R(p)``, ``p`` first."""
    p = M.check_point(p)
    inner, lam = unwrap_scale(M)
    if isinstance(inner, FlatTorus):
        return p + ball_grid(2, R / lam, n, kind="polar")
    if isinstance(inner, RoundSphere):
        rad = R / (lam * inner.radius)
        if rad >= np.pi:
            raise DomainError("ball covers the whole sphere; choose R below pi*r")
        return inner.exp(p, ball_grid(2, rad, n, kind="polar"))
    if isinstance(inner, Product):
        p1, p2 = inner.split(p)
        f1, f2 = _factors(inner, lam)
        return product_grid(base_grid(f1, p1, R / np.sqrt(2), n), base_grid(f2, p2, R / np.sqrt(2), n))
    raise DomainError(f"no base grid for {type(inner).__name__}")


def transported_fibers(M: ParametricManifold, p, Q, W) -> np.ndarray:
    """Fiber grid ``W`` at ``p`` carried along minimal geodesics to each row of ``Q``.

    Returns shape ``(len(Q), len(W), k)``.
    """
    out = np.empty((len(Q), len(W), M.k))
    for j, q in enumerate(Q):
        T = M.transport(M.geodesic(p, q))
        out[j] = W @ T.T
    return out


def bundle_ball_sample(M: ParametricManifold, p, R: float, n_base: int, n_fiber: int,
                       kind: str | None = None) -> BundleSample:
    """All-pairs Sasaki upper bounds on a sample of ``pi^{-1}(B_R(p))``.

    Base points come from :func:`base_grid`; the fiber grid at each base point
    is the grid at ``p`` transported along the minimal geodesic, so every
    sample lies within ``d(p, q) <= R`` of a sample over ``p``. The base
    point of the result is the zero vector over ``p`` (index 0).
    """
    p = M.check_point(p)
    Q = base_grid(M, p, R, n_base)
    W = fiber_grid(M.k, R, n_fiber, kind)
    fib = transported_fibers(M, p, Q, W)
    bases = np.repeat(Q, len(W), axis=0)
    fibers = fib.reshape(-1, M.k)
    proj = np.repeat(np.arange(len(Q)), len(W))
    D = sasaki_matrix(M, bases, fibers)
    labels = tuple((int(a), int(b)) for a, b in zip(proj, np.tile(np.arange(len(W)), len(Q))))
    space = FiniteMetricSpace(labels, D, 0)
    return BundleSample(space, bases, fibers, proj, Q, np.arange(len(W)), W)


def fiber_inclusion(sample: BundleSample) -> list[int]:
    """Indices of the samples over ``p``: the inclusion of the central fiber."""
    return list(sample.central)


# ---------------------------------------------------------------------------
# length norm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LengthNormCertificate:
    value: float
    loop: object
    parameter: float            # signed loop radius (sphere) or 0
    achieved: np.ndarray        # holonomy of the certificate loop
    residual: float             # ||achieved - target||_op


def _target_angle(target: np.ndarray) -> float:
    target = np.asarray(target, dtype=float)
    if target.shape != (2, 2) or not np.allclose(target @ target.T, np.eye(2), atol=1e-9):
        raise MalformedInputError("target must be a 2 x 2 orthogonal matrix")
    if np.linalg.det(target) < 0:
        raise UnattainableError("reflections are not holonomies of an orientable surface")
    return float(np.arctan2(target[1, 0], target[0, 0]))


def _sphere_length_norm(S: RoundSphere, lam: float, p, target, tol: float):
    psi = _target_angle(target)
    r = lam * S.radius
    if abs(psi) <= tol:
        loop = S.geodesic(p, p)
        return LengthNormCertificate(0.0, loop, 0.0, np.eye(2), float(np.linalg.norm(target - np.eye(2), 2)))
    P = np.asarray(p, dtype=float)[None]

    def mismatch(t):
        h = _loop_angles(P, np.atleast_2d(t))[0]
        return np.angle(np.exp(1j * (h - psi)))

    best = None
    for lo, hi in ((1e-12, np.pi - 1e-12), (-np.pi + 1e-12, -1e-12)):
        grid = np.linspace(lo, hi, 2049)
        g = mismatch(grid)
        for a in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
            if abs(g[a] - g[a + 1]) > np.pi:   # wrap-around jump, not a root
                continue
            t = brentq(lambda x: mismatch(np.array([x]))[0], grid[a], grid[a + 1], xtol=1e-14)
            length = r * 2 * np.pi * abs(np.sin(t))
            if best is None or length < best[0]:
                best = (length, t)
    if best is None:
        raise UnattainableError("no latitude loop realizes the target")
    length, t = best
    loop = S.latitude_loop(p, abs(t), int(np.sign(t)))
    H = S.transport(loop)
    return LengthNormCertificate(length, loop, t, H, float(np.linalg.norm(H - target, 2)))


def length_norm_estimate(M: ParametricManifold, p, target, tol: float = 1e-12) -> LengthNormCertificate:
    """Shortest loop at ``p`` found with holonomy ``target``: an upper bound for ``L(target)``.

    Sphere loops range over latitude circles through ``p``; tori admit only the
    identity; products combine factor certificates as ``hypot``.
    """
    inner, lam = unwrap_scale(M)
    p = M.check_point(p)
    target = np.asarray(target, dtype=float)
    if isinstance(inner, FlatTorus):
        if not np.allclose(target, np.eye(2), atol=tol if tol > 1e-9 else 1e-9):
            raise UnattainableError("flat tori have trivial holonomy")
        return LengthNormCertificate(0.0, inner.geodesic(p, p), 0.0, np.eye(2), 0.0)
    if isinstance(inner, RoundSphere):
        return _sphere_length_norm(inner, lam, p, target, tol)
    if isinstance(inner, Product):
        k1 = inner.first.k
        if np.abs(target[:k1, k1:]).max() > 1e-9 or np.abs(target[k1:, :k1]).max() > 1e-9:
            raise UnattainableError("product holonomy is block diagonal")
        p1, p2 = inner.split(p)
        f1, f2 = _factors(inner, lam)
        a = length_norm_estimate(f1, p1, target[:k1, :k1], tol)
        b = length_norm_estimate(f2, p2, target[k1:, k1:], tol)
        H = block_diag(a.achieved, b.achieved)
        return LengthNormCertificate(float(np.hypot(a.value, b.value)), ProductCurve(((a.loop, b.loop),)),
                                     0.0, H, float(np.linalg.norm(H - target, 2)))
    raise DomainError(f"no length norm for {type(inner).__name__}")


@dataclass(frozen=True)
class PolygonChallenge:
    angles: np.ndarray          # holonomy angle of each polygon
    lengths: np.ndarray
    bound: np.ndarray           # latitude-circle length norm at that angle
    max_undercut: float         # max(bound - length)


def polygon_challenge(S: RoundSphere, p, n_random: int = 300, max_vertices: int = 6,
                      seed: int = 0, n_regular: int = 64) -> PolygonChallenge:
    """Geodesic polygons at ``p`` (regular n-gons and random ones, ``n <= max_vertices``).

    Each polygon is a loop at ``p``; its length can never be below the length
    norm of its holonomy, so ``max_undercut`` should be ``<= 0`` up to roundoff.
    """
    p = S.check_point(p)
    rng = np.random.default_rng(seed)
    loops = []
    for n in range(3, max_vertices + 1):
        for rho in np.linspace(0.05, np.pi - 0.05, n_regular):
            center = S.exp(p, np.array([rho, 0.0]))
            ang = np.pi + 2 * np.pi * np.arange(n) / n
            F = sphere_frame(center)
            verts = [np.cos(rho) * center + np.sin(rho) * (F @ np.array([np.cos(a), np.sin(a)])) for a in ang]
            verts[0] = p
            loops.append(polygon_loop(S, verts))
    for _ in range(n_random):
        n = int(rng.integers(3, max_vertices + 1))
        w = rng.normal(size=(n - 1, 2)) * rng.uniform(0.1, 1.2)
        verts = [p] + list(S.exp(p, w))
        loops.append(polygon_loop(S, verts))
    angles, lengths = [], []
    for loop in loops:
        H = S.transport(loop)
        angles.append(np.arctan2(H[1, 0], H[0, 0]))
        lengths.append(S.length(loop))
    angles, lengths = np.array(angles), np.array(lengths)
    bound = SphereLengthNorm(S.radius)(angles)
    return PolygonChallenge(angles, lengths, bound, float(np.max(bound - lengths)))


# ---------------------------------------------------------------------------
# holonomic spaces of the fibers
# ---------------------------------------------------------------------------

def holonomic_space(M: ParametricManifold, p=None) -> HolonomicSpace:
    """Closed-form holonomic space ``(fiber, Hol_p, L_p)`` of the tangent bundle."""
    inner, lam = unwrap_scale(M)
    if isinstance(inner, FlatTorus):
        return trivial_space(2)
    if isinstance(inner, RoundSphere):
        return sphere_space(lam * inner.radius)
    if isinstance(inner, Product):
        f1, f2 = _factors(inner, lam)
        a, b = holonomic_space(f1), holonomic_space(f2)
        k1 = a.k
        if a.is_trivial and b.is_trivial:
            return trivial_space(a.k + b.k)
        if a.is_trivial and isinstance(b.group, CircleNormedGroup):
            basis = np.zeros((a.k + b.k, 2))
            basis[k1:] = b.group.basis
            return HolonomicSpace(a.k + b.k, CircleNormedGroup(a.k + b.k, b.group.norm, basis))
        if b.is_trivial and isinstance(a.group, CircleNormedGroup):
            basis = np.zeros((a.k + b.k, 2))
            basis[:k1] = a.group.basis
            return HolonomicSpace(a.k + b.k, CircleNormedGroup(a.k + b.k, a.group.norm, basis))
        raise DomainError("holonomy of this product is not a single circle")
    raise DomainError(f"no holonomic space for {type(inner).__name__}")


def holonomy_radius_estimate(M: ParametricManifold, p=None) -> float:
    """Upper bound for the holonomy radius of the fiber; ``inf`` for flat tori.

    For products the norm splits as ``hypot`` of factor norms, so the ratio
    ``L / ||a - id||`` is minimized with one factor at the identity.
    """
    inner, lam = unwrap_scale(M)
    if isinstance(inner, FlatTorus):
        return np.inf
    if isinstance(inner, RoundSphere):
        return holonomy_radius_zero_upper(sphere_space(lam * inner.radius))
    if isinstance(inner, Product):
        f1, f2 = _factors(inner, lam)
        return min(holonomy_radius_estimate(f1), holonomy_radius_estimate(f2))
    raise DomainError(f"unsupported manifold {type(inner).__name__}")
