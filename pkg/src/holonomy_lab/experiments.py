"""Scenario runners: collapse tables, equidistance, flat strips, refinement.

Every scenario is deterministic given its config (grids are fixed, random
draws use ``cfg.seed``) and returns a :class:`ScenarioResult` whose rows
carry a pass flag. Budgets use only the additive bounds of the theory:
``2 * radius`` for the fiber inclusion into a bundle ball and ``sup L_i``
for a waning norm. Sampling allowances are grid meshes (all distances
involved are 1-Lipschitz in each argument).
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundles import (
    BundlePoint, FlatTorus, Product, Rescaled, RoundSphere, bundle_ball_sample,
    fiber_metric_sample, holonomic_space, manifold_from_descriptor,
)
from .bundles.manifolds import unwrap_scale
from .bundles.sasaki import _pairs, sasaki_matrix, transported_fibers
from .errors import DomainError, EmptyLiftWarning, MalformedInputError
from .holonomic import (
    HolonomicSequence, limit_semimetric, wane_group_closure, wane_set_estimate,
)
from .metric_core import (
    Correspondence, FiniteMetricSpace, check_metric_axioms, correspondence_distortion, euclidean_space,
    hausdorff_distance, quotient_by_zero,
)
from .parallelism import (
    SampledSubmetry, constant_norm_check, is_horizontal, parallel_translate_setvalued,
)
from .quotients import CircleSO2, FullSO, ProductGroup, Trivial, quotient_sample
from .sampling import ball_grid, grid_mesh, product_grid

SCENARIOS = ("totcollapse", "prodcollapse", "equidistance", "flatstrip", "refinement")
NORTH = np.array([0.0, 0.0, 1.0])


@dataclass
class ScenarioConfig:
    name: str
    geometry: dict = field(default_factory=dict)
    i_max: int = 16
    n_base: int = 1           # 1 selects fiber-level rows only
    n_fiber: int = 6          # rings (k = 2) or points per axis
    n_angles: int = 12
    R: float = 1.0
    tol: float = 1e-6
    seed: int = 0
    wane_threshold: float = 0.05
    wane_i_max: int = 200
    variant: str = "both"
    n_pairs: int = 100

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise MalformedInputError(f"unknown scenario {self.name!r}; choose from {SCENARIOS}")
        if self.i_max < 2:
            raise DomainError("i_max must be >= 2")
        if self.R <= 0:
            raise DomainError("R must be positive")
        if self.n_fiber < 4 or self.n_angles < 4:
            raise DomainError("fiber sample sizes must be >= 4")
        if self.n_base != 1 and self.n_base < 4:
            raise DomainError("n_base must be 1 (fiber rows only) or >= 4")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise MalformedInputError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise MalformedInputError(str(exc)) from None


@dataclass
class ConvergenceRow:
    i: int
    gh_bound: float
    budget: float
    allowance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.i = int(self.i)
        self.gh_bound, self.budget, self.allowance = map(float, (self.gh_bound, self.budget, self.allowance))
        self.passed = bool(self.gh_bound <= self.budget + self.allowance)


@dataclass
class ScenarioResult:
    name: str
    rows: list
    report: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and bool(self.report.get("pass", True))

    def csv(self) -> str:
        lines = ["i,gh_bound,budget,pass"]
        lines += [f"{r.i},{r.gh_bound!r},{r.budget!r},{str(r.passed).lower()}" for r in self.rows]
        return "\n".join(lines) + "\n"


def count_inversions(values) -> int:
    v = np.asarray(values, dtype=float)
    return int(np.sum(v[1:] > v[:-1] + 1e-12))


# ---------------------------------------------------------------------------
# norm-level correspondence
# ---------------------------------------------------------------------------

def _polar_fiber(R: float, n_rings: int, n_angles: int) -> np.ndarray:
    return ball_grid(2, R, n_rings, kind="polar", n_angles=n_angles)


def _norm_correspondence(W: np.ndarray, radii: np.ndarray, n_classes: int, keep: slice = slice(None)):
    """Pairs ``(u, class of |u|)`` matching norms to the nearest segment point."""
    r = np.linalg.norm(W[:, keep], axis=1)
    cls = np.abs(r[:, None] - radii[None, :]).argmin(axis=1)
    return cls


def _quotient_radii(R: float, n: int) -> np.ndarray:
    return np.linspace(0.0, R, n)


# ---------------------------------------------------------------------------
# totcollapse
# ---------------------------------------------------------------------------

def run_totcollapse(cfg: ScenarioConfig) -> ScenarioResult:
    """``T_p S^2(1/i)`` against the cone ``R^2 / SO(2)``, ``i = 1 .. i_max``."""
    base = manifold_from_descriptor(cfg.geometry or {"variant": "sphere", "r": 1.0})
    if not isinstance(base, RoundSphere):
        raise DomainError("totcollapse needs a round sphere")
    W = _polar_fiber(cfg.R, cfg.n_fiber, cfg.n_angles)
    Q = quotient_sample(FullSO(2), cfg.R, cfg.n_fiber, points=_quotient_radii(cfg.R, cfg.n_fiber)[:, None]
                        * np.array([[1.0, 0.0]]))
    cls = Q.classes[_norm_correspondence(W, np.linalg.norm(Q.points, axis=1), Q.space.n)]
    corr = Correspondence(tuple((a, int(b)) for a, b in enumerate(cls)), len(W), Q.space.n)
    allowance = grid_mesh(W) + cfg.R / (cfg.n_fiber - 1)
    rows, bundle_rows = [], []
    for i in range(1, cfg.i_max + 1):
        M = Rescaled(base, 1.0 / i)
        Fi = fiber_metric_sample(M, NORTH, cfg.R, cfg.n_fiber, points=W)
        b = correspondence_distortion(Fi, Q.space, corr)
        rows.append(ConvergenceRow(i, b.gh_upper, 2 * np.pi * base.radius / i, allowance))
        if cfg.n_base > 1:
            rho = min(cfg.R, 0.9 * np.pi * base.radius / i)
            B = bundle_ball_sample(M, NORTH, rho, cfg.n_base, cfg.n_fiber, kind=None)
            radii = np.linalg.norm(B.fibers, axis=1)
            qcls = Q.classes[np.abs(radii[:, None] - np.linalg.norm(Q.points, axis=1)[None]).argmin(1)]
            bc = Correspondence(tuple((a, int(c)) for a, c in enumerate(qcls)), B.space.n, Q.space.n)
            bb = correspondence_distortion(B.space, Q.space, bc)
            sup_L = holonomic_space(M).group.norm.sup
            bundle_rows.append(ConvergenceRow(i, bb.gh_upper, 2 * rho + sup_L,
                                              grid_mesh(B.fibers) + cfg.R / (cfg.n_fiber - 1)))
    seq = HolonomicSequence.rescaled(holonomic_space(base))
    est = wane_set_estimate(seq, cfg.wane_threshold, cfg.wane_i_max)
    closure = wane_group_closure(est)
    bounds = [r.gh_bound for r in rows]
    inv = count_inversions(bounds)
    report = {
        "scenario": "totcollapse", "config": asdict(cfg), "allowance": allowance,
        "inversions": inv, "wane_label": closure.label, "wane_residual": closure.residual,
        "wane_elements": len(est), "bundle_rows": [asdict(r) for r in bundle_rows],
        "rate_note": "empirical; no convergence rate is asserted",
    }
    report["pass"] = bool(inv <= 1 and closure.label == "SO(2)" and all(r.passed for r in bundle_rows))
    return ScenarioResult("totcollapse", rows, report)


# ---------------------------------------------------------------------------
# prodcollapse
# ---------------------------------------------------------------------------

def _prod_manifold(variant: str, i: int):
    second = FlatTorus() if variant == "torus_torus" else RoundSphere(1.0)
    return Product(FlatTorus(), Rescaled(second, 1.0 / i))


def _prod_base_point(variant: str):
    return np.concatenate([[0.0, 0.0], [0.0, 0.0] if variant == "torus_torus" else NORTH])


def _prodcollapse_variant(cfg: ScenarioConfig, variant: str) -> dict:
    n1 = max(3, cfg.n_fiber // 2 + 1)
    W1 = ball_grid(2, cfg.R / np.sqrt(2), n1, kind="cartesian")
    if variant == "torus_torus":
        W2 = ball_grid(2, cfg.R / np.sqrt(2), n1, kind="cartesian")
        G = Trivial(4)
        limit_pts = product_grid(W1, W2)
    else:
        W2 = _polar_fiber(cfg.R / np.sqrt(2), cfg.n_fiber, cfg.n_angles)
        G = ProductGroup(Trivial(2), CircleSO2(2, (0, 1)))
        limit_pts = product_grid(W1, _quotient_radii(cfg.R / np.sqrt(2), cfg.n_fiber)[:, None] * [[1.0, 0.0]])
    W = product_grid(W1, W2)
    Q = quotient_sample(G, cfg.R, 0, points=limit_pts)
    # correspondence (w1, w2) -> class of (w1, |w2|)
    target = np.hstack([W[:, :2], np.linalg.norm(W[:, 2:], axis=1, keepdims=True) * [[1.0, 0.0]]]) \
        if variant != "torus_torus" else W
    tree_d = np.linalg.norm(target[:, None, :] - Q.points[None, :, :], axis=2)
    cls = Q.classes[tree_d.argmin(axis=1)]
    corr = Correspondence(tuple((a, int(b)) for a, b in enumerate(cls)), len(W), Q.space.n)
    allowance = grid_mesh(W) + (0.0 if variant == "torus_torus" else cfg.R / np.sqrt(2) / (cfg.n_fiber - 1))
    p = _prod_base_point(variant)
    rows, bundle_rows = [], []
    spaces = []
    for i in range(1, cfg.i_max + 1):
        M = _prod_manifold(variant, i)
        Fi = fiber_metric_sample(M, p, cfg.R, 0, points=W)
        b = correspondence_distortion(Fi, Q.space, corr)
        H = holonomic_space(M)
        spaces.append(H)
        sup_L = 0.0 if H.is_trivial else H.group.norm.sup
        rows.append(ConvergenceRow(i, b.gh_upper, sup_L, allowance))
        if cfg.n_base > 1 and variant == "torus_torus":
            bundle_rows.append(_prod_bundle_row(cfg, M, i))
    seq = HolonomicSequence(4, lambda i: holonomic_space(_prod_manifold(variant, i)), variant)
    est = wane_set_estimate(seq, cfg.wane_threshold, cfg.wane_i_max)
    closure = wane_group_closure(est)
    sphere_block_only = bool(np.allclose(est.elements[:, :2, :2], np.eye(2), atol=1e-12)
                             and np.allclose(est.elements[:, :2, 2:], 0, atol=1e-12))
    lim_pts = product_grid(W1[::max(1, len(W1) // 3)], W2[::max(1, len(W2) // 5)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lim = limit_semimetric(seq, lim_pts, cfg.i_max)
    q = quotient_by_zero(lim.sample, tol=1e-6) if variant == "torus_torus" else None
    degenerate = check_metric_axioms(lim.sample.dist).degenerate_pairs
    out = {
        "rows": rows, "bundle_rows": bundle_rows, "wane_label": closure.label,
        "wane_residual": closure.residual, "sphere_block_only": sphere_block_only,
        "degenerate_pairs": len(degenerate), "allowance": allowance,
        "identity_quotient": None if q is None else bool(len(q.representatives) == lim.sample.n),
    }
    expected = "trivial" if variant == "torus_torus" else "SO(2)[2,3]"
    ok = closure.label == expected and all(r.passed for r in rows + bundle_rows)
    if variant == "torus_torus":
        ok = ok and not degenerate
    else:
        ok = ok and sphere_block_only
    out["pass"] = bool(ok)
    return out


def _prod_bundle_row(cfg: ScenarioConfig, M: Product, i: int) -> ConvergenceRow:
    """Bundle ball of the product against the bundle ball of the first factor."""
    p = np.zeros(4)
    B = bundle_ball_sample(M, p, cfg.R, 2, 3)
    first = M.first
    pts1 = B.bases[:, :2]
    fib = B.fibers
    D_lim = sasaki_matrix(first, pts1, fib[:, :2])
    D_lim = np.sqrt(D_lim ** 2 + np.linalg.norm(fib[:, None, 2:] - fib[None, :, 2:], axis=2) ** 2)
    lim = FiniteMetricSpace(tuple(range(len(pts1))), D_lim, 0)
    b = correspondence_distortion(B.space, lim, Correspondence.identity(B.space.n))
    collapsed = unwrap_scale(M.second)[1] * float(np.max(unwrap_scale(M.second)[0].distance(
        B.bases[:, 2:], B.bases[:1, 2:])))
    return ConvergenceRow(i, b.gh_upper, 2 * 2 * collapsed, 0.0)


def run_prodcollapse(cfg: ScenarioConfig) -> ScenarioResult:
    variants = ("torus_torus", "torus_sphere") if cfg.variant == "both" else (cfg.variant,)
    for v in variants:
        if v not in ("torus_torus", "torus_sphere"):
            raise MalformedInputError(f"unknown prodcollapse variant {v!r}")
    results = {v: _prodcollapse_variant(cfg, v) for v in variants}
    rows = [r for v in variants for r in results[v]["rows"]]
    report = {"scenario": "prodcollapse", "config": asdict(cfg), "variants": {
        v: {k: ([asdict(r) for r in val] if k.endswith("rows") else val) for k, val in res.items()}
        for v, res in results.items()}}
    report["pass"] = all(res["pass"] for res in results.values())
    return ScenarioResult("prodcollapse", rows, report)


# ---------------------------------------------------------------------------
# equidistance and lower bounds
# ---------------------------------------------------------------------------

def _random_base_points(M, rng, n):
    inner, _ = unwrap_scale(M)
    if isinstance(inner, FlatTorus):
        return rng.random((n, 2)) @ inner.lattice.T
    if isinstance(inner, RoundSphere):
        w = rng.normal(size=(n, 2))
        w *= (rng.uniform(0, 2.5, n) / np.linalg.norm(w, axis=1))[:, None]
        return inner.exp(NORTH, w)
    raise DomainError("equidistance check supports tori and spheres")


def equidistance_report(M, cfg: ScenarioConfig, rng) -> dict:
    P = _random_base_points(M, rng, cfg.n_pairs)
    Q = _random_base_points(M, rng, cfg.n_pairs)
    W = ball_grid(M.k, cfg.R, 5, kind="cartesian")
    worst_min, worst_each, worst_lower = 0.0, 0.0, 0.0
    for p, q in zip(P, Q):
        d = float(M.distance(p, q))
        Wq = transported_fibers(M, p, q[None], W)[0]
        n = len(W)
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        D, _ = _pairs(M, np.broadcast_to(p, (n * n, p.size)), W[ii], np.broadcast_to(q, (n * n, q.size)), Wq[jj])
        D = D.reshape(n, n)
        worst_min = max(worst_min, abs(D.min() - d))
        worst_each = max(worst_each, float(np.abs(D.min(axis=1) - d).max()))
        lower = np.hypot(d, np.linalg.norm(W, axis=1)[:, None] - np.linalg.norm(Wq, axis=1)[None, :])
        worst_lower = max(worst_lower, float((lower - D).max()))
    return {"max_min_gap": worst_min, "max_pointwise_gap": worst_each,
            "max_lower_bound_violation": max(worst_lower, 0.0)}


def run_equidistance_check(cfg: ScenarioConfig) -> ScenarioResult:
    rng = np.random.default_rng(cfg.seed)
    geoms = [cfg.geometry] if cfg.geometry else [{"variant": "torus"}, {"variant": "sphere", "r": 1.0}]
    tol = max(cfg.tol, 1e-4) if cfg.tol < 1e-4 else cfg.tol
    out = {}
    ok = True
    for g in geoms:
        M = manifold_from_descriptor(g)
        rep = equidistance_report(M, cfg, rng)
        rep["pass"] = bool(rep["max_min_gap"] <= tol and rep["max_lower_bound_violation"] <= 1e-12)
        ok = ok and rep["pass"]
        out[g["variant"]] = rep
    report = {"scenario": "equidistance", "config": asdict(cfg), "tol": tol, "geometries": out, "pass": ok}
    rows = [ConvergenceRow(0, max(r["max_min_gap"] for r in out.values()), tol, 0.0)]
    return ScenarioResult("equidistance", rows, report)


# ---------------------------------------------------------------------------
# flat strip
# ---------------------------------------------------------------------------

def flat_strip(M: FlatTorus, p, direction_angle: float, length: float, height: float, n: int = 20):
    """Grid ``phi(t, s) = s * e`` over the geodesic from ``p`` in the given direction.

    Returns ``(bases, fibers, rect)`` where ``rect[j] = (t, s)``.
    """
    if length >= 0.5 * min(np.linalg.norm(M.lattice, axis=0)):
        raise DomainError("strip must be shorter than half the shortest lattice vector")
    e = np.array([np.cos(direction_angle), np.sin(direction_angle)])
    fiber_dir = np.array([-e[1], e[0]])
    t = np.linspace(0.0, length, n)
    s = np.linspace(0.0, height, n)
    T, S = np.meshgrid(t, s, indexing="ij")
    T, S = T.ravel(), S.ravel()
    bases = np.asarray(p, dtype=float) + T[:, None] * e
    fibers = S[:, None] * fiber_dir
    return bases, fibers, np.stack([T, S], 1)


def run_flat_strip_check(cfg: ScenarioConfig) -> ScenarioResult:
    M = manifold_from_descriptor(cfg.geometry or {"variant": "torus"})
    inner, _ = unwrap_scale(M)
    if not isinstance(inner, FlatTorus):
        raise DomainError("flat strip check needs a flat torus")
    length = 0.45 * min(np.linalg.norm(inner.lattice, axis=0))
    bases, fibers, rect = flat_strip(inner, np.zeros(2), 0.3, length, cfg.R, 20)
    D = sasaki_matrix(inner, bases, fibers)
    E = np.linalg.norm(rect[:, None] - rect[None], axis=2)
    dev = float(np.abs(D - E).max())
    tol = cfg.tol
    report = {"scenario": "flatstrip", "config": asdict(cfg), "max_deviation": dev, "strip_length": length,
              "pass": dev < tol}
    return ScenarioResult("flatstrip", [ConvergenceRow(0, dev, tol, 0.0)], report)


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def path_submetry(M, base_path_points, fiber_grids):
    """Submetry sample over explicit base points, fiber grid per base point."""
    bases = np.concatenate([np.repeat(b[None], len(W), 0) for b, W in zip(base_path_points, fiber_grids)])
    fibers = np.concatenate(fiber_grids)
    proj = np.concatenate([np.full(len(W), j) for j, W in enumerate(fiber_grids)])
    D = sasaki_matrix(M, bases, fibers)
    total = FiniteMetricSpace(tuple(range(len(bases))), D, 0)
    n = len(base_path_points)
    Bp = np.asarray(base_path_points)
    Db = np.array([[float(M.distance(Bp[a], Bp[b])) for b in range(n)] for a in range(n)])
    base = FiniteMetricSpace(tuple(range(n)), Db, 0)
    return SampledSubmetry(total, base, proj, np.linalg.norm(fibers, axis=1)), fibers


def refinement_levels(M, path_pts, start_vec, ring_radius, levels, tol, kind):
    """Endpoint fiber vectors of set-valued translation at each density."""
    out = []
    for n in levels:
        if kind == "grid":
            W = ball_grid(2, 1.0, n, kind="cartesian")
        else:
            ang = 2 * np.pi * np.arange(n) / n
            W = ring_radius * np.stack([np.cos(ang), np.sin(ang)], 1)
        grids = [W] + [transported_fibers(M, path_pts[0], np.asarray(path_pts[j:j + 1]), W)[0]
                       for j in range(1, len(path_pts))]
        S, fibers = path_submetry(M, path_pts, grids)
        start = int(np.argmin(np.linalg.norm(grids[0] - start_vec, axis=1)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyLiftWarning)
            res = parallel_translate_setvalued(S, list(range(len(path_pts))), start, tol)
        # express endpoints in the start fiber by transporting back
        T = M.transport(M.geodesic(path_pts[0], path_pts[-1]))
        ends = fibers[res.endpoints] @ T if res.endpoints else np.zeros((0, 2))
        lift_ok = all(is_horizontal(S, lift, tol) and constant_norm_check(S.norms, lift, 2 * tol + 1e-12)
                      for lift in res.lifts.values() if len(set(lift)) == len(lift))
        out.append((n, ends, lift_ok))
    return out


def run_refinement_study(cfg: ScenarioConfig) -> ScenarioResult:
    levels = [8, 16, 32, 64][: max(3, min(4, cfg.i_max))]
    tables = {}
    # torus: straight base path, grids nested by doubling
    T = FlatTorus()
    path_t = np.array([[0.05 * j, 0.03 * j] for j in range(6)])
    tor = refinement_levels(T, path_t, np.array([0.5, 0.0]), 1.0, [5, 9, 17], 1e-9, "grid")
    # collapsed sphere: a small geodesic loop sampled at its vertices
    i = cfg.i_max
    S = Rescaled(RoundSphere(1.0), 1.0 / i)
    loop = RoundSphere(1.0).exp(NORTH, np.array([[0.0, 0.0], [0.6, 0.0], [0.0, 0.6], [0.0, 0.0]]))
    sph = refinement_levels(S, loop, np.array([1.0, 0.0]), 1.0, levels, 0.05, "ring")
    for name, lv in (("torus", tor), ("collapsed_sphere", sph)):
        hd = []
        for (n_a, A, _), (n_b, B, _) in zip(lv, lv[1:]):
            if len(A) == 0 or len(B) == 0:
                hd.append(float("inf"))
                continue
            pts = np.vstack([A, B])
            X = euclidean_space(pts)
            hd.append(hausdorff_distance(X, range(len(A)), range(len(A), len(pts))))
        tables[name] = {"levels": [n for n, _, _ in lv], "endpoint_counts": [len(e) for _, e, _ in lv],
                        "hausdorff": hd,
                        "nonincreasing": bool(all(b <= a + 1e-12 for a, b in zip(hd, hd[1:]))),
                        "lifts_ok": bool(all(ok for _, _, ok in lv))}
    rows = [ConvergenceRow(j, h, tables["collapsed_sphere"]["hausdorff"][0], 0.0)
            for j, h in enumerate(tables["collapsed_sphere"]["hausdorff"])]
    report = {"scenario": "refinement", "config": asdict(cfg), "tables": tables,
              "note": "observational; no convergence rate is asserted",
              "pass": all(t["nonincreasing"] and t["lifts_ok"] for t in tables.values())}
    return ScenarioResult("refinement", rows, report)


RUNNERS = {
    "totcollapse": run_totcollapse,
    "prodcollapse": run_prodcollapse,
    "equidistance": run_equidistance_check,
    "flatstrip": run_flat_strip_check,
    "refinement": run_refinement_study,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    return RUNNERS[cfg.name](cfg)
