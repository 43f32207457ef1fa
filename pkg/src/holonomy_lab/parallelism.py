"""Relations, sampled submetries and set-valued parallel translation.

A relation ``f`` from ``A`` to ``B`` is a set of pairs; ``compose(f, g)`` is
``g o f = {(a, c) : (a, b) in f, (b, c) in g for some b}`` and the
involution swaps pairs. On finite samples of a submetry ``E -> X`` a
discrete lift of a base path is a sequence of total-space samples over the
path; it is accepted when its length exceeds the base length by at most
``tol * (1 + base length)``.
"""

from __future__ import annotations

import heapq
import json
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DomainError, EmptyLiftWarning, MalformedInputError
from .metric_core import FiniteMetricSpace, SemiMetricSample

BEAM_WIDTH = 64


# ---------------------------------------------------------------------------
# relation algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Relation:
    domain: tuple
    codomain: tuple
    pairs: frozenset

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "codomain", tuple(self.codomain))
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        dom, cod = set(self.domain), set(self.codomain)
        bad = [p for p in self.pairs if p[0] not in dom or p[1] not in cod]
        if bad:
            raise MalformedInputError(f"pairs outside domain x codomain: {bad[:3]}")

    @classmethod
    def identity(cls, labels: Sequence[Hashable]) -> "Relation":
        labels = tuple(labels)
        return cls(labels, labels, frozenset((a, a) for a in labels))

    def image(self, a) -> set:
        return {c for d, c in self.pairs if d == a}

    def restrict(self, subset: Iterable) -> "Relation":
        s = set(subset)
        return Relation(self.domain, self.codomain, frozenset(p for p in self.pairs if p[0] in s))

    def is_bijection(self) -> bool:
        if len(self.domain) != len(self.codomain) or len(self.pairs) != len(self.domain):
            return False
        return {a for a, _ in self.pairs} == set(self.domain) and {b for _, b in self.pairs} == set(self.codomain)

    def is_partial_bijection(self) -> bool:
        """Single-valued and injective."""
        a = [x for x, _ in self.pairs]
        b = [y for _, y in self.pairs]
        return len(set(a)) == len(a) and len(set(b)) == len(b)

    def __le__(self, other: "Relation") -> bool:
        return self.pairs <= other.pairs

    def to_dict(self) -> dict:
        return {"domain": list(self.domain), "codomain": list(self.codomain),
                "pairs": sorted([list(p) for p in self.pairs], key=repr)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_jsonable)

    @classmethod
    def from_dict(cls, d: dict) -> "Relation":
        def h(x):
            return tuple(h(y) for y in x) if isinstance(x, list) else x
        try:
            return cls(tuple(h(x) for x in d["domain"]), tuple(h(x) for x in d["codomain"]),
                       frozenset((h(a), h(b)) for a, b in d["pairs"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"bad relation: {exc}") from None


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    raise TypeError(type(x))


def compose(f: Relation, g: Relation) -> Relation:
    """``g o f``: first ``f``, then ``g``."""
    if f.codomain != g.domain:
        raise DomainError("codomain of f must equal domain of g")
    out: dict = {}
    for b, c in g.pairs:
        out.setdefault(b, set()).add(c)
    pairs = frozenset((a, c) for a, b in f.pairs for c in out.get(b, ()))
    return Relation(f.domain, g.codomain, pairs)


def involution(f: Relation) -> Relation:
    return Relation(f.codomain, f.domain, frozenset((b, a) for a, b in f.pairs))


def random_relation(rng: np.random.Generator, domain: Sequence, codomain: Sequence,
                    density: float = 0.3) -> Relation:
    mask = rng.random((len(domain), len(codomain))) < density
    return Relation(domain, codomain, frozenset((domain[i], codomain[j]) for i, j in np.argwhere(mask)))


# ---------------------------------------------------------------------------
# sampled submetries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledSubmetry:
    total: SemiMetricSample
    base: SemiMetricSample
    proj: np.ndarray
    norms: np.ndarray | None = None

    def __post_init__(self):
        proj = np.asarray(self.proj, dtype=int)
        if proj.shape != (self.total.n,):
            raise MalformedInputError("proj needs one base index per total sample")
        if proj.min() < 0 or proj.max() >= self.base.n or len(np.unique(proj)) != self.base.n:
            raise DomainError("proj must be surjective onto the base samples")
        object.__setattr__(self, "proj", proj)
        if self.norms is not None:
            object.__setattr__(self, "norms", np.asarray(self.norms, dtype=float))

    def fiber(self, b: int) -> np.ndarray:
        return np.nonzero(self.proj == b)[0]


def submetry_from_bundle(sample, M) -> SampledSubmetry:
    """Submetry ``total -> base`` of a :class:`BundleSample`, with fiber norms."""
    B = sample.base_points
    n = len(B)
    i, j = np.triu_indices(n, 1)
    D = np.zeros((n, n))
    D[i, j] = M.distance(B[i], B[j])
    D[j, i] = D[i, j]
    base = FiniteMetricSpace(tuple(range(n)), D, 0)
    return SampledSubmetry(sample.space, base, sample.proj, np.linalg.norm(sample.fibers, axis=1))


@dataclass(frozen=True)
class SubmetryDefect:
    max_defect: float
    per_ball: list   # (center, radius, Hausdorff defect)


def submetry_defect(S: SampledSubmetry, n_balls: int = 20, seed: int = 0) -> SubmetryDefect:
    """Spot-check that projections of balls are balls.

    For random centers ``x`` and radii ``r`` the defect is the Hausdorff
    distance in the base between ``proj(B_r(x))`` and ``B_r(proj(x))``.
    """
    rng = np.random.default_rng(seed)
    diam = S.total.diameter
    out = []
    for _ in range(n_balls):
        x = int(rng.integers(S.total.n))
        r = float(rng.uniform(0.1, 0.6) * diam)
        img = np.unique(S.proj[S.total.dist[x] <= r])
        ball = np.nonzero(S.base.dist[S.proj[x]] <= r)[0]
        D = S.base.dist
        h = max(D[np.ix_(img, ball)].min(axis=1).max(), D[np.ix_(ball, img)].min(axis=1).max())
        out.append((x, r, float(h)))
    return SubmetryDefect(max(d for _, _, d in out), out)


def path_length(D: np.ndarray, path: Sequence[int]) -> float:
    p = np.asarray(path, dtype=int)
    return float(D[p[:-1], p[1:]].sum()) if len(p) > 1 else 0.0


def is_horizontal(S: SampledSubmetry, path: Sequence[int], tol: float) -> bool:
    """``|len(path) - len(proj path)| <= tol * (1 + len(path))``."""
    p = np.asarray(path, dtype=int)
    if len(p) > 1 and np.any(S.total.dist[p[:-1], p[1:]] <= 0):
        raise DomainError("consecutive path points must be at positive distance")
    total = path_length(S.total.dist, p)
    base = path_length(S.base.dist, S.proj[p])
    return abs(total - base) <= tol * (1.0 + total)


def constant_norm_check(norms, path: Sequence[int], tol: float) -> bool:
    v = np.asarray(norms, dtype=float)[np.asarray(path, dtype=int)]
    return bool(v.max() - v.min() <= tol) if len(v) else True


# ---------------------------------------------------------------------------
# lifts
# ---------------------------------------------------------------------------

@dataclass
class LiftResult:
    relation: Relation             # {start} x endpoints, within the end fiber
    endpoints: list
    lifts: dict                    # endpoint -> total-space index path
    slack: dict                    # endpoint -> length excess over the base path
    threshold: float


def parallel_translate_setvalued(S: SampledSubmetry, base_path: Sequence[int], start: int,
                                 tol: float, beam: int = BEAM_WIDTH, warn: bool = True) -> LiftResult:
    """Endpoints of discrete horizontal lifts of ``base_path`` starting at ``start``.

    Breadth-first over fibers: each state keeps the smallest slack (lift
    length minus base length) of any lift reaching it, and each stage keeps
    the ``beam`` states of least slack (ties by index). Slack increments are
    clamped at 0 and one threshold ``tol * (1 + base length)`` is used
    throughout, so a smaller ``tol`` never enlarges the endpoint set.
    """
    bp = np.asarray(base_path, dtype=int)
    if len(bp) == 0:
        raise MalformedInputError("base path is empty")
    if S.proj[start] != bp[0]:
        raise DomainError("start must lie over the first base point")
    Dt, Db = S.total.dist, S.base.dist
    L = path_length(Db, bp)
    thr = tol * (1.0 + L)
    states = {int(start): (0.0, (int(start),))}
    for a, b in zip(bp[:-1], bp[1:]):
        step = Db[a, b]
        fib = S.fiber(int(b))
        nxt: dict = {}
        for x, (s, path) in states.items():
            inc = np.maximum(Dt[x, fib] - step, 0.0)
            for y, ds in zip(fib, inc):
                s2 = s + float(ds)
                if s2 > thr:
                    continue
                y = int(y)
                if y not in nxt or (s2, path) < (nxt[y][0], nxt[y][1]):
                    nxt[y] = (s2, path + (y,))
        keep = heapq.nsmallest(beam, nxt.items(), key=lambda kv: (kv[1][0], kv[0]))
        states = dict(keep)
        if not states:
            break
    end_fiber = tuple(int(i) for i in S.fiber(int(bp[-1])))
    start_fiber = tuple(int(i) for i in S.fiber(int(bp[0])))
    ends = sorted(states)
    if not ends and warn:
        warnings.warn("no discrete horizontal lift found; sampling too coarse for tol",
                      EmptyLiftWarning, stacklevel=2)
    rel = Relation(start_fiber, end_fiber, frozenset((int(start), e) for e in ends))
    return LiftResult(rel, ends, {e: list(states[e][1]) for e in ends},
                      {e: states[e][0] for e in ends}, thr)


def translation_relation(S: SampledSubmetry, base_path: Sequence[int], tol: float,
                         starts: Iterable[int] | None = None, beam: int = BEAM_WIDTH) -> Relation:
    """Union of :func:`parallel_translate_setvalued` over ``starts`` (default: whole fiber)."""
    bp = np.asarray(base_path, dtype=int)
    fib0 = tuple(int(i) for i in S.fiber(int(bp[0])))
    fib1 = tuple(int(i) for i in S.fiber(int(bp[-1])))
    pairs = set()
    for x in (fib0 if starts is None else starts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyLiftWarning)
            pairs |= parallel_translate_setvalued(S, bp, int(x), tol, beam).relation.pairs
    return Relation(fib0, fib1, frozenset(pairs))


@dataclass
class MonoidReport:
    elements: list
    group_witness: bool
    counterexamples: list = field(default_factory=list)
    capped: bool = False

    def to_dict(self) -> dict:
        return {"elements": [e.to_dict() for e in self.elements], "group_witness": self.group_witness,
                "counterexamples": [e.to_dict() for e in self.counterexamples], "capped": self.capped}


def holonomy_monoid_sample(S: SampledSubmetry, loops: Sequence[Sequence[int]], starts: Iterable[int] | None,
                           tol: float, cap: int = 64) -> MonoidReport:
    """Relations of base loops at one point, closed under compose and involution up to ``cap``.

    ``group_witness`` is true iff every element is single-valued and
    injective (so ``f* o f`` and ``f o f*`` are identities on its domain and
    image) and every generator is defined on every start.
    """
    if not loops:
        raise MalformedInputError("need at least one loop")
    p = int(loops[0][0])
    for lp in loops:
        if lp[0] != p or lp[-1] != p:
            raise DomainError("loops must start and end at the same base point")
    st = None if starts is None else list(starts)
    gens = [translation_relation(S, lp, tol, st) for lp in loops]
    elems = {g.pairs: g for g in gens}
    for g in gens:
        elems.setdefault(involution(g).pairs, involution(g))
    frontier = list(elems.values())
    capped = False
    while frontier and not capped:
        new = []
        for f in frontier:
            for g in list(elems.values()):
                for h in (compose(f, g), compose(g, f)):
                    if h.pairs not in elems:
                        elems[h.pairs] = h
                        new.append(h)
                        if len(elems) >= cap:
                            capped = True
                            break
                if capped:
                    break
            if capped:
                break
        frontier = new
    items = list(elems.values())
    bad = [e for e in items if not e.is_partial_bijection()]
    start_set = set(gens[0].domain if st is None else st)
    bad += [g for g in gens if not start_set <= {a for a, _ in g.pairs}]
    return MonoidReport(items, not bad, bad[:5], capped)
