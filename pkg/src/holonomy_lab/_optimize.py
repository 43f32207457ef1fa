"""Deterministic one-dimensional global minimization.

Every infimum over a one-parameter family in this package goes through
:func:`grid_minimize`: evaluate on a fixed grid, keep the best few grid
local minima, then run golden-section search inside each bracket. The grid
is fixed by its size, so results are reproducible bit for bit.

Objectives are vectorized over *problems*: ``f(x, idx)`` receives an array
``x`` of shape ``(len(idx), m)`` and the integer index array ``idx`` of the
problems being evaluated, and returns values of the same shape as ``x``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

GRID_SIZE = 2048
XTOL = 1e-10
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
# Max number of float64 cells evaluated per chunk (problems x grid).
_CHUNK_CELLS = 1 << 22

Objective = Callable[[np.ndarray, np.ndarray], np.ndarray]


def golden_section(f: Objective, a: np.ndarray, b: np.ndarray, idx: np.ndarray,
                   xtol: float = XTOL, maxiter: int = 200):
    """Vectorized golden-section search on the brackets ``[a, b]``.

    ``a`` and ``b`` have shape ``(P, S)`` for ``P`` problems and ``S`` starts.
    Returns ``(x, fx)`` of the same shape.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c, idx)
    fd = f(d, idx)
    for _ in range(maxiter):
        if np.all(b - a <= xtol):
            break
        left = fc <= fd
        # left: minimum in [a, d]; right: minimum in [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_x = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        new_f = f(new_x, idx)
        d_next = np.where(left, c, new_x)
        fd_next = np.where(left, fc, new_f)
        c = np.where(left, new_x, d)
        fc = np.where(left, new_f, fd)
        d, fd = d_next, fd_next
    x = np.where(fc <= fd, c, d)
    fx = np.minimum(fc, fd)
    return x, fx


def make_grid(lo: float, hi: float, n_grid: int = GRID_SIZE,
              include: tuple[float, ...] = ()) -> np.ndarray:
    grid = np.linspace(lo, hi, n_grid)
    extra = [p for p in include if lo <= p <= hi]
    if extra:
        grid = np.unique(np.concatenate([grid, extra]))
    return grid


def grid_minimize(f: Objective, lo: float, hi: float, n_problems: int,
                  n_grid: int = GRID_SIZE, n_starts: int = 3, xtol: float = XTOL,
                  include: tuple[float, ...] = (), f_grid: Objective | None = None):
    """Global 1-D minimization of ``n_problems`` objectives on ``[lo, hi]``.

    Returns ``(xmin, fmin)``, each of shape ``(n_problems,)``. The grid value
    is kept whenever refinement does not improve on it, so the result never
    exceeds the best grid value. ``f_grid``, if given, must agree with ``f``
    on the grid; it lets callers reuse cached grid evaluations.
    """
    grid = make_grid(lo, hi, n_grid, include)
    G = grid.size
    xmin = np.empty(n_problems)
    fmin = np.empty(n_problems)
    chunk = max(1, _CHUNK_CELLS // G)
    for start in range(0, n_problems, chunk):
        idx = np.arange(start, min(n_problems, start + chunk))
        P = idx.size
        vals = (f_grid or f)(np.broadcast_to(grid, (P, G)), idx)
        left = np.concatenate([np.full((P, 1), np.inf), vals[:, :-1]], axis=1)
        right = np.concatenate([vals[:, 1:], np.full((P, 1), np.inf)], axis=1)
        masked = np.where((vals <= left) & (vals <= right), vals, np.inf)
        S = min(n_starts, G)
        if S < G:
            starts = np.argpartition(masked, S - 1, axis=1)[:, :S]
        else:
            starts = np.broadcast_to(np.arange(G), (P, G))
        lo_i = np.clip(starts - 1, 0, G - 1)
        hi_i = np.clip(starts + 1, 0, G - 1)
        xs, fs = golden_section(f, grid[lo_i], grid[hi_i], idx, xtol=xtol)
        best_grid = np.argmin(vals, axis=1)
        gx = grid[best_grid]
        gf = vals[np.arange(P), best_grid]
        # unused starts (no local minimum) evaluate to garbage-free values anyway
        k = np.argmin(fs, axis=1)
        rx = xs[np.arange(P), k]
        rf = fs[np.arange(P), k]
        use_grid = gf <= rf
        xmin[idx] = np.where(use_grid, gx, rx)
        fmin[idx] = np.where(use_grid, gf, rf)
    return xmin, fmin


def minimize_scalar_on_grid(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                            n_grid: int = GRID_SIZE, xtol: float = XTOL,
                            include: tuple[float, ...] = ()):
    """Single-problem convenience wrapper around :func:`grid_minimize`."""
    x, fx = grid_minimize(lambda x, idx: g(x), lo, hi, 1, n_grid=n_grid,
                          xtol=xtol, include=include)
    return float(x[0]), float(fx[0])
