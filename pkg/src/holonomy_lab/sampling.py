"""Deterministic point grids in Euclidean balls."""

from __future__ import annotations

import numpy as np


def ball_grid(k: int, R: float, n: int, kind: str = "polar", n_angles: int | None = None) -> np.ndarray:
    """Grid of points of the closed ball ``B_R(0)`` in ``R^k``, origin first.

    ``kind="polar"`` (``k == 2`` only) gives the origin plus ``n - 1`` equally
    spaced rings of ``n_angles`` points each (default ``n``), so ``n = 1`` is
    the origin alone. ``kind="cartesian"`` gives ``n`` points per axis on the
    cube inscribed in the ball (``n`` odd keeps the origin on the grid).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind == "polar":
        if k != 2:
            raise ValueError("polar grids are two-dimensional")
        m = n if n_angles is None else n_angles
        pts = [np.zeros(2)]
        for j in range(1, n):
            r = R * j / (n - 1)
            ang = 2 * np.pi * np.arange(m) / m
            pts.extend(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
        return np.array(pts)
    if kind == "cartesian":
        if n == 1:
            return np.zeros((1, k))
        h = R / np.sqrt(k)
        axis = np.linspace(-h, h, n)
        mesh = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
        # origin first for a well-defined base point
        norms = np.linalg.norm(mesh, axis=1)
        order = np.lexsort((np.arange(len(mesh)), norms))
        return mesh[order]
    raise ValueError(f"unknown grid kind {kind!r}")


def product_grid(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """All concatenations ``(a, b)`` of rows, ``a`` varying slowest."""
    a = np.repeat(first, len(second), axis=0)
    b = np.tile(second, (len(first), 1))
    return np.hstack([a, b])


def grid_mesh(points: np.ndarray) -> float:
    """Largest nearest-neighbour distance in a point grid."""
    from scipy.spatial import cKDTree

    if len(points) < 2:
        return 0.0
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].max())
