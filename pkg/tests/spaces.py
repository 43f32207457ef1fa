"""Random holonomic spaces with valid group-norms, for property tests."""

from __future__ import annotations

import numpy as np

from holonomy_lab.holonomic import (
    CircleNormedGroup, FiniteNormedGroup, HolonomicSpace, SphereLengthNorm, TableNorm,
    sign_space, trivial_space,
)
from holonomy_lab.quotients import plane_rotation

KINDS = ("trivial", "sign", "cyclic", "circle")


def _concave_profile(rng, n=9):
    """Increasing concave samples on [0, pi] starting at 0: a subadditive norm profile."""
    phi = np.linspace(0.0, np.pi, n)
    slopes = np.sort(rng.uniform(0.05, 2.0, n - 1))[::-1]
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(phi))])
    return np.stack([phi, vals], 1)


def random_orthonormal_plane(rng, k):
    Q, _ = np.linalg.qr(rng.normal(size=(k, 2)))
    return Q


def random_space(rng: np.random.Generator, kind: str | None = None, k: int | None = None) -> HolonomicSpace:
    kind = kind or KINDS[rng.integers(len(KINDS))]
    k = k or int(rng.integers(2, 5))
    if kind == "trivial":
        return trivial_space(k)
    if kind == "sign":
        return sign_space(k, float(rng.uniform(0.1, 3.0)))
    if kind == "cyclic":
        n = int(rng.integers(2, 13))
        plane = tuple(sorted(rng.choice(k, 2, replace=False).tolist()))
        # L(g^m) = f(cyclic distance of m), f increasing and subadditive
        c, alpha = rng.uniform(0.1, 2.0), rng.uniform(0.3, 1.0)
        m = np.arange(n)
        dist = np.minimum(m, n - m)
        mats = plane_rotation(k, plane, 2 * np.pi * m / n)
        return HolonomicSpace(k, FiniteNormedGroup.from_matrices(mats, c * dist ** alpha))
    if kind == "circle":
        basis = random_orthonormal_plane(rng, k)
        if rng.random() < 0.5:
            norm = SphereLengthNorm(float(rng.uniform(0.2, 2.0)))
        else:
            norm = TableNorm(_concave_profile(rng))
        return HolonomicSpace(k, CircleNormedGroup(k, norm, basis))
    raise ValueError(kind)
