"""Set-valued parallel translation on sampled bundles.

On a flat torus each fiber sample has exactly one horizontal continuation.
When the sphere is shrunk, rotations become cheap and a single start spreads
over the whole ring of equal-norm samples.

Run: python3 demos/set_valued_translation.py
"""

import numpy as np

from holonomy_lab.bundles import FlatTorus, Rescaled, RoundSphere
from holonomy_lab.experiments import path_submetry
from holonomy_lab.parallelism import holonomy_monoid_sample, parallel_translate_setvalued

ang = 2 * np.pi * np.arange(8) / 8
ring = np.stack([np.cos(ang), np.sin(ang)], 1)

pts = np.array([[0.1, 0.1], [0.3, 0.2], [0.2, 0.4]])
S, _ = path_submetry(FlatTorus(), pts, [ring] * 3)
res = parallel_translate_setvalued(S, [0, 1, 2, 0], 0, 1e-6)
print(f"torus: start 0 -> endpoints {res.endpoints}")

sph = np.array([[0, 0, 1.0], [0.4, 0, 0.9], [0.1, 0.4, 0.9]])
sph /= np.linalg.norm(sph, axis=1, keepdims=True)
for lam in (1.0, 1 / 16, 1 / 64):
    S, _ = path_submetry(Rescaled(RoundSphere(), lam), sph, [ring] * 3)
    res = parallel_translate_setvalued(S, [0, 1, 2, 0], 0, 0.1, warn=False)
    rep = holonomy_monoid_sample(S, [[0, 1, 2, 0]], None, 0.1)
    print(f"sphere scaled by {lam:.4f}: start 0 -> {len(res.endpoints)} endpoints, "
          f"group witness {rep.group_witness}")
