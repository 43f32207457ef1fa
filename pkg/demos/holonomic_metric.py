"""Holonomic distances on a plane with a Z/2 action and with the sphere's rotation group.

Run: python3 demos/holonomic_metric.py
"""

import numpy as np

from holonomy_lab.holonomic import (
    convexity_radius, holonomic_distance, holonomy_radius_at_zero, sign_space, sphere_space,
)

# Z/2 acting by -id, with the flip costing c = 1. For an antipodal pair the
# distance is the cheaper of walking straight (2|u|) or paying for the flip.
space = sign_space(2, 1.0)
for r in (0.2, 0.5, 1.0):
    u = np.array([r, 0.0])
    d = holonomic_distance(space, u, -u)
    print(f"|u| = {r:.1f}: d(u, -u) = {d.value:.3f}  (min(2|u|, c) = {min(2 * r, 1.0):.3f})")

# On the unit sphere the group is SO(2) with the loop-length norm. Near the
# origin nothing is gained by rotating: the metric is Euclidean out to the
# holonomy radius, which is smaller than the convexity radius.
S = sphere_space(1.0)
print(f"\nholonomy radius at 0: {holonomy_radius_at_zero(S):.6f}")
print(f"convexity radius:     {convexity_radius(S):.6f}")

ang = np.linspace(0, np.pi, 5)
for r in (2.0, 4.0):
    print(f"\nring of radius {r}")
    u = np.array([r, 0.0])
    for a in ang:
        v = r * np.array([np.cos(a), np.sin(a)])
        d = holonomic_distance(S, u, v)
        print(f"  angle {a:4.2f}: euclid {np.linalg.norm(u - v):.3f}  holonomic {d.value:.3f}")
