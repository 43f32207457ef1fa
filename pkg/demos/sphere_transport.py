"""Parallel transport on the round sphere, the length norm and the polygon check.

Run: python3 demos/sphere_transport.py
"""

import numpy as np

from holonomy_lab.bundles import RoundSphere, length_norm_estimate, loop_holonomy, polygon_challenge
from holonomy_lab.quotients import rotation_2d

S = RoundSphere(1.0)
north = np.array([0.0, 0.0, 1.0])

# A latitude loop of angular radius rho rotates vectors by the enclosed area.
for rho in (0.3, 0.8, 1.5):
    H = loop_holonomy(S, north, S.latitude_loop(north, rho))
    angle = np.arctan2(H[1, 0], H[0, 0])
    expected = 2 * np.pi * (1 - np.cos(rho))
    print(f"rho {rho:.1f}: holonomy angle {angle:+.4f}, enclosed area mod 2pi {np.angle(np.exp(1j * expected)):+.4f}")

# Shortest loops realizing a rotation, against the closed form.
print()
for theta in (0.25, 1.0, 2.0, np.pi):
    c = length_norm_estimate(S, north, rotation_2d(theta))
    print(f"theta {theta:.2f}: loop length {c.value:.6f}, sqrt(theta(4pi - theta)) "
          f"{np.sqrt(theta * (4 * np.pi - theta)):.6f}")

# Geodesic polygons never beat the latitude circles.
ch = polygon_challenge(S, north, n_random=200)
print(f"\n{len(ch.lengths)} polygons, largest undercut {ch.max_undercut:.2e} (negative means none)")
