"""Tangent planes of shrinking spheres converge to the cone R^2 / SO(2).

Run: python3 demos/collapsing_sphere.py
"""

from holonomy_lab.experiments import ScenarioConfig, run_scenario

res = run_scenario(ScenarioConfig("totcollapse", i_max=12))
print(" i   GH upper bound   budget 2pi/i")
for r in res.rows:
    print(f"{r.i:2d}   {r.gh_bound:14.4f}   {r.budget:12.4f}   {'ok' if r.passed else 'over'}")
print(f"\nsampling allowance {res.report['allowance']:.4f}, inversions {res.report['inversions']}")
print(f"wane group of the sequence: {res.report['wane_label']} "
      f"(residual {res.report['wane_residual']:.1e})")
