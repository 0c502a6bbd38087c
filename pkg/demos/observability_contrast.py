"""Observability ratios for adjoint states concentrating at the degeneracy.

When the control disk contains the origin the ratio stays bounded.  When it
does not, states concentrated at the origin are seen poorly and the ratio
grows as the concentration radius shrinks.  Run with
``python3 demos/observability_contrast.py``.
"""
from degencontrol import (Ball, Box, CoefficientField, Discretization, build_graded_mesh,
                          observability_ratio, tag_regions)
from degencontrol.fields import smooth_bump

mesh = build_graded_mesh(Box(-1, 1, -1, 1), 0.1, 2.0)
coeff = CoefficientField(1.5)
layouts = {
    "interior": tag_regions(mesh, Ball(0, 0, 0.4), Ball(0, 0, 0.5), 0.05, "interior"),
    "offcenter": tag_regions(mesh, Ball(0.5, 0, 0.15), Ball(0.5, 0, 0.3), 0.05, "offcenter"),
}
radii = (0.4, 0.2, 0.1)
samples = [mesh.interpolate(lambda p, r=r: smooth_bump(p, (0, 0), r)) for r in radii]

for name, tags in layouts.items():
    disc = Discretization(mesh, tags, coeff, T=0.5, dt=0.01)
    ratios = observability_ratio(samples, disc).ratios
    cells = "  ".join(f"r={r:.2f}: {q:8.3f}" for r, q in zip(radii, ratios))
    print(f"{name:9s}  {cells}")
