"""Both sides of the interior-case weighted estimate along an (s, lambda) path.

The left side contains the local term of the right side, so with unit
constants the ratio never drops below one; it approaches one as lambda grows
because the local term comes to dominate.  Run with
``python3 demos/carleman_ratio.py``.
"""
import numpy as np

from degencontrol import (Ball, Box, CoefficientField, Discretization, build_graded_mesh,
                          tag_regions)
from degencontrol.carleman import build_eta_interior, evaluate_carleman_case1, make_weights
from degencontrol.fields import random_smooth_field

mesh = build_graded_mesh(Box(-1, 1, -1, 1), 0.1)
tags = tag_regions(mesh, Ball(0, 0, 0.4), Ball(0, 0, 0.5), 0.05, "interior")
coeff = CoefficientField(1.0)
disc = Discretization(mesh, tags, coeff, T=0.5, dt=0.01)
eta = build_eta_interior(mesh, tags, coeff)
w = disc.adjoint(random_smooth_field(mesh, np.random.default_rng(0)))

for s, lam in ((1, 0.5), (1, 2), (1, 8), (8, 8)):
    ev = evaluate_carleman_case1(disc, w, None, make_weights(eta, s, lam, disc.T, dt=disc.dt), tags)
    print(f"s={s:<2} lambda={lam:<4} ratio={ev.ratio:.4f}")
