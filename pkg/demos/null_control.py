"""Steer a sine mode to (nearly) zero with a control on a disk around the origin.

Penalized HUM: the smaller the penalty, the smaller the terminal state and the
larger the control cost.  Run with ``python3 demos/null_control.py``.
"""
from degencontrol import (Ball, Box, CoefficientField, Discretization, build_graded_mesh,
                          hum_null_control, tag_regions)
from degencontrol.fields import sine_mode

mesh = build_graded_mesh(Box(-1, 1, -1, 1), 0.1, 2.0)
tags = tag_regions(mesh, Ball(0, 0, 0.4), Ball(0, 0, 0.5), 0.05, "interior")
disc = Discretization(mesh, tags, CoefficientField(1.0), T=0.5, dt=0.01)
z0 = sine_mode(mesh)
z0_norm = disc.norm_M(z0)

print("penalty   cg_iters  |z(T)|/|z0|   cost")
for penalty in (1e-2, 1e-3, 1e-4, 1e-5):
    res = hum_null_control(z0, penalty, disc)
    print(f"{penalty:7.0e}  {res.cg_iterations:8d}  {res.terminal_norm / z0_norm:11.3e}"
          f"  {res.control_cost:8.3f}")
print(f"free decay alone leaves |z(T)|/|z0| = {disc.norm_M(disc.forward(z0)[-1]) / z0_norm:.3f}")
