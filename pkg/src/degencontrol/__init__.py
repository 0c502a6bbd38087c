"""Finite element experiments for heat equations degenerating at an interior point.

Meshes and degenerate forms, implicit time stepping with exact discrete
adjoints, Carleman weight construction and evaluation, and penalized HUM
control synthesis.
"""
from .carleman import (build_eta_interior, build_eta_offcenter, carleman_sweep,
                       evaluate_carleman_case1, evaluate_carleman_case2, find_thresholds,
                       make_weights, select_epsilon, verify_weight)
from .control import (ControlResult, approximate_control, gramian_apply, hum_null_control,
                      observability_ratio, unique_continuation_probe)
from .errors import (AssemblyError, CaseViolation, ConvergenceError, MeshError, NestingViolation,
                     NoEpsilonFound, QuadratureError, WeightVerificationFailed)
from .evolution import (AdjointProblem, Discretization, ForwardProblem, SpaceTimeField,
                        duality_residual, solve_adjoint, solve_forward, verify_energy_estimate)
from .forms import (CoefficientField, assemble_degenerate_stiffness, assemble_mass, hardy_check,
                    weighted_h1_norm)
from .geometry import Ball, Box, parse_shape
from .mesh import Mesh, RegionTags, build_graded_mesh, tag_regions

__version__ = "0.1.0"
