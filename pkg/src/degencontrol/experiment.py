"""Declarative experiment configs and the pipelines behind each CLI subcommand.

Configs are plain ``key = value`` files.  Physical quantities carry their unit
in the key name (``T_seconds``, ``mesh_h_length``); there are no defaults for
them.  Unknown keys are rejected and every validation error names the field.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .carleman import (build_eta_interior, build_eta_offcenter, carleman_sweep, find_thresholds,
                       weight_diagnostics)
from .control import (approximate_control, hum_null_control, observability_ratio,
                      unique_continuation_probe)
from .errors import CaseViolation, MeshError, NestingViolation
from .evolution import Discretization
from .fields import cosine_eigenfunction, named_field, random_smooth_field, smooth_bump
from .forms import NAMED_FIELDS, CoefficientField
from .geometry import Box, parse_shape
from .mesh import build_graded_mesh, tag_regions

TASKS = ("sanity", "mesh", "solve", "carleman-sweep", "control", "observability",
         "verify-weights")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, msg):
        super().__init__(f"{field}: {msg}")
        self.field = field


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = None
    domain: str = None
    mesh_h_length: float = None
    mesh_grading: float = 1.0
    alpha: float = None
    A: str = "identity"
    sanity: bool = False
    omega: str = None
    omega0: str = None
    eps_length: float = None
    eps0_length: float = None
    case: str = None
    T_seconds: float = None
    dt_seconds: float = None
    delta_seconds: float = None
    scheme: str = "euler"
    s_list: tuple = ()
    lambda_list: tuple = ()
    samples: int = 20
    penalty_list: tuple = ()
    initial_state: str = "sine 1 1"
    target_state: str = None
    terminal_bound_relative: float = None
    concentration_radii_length: tuple = ()
    uc_samples: int = 100
    uc_threshold: float = 1e-8
    refinements: int = 3
    seed: int = 0
    out_dir: str = None

    # -- loading ------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(key, "unknown key")
            if key in values:
                raise ConfigError(key, "duplicate key")
            values[key] = _convert(key, kinds[key], val)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        return cls.from_text(text)

    def require(self, *names):
        for name in names:
            val = getattr(self, name)
            if val is None or val == ():
                raise ConfigError(name, "required for this task")


def _convert(key, kind, val):
    try:
        if kind == "float":
            return float(val)
        if kind == "int":
            return int(val)
        if kind == "bool":
            return _bool(val)
        if kind == "tuple":
            return _floats(val)
        return val
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"case1_null.cfg"``."""
    return Path(str(resources.files("degencontrol") / "configs" / name))


# -- setup ----------------------------------------------------------------------

@dataclass(eq=False)
class Setup:
    cfg: ExperimentConfig
    mesh: object
    coeff: CoefficientField
    tags: object = None
    disc: Discretization = None


def _shape(cfg, name):
    try:
        return parse_shape(getattr(cfg, name))
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from exc


def build_coefficient(cfg: ExperimentConfig) -> CoefficientField:
    cfg.require("alpha")
    try:
        if cfg.A in NAMED_FIELDS:
            return CoefficientField.named(cfg.A, cfg.alpha, cfg.sanity)
        entries = _floats(cfg.A)
        if len(entries) != 4:
            raise ValueError("A must be a named field or four matrix entries")
        return CoefficientField(cfg.alpha, np.reshape(entries, (2, 2)), sanity=cfg.sanity)
    except ValueError as exc:
        field_name = "alpha" if "alpha" in str(exc) else "A"
        raise ConfigError(field_name, str(exc)) from exc


def build_setup(cfg: ExperimentConfig, regions=True, time_grid=True) -> Setup:
    """Mesh, coefficients, region tags and time grid, re-validating cross-field constraints."""
    cfg.require("domain", "mesh_h_length")
    domain = _shape(cfg, "domain")
    if not cfg.mesh_h_length > 0:
        raise ConfigError("mesh_h_length", "must be positive")
    if not cfg.mesh_grading >= 1:
        raise ConfigError("mesh_grading", "must be >= 1")
    try:
        mesh = build_graded_mesh(domain, cfg.mesh_h_length, cfg.mesh_grading)
    except MeshError as exc:
        raise ConfigError("domain", str(exc)) from exc
    coeff = build_coefficient(cfg)
    setup = Setup(cfg, mesh, coeff)
    if regions:
        cfg.require("omega", "omega0", "eps_length", "case")
        if cfg.case not in ("interior", "offcenter"):
            raise ConfigError("case", "must be 'interior' or 'offcenter'")
        try:
            setup.tags = tag_regions(mesh, _shape(cfg, "omega"), _shape(cfg, "omega0"),
                                     cfg.eps_length, cfg.case, cfg.eps0_length)
        except CaseViolation as exc:
            name = "eps0_length" if "eps0" in str(exc) and "eps=" not in str(exc) else "eps_length"
            if "omega" in str(exc) or "triangles" in str(exc):
                name = "omega0" if cfg.case == "interior" else "omega"
            raise ConfigError(name, str(exc)) from exc
        except NestingViolation as exc:
            raise ConfigError("omega", str(exc)) from exc
    if time_grid:
        cfg.require("T_seconds", "dt_seconds")
        try:
            setup.disc = Discretization(mesh, setup.tags, coeff, cfg.T_seconds, cfg.dt_seconds,
                                        cfg.scheme)
        except ValueError as exc:
            name = "scheme" if "scheme" in str(exc) else "dt_seconds"
            raise ConfigError(name, str(exc)) from exc
        if cfg.delta_seconds is not None and not 0 < cfg.delta_seconds < cfg.T_seconds / 2:
            raise ConfigError("delta_seconds", "must lie in (0, T/2)")
    return setup


def _field(setup, name):
    try:
        return named_field(setup.mesh, getattr(setup.cfg, name))
    except (ValueError, IndexError) as exc:
        raise ConfigError(name, str(exc)) from exc


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- tasks --------------------------------------------------------------------

def task_mesh(cfg, out: Path, threads=1):
    setup = build_setup(cfg, regions=cfg.omega is not None, time_grid=False)
    masks = setup.tags.masks(setup.mesh) if setup.tags is not None else None
    from .forms import assemble_degenerate_stiffness, assemble_mass

    io.write_mesh(out / "mesh.txt", setup.mesh, masks)
    io.write_coo(out / "mass.coo", assemble_mass(setup.mesh))
    io.write_coo(out / "stiffness.coo", assemble_degenerate_stiffness(setup.mesh, setup.coeff))
    return [out / "mesh.txt", out / "mass.coo", out / "stiffness.coo"], {}


def task_solve(cfg, out: Path, threads=1):
    from .evolution import norm_series

    setup = build_setup(cfg, regions=cfg.omega is not None)
    z = setup.disc.forward(_field(setup, "initial_state"))
    io.write_trajectory(out / "trajectory.txt", z.values, z.dt)
    io.write_table(out / "norms.csv", io.NORM_COLUMNS, norm_series(setup.disc, z).tolist())
    return [out / "trajectory.txt", out / "norms.csv"], {}


def sanity_convergence(cfg: ExperimentConfig):
    """Observed orders for ``exp(-2t) cos x1 cos x2`` on ``(-pi/2, pi/2)^2`` with ``alpha = 0``.

    Space: Crank-Nicolson at ``dt = T/2000`` while halving ``h``.  Time:
    implicit Euler on the finest mesh while halving ``dt``.  Errors are
    L2 at the final time, measured against the exact solution by quadrature.
    Returns rows ``(kind, parameter, error, order)``.
    """
    cfg.require("mesh_h_length", "T_seconds", "dt_seconds")
    half = np.pi / 2
    T, h0, dt0, n = cfg.T_seconds, cfg.mesh_h_length, cfg.dt_seconds, cfg.refinements
    coeff = CoefficientField(0.0, sanity=True)

    def error(h, dt, scheme):
        mesh = build_graded_mesh(Box(-half, half, -half, half), h)
        disc = Discretization(mesh, None, coeff, T, dt, scheme)
        zT = disc.forward(mesh.interpolate(cosine_eigenfunction))[-1]
        pts = mesh.quadrature_points()
        diff = mesh.evaluate_at_quadrature(zT) - np.exp(-2 * T) * cosine_eigenfunction(pts)
        return float(np.sqrt(np.sum(mesh.quadrature_weights() * diff**2)))

    rows = []
    hs = [h0 / 2**k for k in range(n + 1)]
    errs = [error(h, T / 2000, "crank-nicolson") for h in hs]
    rows += _with_orders("space", hs, errs)
    dts = [dt0 / 2**k for k in range(n + 1)]
    errs = [error(hs[-1], dt, "euler") for dt in dts]
    rows += _with_orders("time", dts, errs)
    return rows


def _with_orders(kind, params, errs):
    rows = [(kind, params[0], errs[0], 0.0)]
    for k in range(1, len(params)):
        order = np.log(errs[k - 1] / errs[k]) / np.log(params[k - 1] / params[k])
        rows.append((kind, params[k], errs[k], float(order)))
    return rows


def task_sanity(cfg, out: Path, threads=1):
    rows = sanity_convergence(cfg)
    io.write_table(out / "convergence.csv", ("kind", "parameter", "error", "order"), rows)
    return [out / "convergence.csv"], {"rows": rows}


def build_weight(setup: Setup, verify=True):
    build = build_eta_interior if setup.tags.case == "interior" else build_eta_offcenter
    return build(setup.mesh, setup.tags, setup.coeff, verify=verify)


def task_verify_weights(cfg, out: Path, threads=1):
    setup = build_setup(cfg, time_grid=False)
    eta = build_weight(setup, verify=True)
    c_star, slope = weight_diagnostics(eta, setup.mesh, setup.tags, setup.coeff)
    grad_min = c_star if eta.case == "interior" else float(np.sqrt(c_star))
    diag = {"case": eta.case, "eps": eta.eps, "eta_sup": eta.sup, "min_gradient_quantity": grad_min,
            "c_star": c_star, "min_boundary_minus_dn": -slope}
    rows = [(k, v) for k, v in diag.items() if k != "case"]
    io.write_table(out / "weights.csv", ("quantity", "value"), rows)
    io.write_trajectory(out / "eta.txt", eta.values[None], 0.0)
    return [out / "weights.csv", out / "eta.txt"], {"diagnostics": diag}


def _random_samples(setup, n, seed):
    rng = np.random.default_rng(seed)
    return [random_smooth_field(setup.mesh, rng) for _ in range(n)]


def task_carleman_sweep(cfg, out: Path, threads=1):
    cfg.require("s_list", "lambda_list")
    setup = build_setup(cfg)
    eta = build_weight(setup, verify=True)
    disc = setup.disc
    samples = [disc.adjoint(wT) for wT in _random_samples(setup, cfg.samples, cfg.seed)]
    grid = [(s, lam) for s in cfg.s_list for lam in cfg.lambda_list]

    def one(point):
        s, lam = point
        return carleman_sweep(disc, setup.tags, eta, samples, [s], [lam], cfg.delta_seconds)

    rows = [r for chunk in _map(one, grid, threads) for r in chunk]
    io.write_table(out / "sweep.csv", io.SWEEP_COLUMNS, io.sweep_rows(rows))
    io.write_trajectory(out / "eta.txt", eta.values[None], 0.0)
    thr = find_thresholds(rows)
    return [out / "sweep.csv", out / "eta.txt"], {"thresholds": thr, "rows": rows}


def task_control(cfg, out: Path, threads=1):
    cfg.require("penalty_list")
    setup = build_setup(cfg)
    disc = setup.disc
    z0 = _field(setup, "initial_state")
    if setup.tags.case == "offcenter":
        cfg.require("target_state")
        target = _field(setup, "target_state")
    penalties = [float(p) for p in cfg.penalty_list]
    if any(not p > 0 for p in penalties):
        raise ConfigError("penalty_list", "penalties must be positive")

    def one(p):
        t0 = time.perf_counter()
        if setup.tags.case == "interior":
            res = hum_null_control(z0, p, disc)
        else:
            res = approximate_control(z0, target, p, disc)
        return res, time.perf_counter() - t0

    results = _map(one, penalties, threads)
    rows, files = [], []
    for k, (res, _) in enumerate(results):
        rows.append((setup.tags.case, res.penalty, res.cg_iterations, res.terminal_norm,
                     res.control_cost))
        path = out / f"control_{k}.txt"
        io.write_trajectory(path, res.g.values, disc.dt)
        files.append(path)
    io.write_table(out / "control.csv", io.CONTROL_COLUMNS, rows)
    summary = {"results": [r for r, _ in results], "z0_norm": disc.norm_M(z0),
               "wall_time": [w for _, w in results]}
    if setup.tags.case == "offcenter":
        zf = disc.forward(z0)[-1]
        summary["initial_miss"] = disc.norm_M(target - zf)
    return [out / "control.csv", *files], summary


def check_terminal_bound(cfg, summary):
    """Interior case: ``terminal_norm <= bound * ||z0||_M`` at every penalty."""
    if cfg.terminal_bound_relative is None:
        return True
    ref = summary.get("initial_miss", summary["z0_norm"])
    return all(r.terminal_norm <= cfg.terminal_bound_relative * ref for r in summary["results"])


def concentrated_samples(setup, radii):
    return [setup.mesh.interpolate(lambda p, r=r: smooth_bump(p, (0.0, 0.0), r)) for r in radii]


def task_observability(cfg, out: Path, threads=1):
    setup = build_setup(cfg)
    disc = setup.disc
    rows = []
    samples = _random_samples(setup, cfg.samples, cfg.seed)
    for k, ratio in enumerate(observability_ratio(samples, disc).ratios):
        rows.append(("random", k, 0.0, ratio))
    radii = cfg.concentration_radii_length
    if radii:
        rep = observability_ratio(concentrated_samples(setup, radii), disc)
        for k, (r, ratio) in enumerate(zip(radii, rep.ratios)):
            rows.append(("concentrated", k, r, ratio))
    io.write_table(out / "observability.csv", ("kind", "sample", "radius", "ratio"), rows)
    probes = [unique_continuation_probe(wT, disc, cfg.uc_threshold)
              for wT in _random_samples(setup, cfg.uc_samples, cfg.seed + 1)]
    io.write_table(out / "continuation.csv", ("sample", "omega_energy", "global_energy", "flag"),
                   [(k, p.omega_energy, p.global_energy, p.flag) for k, p in enumerate(probes)])
    return [out / "observability.csv", out / "continuation.csv"], {"rows": rows, "probes": probes}


TASK_FUNCS = {
    "sanity": task_sanity,
    "mesh": task_mesh,
    "solve": task_solve,
    "carleman-sweep": task_carleman_sweep,
    "control": task_control,
    "observability": task_observability,
    "verify-weights": task_verify_weights,
}


def run_task(cfg: ExperimentConfig, task: str | None = None, out_dir=None, seed=None,
             threads=1):
    """Run one task, write its artifacts plus ``manifest.json``; returns ``(files, summary)``."""
    task = task or cfg.task
    if task not in TASK_FUNCS:
        raise ConfigError("task", f"must be one of {', '.join(TASKS)}")
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    out = Path(out_dir or cfg.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    files, summary = TASK_FUNCS[task](cfg, out, threads)
    extra = {"task": task, "seed": cfg.seed}
    if "wall_time" in summary:
        extra["wall_time"] = summary["wall_time"]
    io.write_manifest(out, files, extra)
    summary["files"] = files
    return files, summary
