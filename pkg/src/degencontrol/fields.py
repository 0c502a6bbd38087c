"""Nodal test fields: random smooth samples, bumps, analytic fixtures."""
import numpy as np

from .geometry import Ball, Box
from .mesh import Mesh


def smooth_bump(pts, center, radius, power=3):
    """Compactly supported ``(1 - |x - c|^2 / rho^2)_+^power``."""
    r2 = np.sum((np.asarray(pts) - np.asarray(center)) ** 2, axis=-1) / radius**2
    return np.clip(1.0 - r2, 0.0, None) ** power


def gaussian(pts, center, width):
    r2 = np.sum((np.asarray(pts) - np.asarray(center)) ** 2, axis=-1)
    return np.exp(-r2 / (2 * width**2))


def random_smooth_field(mesh: Mesh, rng: np.random.Generator, n_bumps=4, width=(0.15, 0.4)):
    """Sum of random Gaussian bumps times a boundary bubble, zero on the boundary."""
    dom = mesh.domain
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    centers = []
    while len(centers) < n_bumps:
        c = rng.uniform(lo, hi)
        if dom is None or dom.contains(c[None])[0]:
            centers.append(c)
    amps = rng.normal(size=n_bumps)
    widths = rng.uniform(*width, size=n_bumps)
    bubble = dom.bubble if dom is not None else (lambda p: np.ones(len(p)))

    def f(p):
        val = sum(a * gaussian(p, c, s) for a, c, s in zip(amps, centers, widths))
        return val * bubble(p)

    return mesh.interpolate(f)


def random_compact_field(mesh: Mesh, rng: np.random.Generator, n_bumps=3, margin=0.05):
    """Sum of random compactly supported bumps whose supports stay inside the domain."""
    dom = mesh.domain
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    parts = []
    while len(parts) < n_bumps:
        c = rng.uniform(lo, hi)
        d = float(dom.boundary_distance(c[None])[0]) if dom is not None else np.inf
        if d <= 2 * margin:
            continue
        rho = rng.uniform(margin, min(d - margin, 0.6))
        parts.append((rng.normal(), c, rho))
    return mesh.interpolate(lambda p: sum(a * smooth_bump(p, c, r) for a, c, r in parts))


def sine_mode(mesh: Mesh, kx=1, ky=1):
    """``sin(kx pi (x - x0)/Lx) sin(ky pi (y - y0)/Ly)`` on a box domain."""
    dom = mesh.domain
    if not isinstance(dom, Box):
        raise ValueError("sine modes need a box domain")
    return mesh.interpolate(lambda p: np.sin(kx * np.pi * (p[:, 0] - dom.x0) / (dom.x1 - dom.x0))
                            * np.sin(ky * np.pi * (p[:, 1] - dom.y0) / (dom.y1 - dom.y0)))


def cosine_eigenfunction(pts):
    """``cos x1 cos x2``: Dirichlet eigenfunction of -Laplace on (-pi/2, pi/2)^2, eigenvalue 2."""
    p = np.asarray(pts)
    return np.cos(p[..., 0]) * np.cos(p[..., 1])


def named_field(mesh: Mesh, spec: str):
    """Parse ``"sine kx ky"``, ``"bump cx cy rho"``, ``"gaussian cx cy width"``, ``"zero"``."""
    parts = spec.split()
    kind, nums = parts[0].lower(), [float(v) for v in parts[1:]]
    if kind == "zero":
        return np.zeros(mesh.n_nodes)
    if kind == "sine":
        kx, ky = (int(v) for v in (nums or [1, 1]))
        return sine_mode(mesh, kx, ky)
    if kind == "bump" and len(nums) == 3:
        return mesh.interpolate(lambda p: smooth_bump(p, nums[:2], nums[2]))
    if kind == "gaussian" and len(nums) == 3:
        bubble = mesh.domain.bubble if mesh.domain is not None else (lambda p: 1.0)
        return mesh.interpolate(lambda p: gaussian(p, nums[:2], nums[2]) * bubble(p))
    if kind == "cosine":
        return mesh.interpolate(cosine_eigenfunction)
    raise ValueError(f"cannot parse field descriptor {spec!r}")


__all__ = ["smooth_bump", "gaussian", "random_smooth_field", "random_compact_field",
           "sine_mode", "cosine_eigenfunction", "named_field", "Ball", "Box"]
