"""Planar shapes used both as computational domains and as region descriptors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``(x0, x1) x (y0, y1)``."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    def contains(self, pts, closed=False) -> np.ndarray:
        p = np.atleast_2d(pts)
        if closed:
            return ((p[:, 0] >= self.x0) & (p[:, 0] <= self.x1)
                    & (p[:, 1] >= self.y0) & (p[:, 1] <= self.y1))
        return ((p[:, 0] > self.x0) & (p[:, 0] < self.x1)
                & (p[:, 1] > self.y0) & (p[:, 1] < self.y1))

    def boundary_distance(self, pts) -> np.ndarray:
        """Distance to the boundary for points inside (negative outside)."""
        p = np.atleast_2d(pts)
        return np.minimum.reduce([p[:, 0] - self.x0, self.x1 - p[:, 0],
                                  p[:, 1] - self.y0, self.y1 - p[:, 1]])

    def max_distance(self, point) -> float:
        c = np.array([[self.x0, self.y0], [self.x1, self.y0],
                      [self.x1, self.y1], [self.x0, self.y1]])
        return float(np.max(np.linalg.norm(c - np.asarray(point), axis=1)))

    def min_distance(self, point) -> float:
        """Euclidean distance from ``point`` to the closed box (0 inside)."""
        p = np.asarray(point, dtype=float)
        dx = max(self.x0 - p[0], 0.0, p[0] - self.x1)
        dy = max(self.y0 - p[1], 0.0, p[1] - self.y1)
        return float(np.hypot(dx, dy))

    def bubble(self, pts) -> np.ndarray:
        """Smooth nonnegative function vanishing exactly on the boundary."""
        p = np.atleast_2d(pts)
        sx = (self.x1 - self.x0) / 2
        sy = (self.y1 - self.y0) / 2
        return ((p[:, 0] - self.x0) * (self.x1 - p[:, 0]) / sx**2
                * (p[:, 1] - self.y0) * (self.y1 - p[:, 1]) / sy**2)

    def inside(self, other) -> bool:
        """True when the closure of ``self`` lies in the open shape ``other``."""
        corners = np.array([[self.x0, self.y0], [self.x1, self.y0],
                            [self.x1, self.y1], [self.x0, self.y1]])
        return bool(np.all(other.contains(corners)))


@dataclass(frozen=True)
class Ball:
    """Open disk with center ``(cx, cy)`` and ``radius``."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"degenerate ball {self}")

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy], dtype=float)

    def contains(self, pts, closed=False) -> np.ndarray:
        d = np.linalg.norm(np.atleast_2d(pts) - self.center, axis=1)
        return d <= self.radius if closed else d < self.radius

    def boundary_distance(self, pts) -> np.ndarray:
        return self.radius - np.linalg.norm(np.atleast_2d(pts) - self.center, axis=1)

    def max_distance(self, point) -> float:
        return float(np.linalg.norm(self.center - np.asarray(point)) + self.radius)

    def min_distance(self, point) -> float:
        return max(float(np.linalg.norm(self.center - np.asarray(point))) - self.radius, 0.0)

    def bubble(self, pts) -> np.ndarray:
        r2 = np.sum((np.atleast_2d(pts) - self.center) ** 2, axis=1)
        return 1.0 - r2 / self.radius**2

    def inside(self, other) -> bool:
        if isinstance(other, Ball):
            return bool(np.linalg.norm(self.center - other.center) + self.radius < other.radius)
        return bool(self.cx - self.radius > other.x0 and self.cx + self.radius < other.x1
                    and self.cy - self.radius > other.y0 and self.cy + self.radius < other.y1)


Shape = Box | Ball


def parse_shape(spec: str) -> Shape:
    """Parse ``"ball cx cy r"`` or ``"box x0 x1 y0 y1"``."""
    parts = spec.split()
    if not parts:
        raise ValueError("empty shape descriptor")
    kind, nums = parts[0].lower(), [float(v) for v in parts[1:]]
    if kind in ("ball", "disk") and len(nums) == 3:
        return Ball(*nums)
    if kind in ("box", "rectangle") and len(nums) == 4:
        return Box(*nums)
    raise ValueError(f"cannot parse shape descriptor {spec!r}")


def format_shape(shape: Shape) -> str:
    if isinstance(shape, Ball):
        return f"ball {shape.cx:g} {shape.cy:g} {shape.radius:g}"
    return f"box {shape.x0:g} {shape.x1:g} {shape.y0:g} {shape.y1:g}"
