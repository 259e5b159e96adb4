"""Uniform tensor grids shared by the KPP and G-equation solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import EnvironmentSpec, Mode
from .errors import CFLViolation

_DYADIC_BITS = 20


def dyadic_floor(x: float, bits: int = _DYADIC_BITS) -> float:
    """Largest multiple of 2**-bits not exceeding x (exact in binary)."""
    return math.floor(x * 2 ** bits) / 2 ** bits


@dataclass(frozen=True)
class Grid:
    """Square box of (2n+1)^d nodes centred at `center` with spacing h.

    Node i along an axis sits at center + (i - n) * h. Keep h, dt and the
    centre dyadic to make grid-aligned shifts exact in floating point.
    """

    dimension: int
    h: float
    n: int
    dt: float
    center: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) < self.dimension:
            c = c + (0.0,) * (self.dimension - len(c))
        object.__setattr__(self, "center", c[: self.dimension])
        if self.h <= 0 or self.dt <= 0 or self.n < 2:
            raise ValueError("grid needs h > 0, dt > 0 and at least 5 nodes per axis")

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def half_width(self) -> float:
        return self.n * self.h

    @property
    def shape(self) -> tuple:
        return (self.size,) * self.dimension

    def axis(self, a: int, pad: int = 0) -> np.ndarray:
        i = np.arange(-pad, self.size + pad, dtype=float)
        return self.center[a] + (i - self.n) * self.h

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (*shape, d)."""
        axes = [self.axis(a) for a in range(self.dimension)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def distance_from(self, x0) -> np.ndarray:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return np.linalg.norm(self.coordinates() - x0, axis=-1)

    def nearest_index(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return tuple(int(round((x[a] - self.center[a]) / self.h)) + self.n
                     for a in range(self.dimension))

    def contains_ball(self, x0, radius: float) -> bool:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return all(abs(x0[a] - self.center[a]) + radius <= self.half_width
                   for a in range(self.dimension))

    def with_dt(self, dt: float) -> "Grid":
        return Grid(self.dimension, self.h, self.n, dt, self.center)

    def describe(self) -> dict:
        return {"d": self.dimension, "h": self.h, "n": self.n, "dt": self.dt,
                "center": list(self.center), "half_width": self.half_width}


def kpp_stability(spec: EnvironmentSpec, h: float, dt: float) -> float:
    """Left side of the monotonicity condition (must be <= 1)."""
    b = spec.bounds()
    d = spec.dimension
    return dt * (2 * d * b.diffusion / h ** 2 + d * b.drift_component / h + b.reaction)


def geq_stability(spec: EnvironmentSpec, h: float, dt: float) -> float:
    """Left side of the G-equation condition (must be <= 1/2)."""
    b = spec.bounds()
    return dt * (b.flow + b.speed) * spec.dimension / h


def make_grid(spec: EnvironmentSpec, h: float, half_width: float, center=None,
              dt: float | None = None, safety: float = 1.0) -> Grid:
    """Grid covering [center - half_width, center + half_width]^d.

    Without an explicit dt the largest dyadic step satisfying the monotone
    stability condition (times `safety`) is chosen.
    """
    d = spec.dimension
    center = tuple(np.atleast_1d(center if center is not None else np.zeros(d)).astype(float))
    n = max(2, int(math.ceil(half_width / h - 1e-12)))
    if spec.mode is Mode.KPP:
        rate = kpp_stability(spec, h, 1.0)
        limit = 1.0
    else:
        rate = geq_stability(spec, h, 1.0)
        limit = 0.5
    if dt is None:
        dt = dyadic_floor(safety * limit / rate)
        if dt <= 0:
            raise CFLViolation("grid too fine for a representable time step")
    elif dt * rate > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={dt} violates the stability bound {limit / rate:.6g}")
    return Grid(d, h, n, dt, center)
