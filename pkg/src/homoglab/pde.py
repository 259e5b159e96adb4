"""Monotone explicit solver for the KPP reaction-advection-diffusion equation.

    u_t = sum_i A_ii(t0 + t, x) d_ii u + b(t0 + t, x) . grad u + f(t0 + t, x, u)

Centred second differences, upwind first differences and a time step below
the monotonicity bound make the update order preserving, so the discrete
solution obeys the comparison principle. Dirichlet zero data on the box
boundary; a guard watches the ring of nodes next to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _stencils
from .env import Environment, EnvironmentSpec, GridSampler, Mode, ReactionSpec
from .errors import BoundaryReached, CFLViolation, NumericalAnomaly
from .grid import Grid, kpp_stability, make_grid

GUARD_LEVEL = 1e-6
DEFAULT_H = 0.25


def speed_guess(spec: EnvironmentSpec) -> float:
    """A-priori front speed bound plus one, used to size boxes."""
    return 2.0 * math.sqrt(spec.diffusion_max * spec.reaction_max) + spec.drift_max + 1.0


def speed_bound(spec: EnvironmentSpec) -> float:
    """Speed of the exponential supersolution exp(a t - lambda x.e)."""
    return 2.0 * math.sqrt(spec.diffusion_max * spec.reaction_max) + spec.drift_max


@dataclass
class RegionMask:
    """Boolean node set on a grid."""

    grid: Grid
    mask: np.ndarray

    def __len__(self):
        return int(self.mask.sum())

    def points(self) -> np.ndarray:
        return self.grid.coordinates()[self.mask]

    def inner_radius(self, x0) -> float:
        """Largest r such that every node within r of x0 is in the mask."""
        dist = self.grid.distance_from(x0)
        out = dist[~self.mask]
        return float(out.min()) if out.size else math.inf

    def outer_radius(self, x0) -> float:
        """Distance from x0 to the farthest node of the mask."""
        dist = self.grid.distance_from(x0)
        inside = dist[self.mask]
        return float(inside.max()) if inside.size else 0.0


@dataclass
class SolutionField:
    """Grid function u(t, .) started at absolute time t0.

    Attributes
    ----------
    t : float
        Elapsed time since t0 (coefficients are read at t0 + t).
    steps : int
        Number of full steps taken; t == steps * grid.dt until a shortened
        final step.
    support : ndarray
        Index box outside of which u vanishes.
    """

    grid: Grid
    u: np.ndarray
    env: Environment
    t0: float = 0.0
    t: float = 0.0
    steps: int = 0
    support: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.support is None:
            self.support = _support_box(self.u)

    def copy(self) -> "SolutionField":
        return SolutionField(self.grid, self.u.copy(), self.env, self.t0, self.t,
                             self.steps, self.support.copy())


def _support_box(u: np.ndarray) -> np.ndarray:
    nz = np.nonzero(u)
    if len(nz[0]) == 0:
        c = u.shape[0] // 2
        return np.array([c, c] * u.ndim, dtype=np.int64)
    box = []
    for ax in nz:
        box += [int(ax.min()), int(ax.max())]
    return np.array(box, dtype=np.int64)


def kpp_grid(spec: EnvironmentSpec, half_width: float, h: float = DEFAULT_H,
             center=None, dt: float | None = None) -> Grid:
    """Grid for the KPP solver with the largest admissible dyadic step."""
    if spec.mode is not Mode.KPP:
        raise ValueError("kpp_grid needs a KPP spec")
    return make_grid(spec, h, half_width, center, dt)


def init_ball_datum(grid: Grid, env: Environment, center=None, height: float = 0.5,
                    t0: float = 0.0, radius: float = 1.0) -> SolutionField:
    """u = height on the nodes of the closed ball B_radius(center), 0 elsewhere."""
    if not 0.0 < height <= 1.0:
        raise ValueError("height must lie in (0, 1]")
    center = np.zeros(grid.dimension) if center is None else np.atleast_1d(center)
    if not grid.contains_ball(center, radius + grid.h):
        raise ValueError("initial ball does not fit inside the box")
    u = np.where(grid.distance_from(center) <= radius, height, 0.0)
    return SolutionField(grid, u, env, t0=float(t0))


def init_datum(grid: Grid, env: Environment, u0: np.ndarray, t0: float = 0.0) -> SolutionField:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape:
        raise ValueError(f"datum shape {u0.shape} does not match grid {grid.shape}")
    if u0.min() < 0 or u0.max() > 1:
        raise ValueError("KPP data must lie in [0, 1]")
    return SolutionField(grid, u0.copy(), env, t0=float(t0))


class KPPStepper:
    """Reusable stepping state (work buffer, sampler) for one solution."""

    def __init__(self, sol: SolutionField, env: Environment, reaction: ReactionSpec,
                 guard: bool = True, sampler: GridSampler | None = None):
        if env.mode is not Mode.KPP:
            raise ValueError("KPP stepper needs a KPP environment")
        rate = kpp_stability(env.spec, sol.grid.h, sol.grid.dt)
        if rate > 1.0 + 1e-12:
            raise CFLViolation(f"dt * rate = {rate:.6g} exceeds 1")
        self.sol = sol
        self.env = env
        self.form = reaction.code
        self.guard = guard
        self.sampler = sampler if sampler is not None and sampler.grid == sol.grid \
            else env.sampler(sol.grid)
        self.work = sol.u.copy()
        self.kernel = _stencils.kpp_step_2d if sol.grid.dimension == 2 else _stencils.kpp_step_1d
        self.ring = 0.0  # largest u on the boundary ring after the last step

    def advance(self, dt: float | None = None) -> None:
        sol = self.sol
        full = dt is None
        dt = sol.grid.dt if full else dt
        l0, l1, w0, w1 = self.sampler.layers(sol.t0 + sol.t)
        bad, ring = self.kernel(
            sol.u, self.work, l0, l1, w0, w1, self.sampler.lo, self.sampler.span,
            dt, sol.grid.h, self.form, sol.support)
        sol.u, self.work = self.work, sol.u
        self.ring = ring
        if full:
            sol.steps += 1
            sol.t = sol.steps * sol.grid.dt
        else:
            sol.t = sol.t + dt
        if bad:
            raise NumericalAnomaly(f"KPP solution left [0, 1] or turned NaN at t={sol.t}")
        if self.guard and ring > GUARD_LEVEL:
            raise BoundaryReached(f"front reached the box boundary at t={sol.t} (u={ring:.3g})")

    def run_until(self, T: float, callback=None) -> SolutionField:
        sol = self.sol
        if T < sol.t - 1e-12:
            raise ValueError("target time lies in the past")
        dt = sol.grid.dt
        while sol.t < T:
            if sol.t + dt <= T:
                self.advance()
            else:
                self.advance(T - sol.t)
            if callback is not None and callback(sol):
                break
        return sol


def step(sol: SolutionField, env: Environment, reaction: ReactionSpec) -> SolutionField:
    """One explicit step; returns a new SolutionField."""
    new = sol.copy()
    KPPStepper(new, env, reaction, guard=False).advance()
    return new


def solve_until(sol: SolutionField, env: Environment, reaction: ReactionSpec, T: float,
                guard: bool = True) -> SolutionField:
    """Evolve a copy of `sol` to elapsed time T (last step shortened)."""
    new = sol.copy()
    return KPPStepper(new, env, reaction, guard=guard).run_until(T)


def superlevel_set(sol: SolutionField, theta: float) -> RegionMask:
    """Nodes where u >= theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return RegionMask(sol.grid, sol.u >= theta)


def supersolution_reach(spec: EnvironmentSpec, t: float, radius: float = 1.0,
                        height: float = 0.5) -> float:
    """Distance from the datum centre beyond which u < 1/2 at time t.

    Uses u <= height * exp(lambda (a t - x.e + radius)) with the optimal
    decay rate lambda = sqrt(g_max / Lambda_A).
    """
    lam = math.sqrt(spec.reaction_max / spec.diffusion_max)
    return speed_bound(spec) * t + radius + math.log(2.0 * height) / lam


def guard_reach(spec: EnvironmentSpec, t: float, radius: float = 1.0,
                height: float = 0.5) -> float:
    """Distance beyond which the supersolution keeps u below GUARD_LEVEL up to time t."""
    lam = math.sqrt(spec.reaction_max / spec.diffusion_max)
    return speed_bound(spec) * t + radius + math.log(height / GUARD_LEVEL) / lam


def dump_snapshot(sol: SolutionField, path) -> None:
    """Write node values as CSV with a one-line header (t, h, box)."""
    g = sol.grid
    header = f"t={sol.t0 + sol.t!r},h={g.h!r},half_width={g.half_width!r},d={g.dimension}"
    np.savetxt(path, np.atleast_2d(sol.u), delimiter=",", header=header)
