"""G-equation u_t + v.grad u = c|grad u| and its reachable sets.

Two independent routes to the same objects:

* a monotone level-set solver (Godunov expansion term, upwind transport),
  the production path;
* control oracles built directly on paths with |gamma' - v| <= c: a point
  frontier pushed by Euler steps for reachable sets, and a dynamic
  programming evaluation of u(t, x) = sup { u0(y) : x reachable from y }.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _stencils
from .env import Environment, EnvironmentSpec, GridSampler, Mode
from .errors import BoundaryReached, CFLViolation, NumericalAnomaly
from .grid import Grid, geq_stability, make_grid
from .pde import RegionMask

DEFAULT_H = 0.1

_DIRS8 = np.array([[math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)] for k in range(8)])


def geq_grid(spec: EnvironmentSpec, half_width: float, h: float = DEFAULT_H,
             center=None, dt: float | None = None) -> Grid:
    """Grid for the level-set solver with the largest admissible dyadic step."""
    if spec.mode is not Mode.GEQ:
        raise ValueError("geq_grid needs a GEQ spec")
    return make_grid(spec, h, half_width, center, dt)


def reach_speed(spec: EnvironmentSpec) -> float:
    """c_max + v_max, the largest possible path speed."""
    b = spec.bounds()
    return b.speed + b.flow


@dataclass
class LevelFunction:
    """Level function phi(t, .) on a grid, started at absolute time t0."""

    grid: Grid
    phi: np.ndarray
    env: Environment
    t0: float = 0.0
    t: float = 0.0
    steps: int = 0

    def copy(self) -> "LevelFunction":
        return LevelFunction(self.grid, self.phi.copy(), self.env, self.t0, self.t, self.steps)

    def lipschitz(self) -> float:
        """Largest one-sided difference quotient (monitoring only)."""
        g = 0.0
        for ax in range(self.phi.ndim):
            g = max(g, float(np.abs(np.diff(self.phi, axis=ax)).max(initial=0.0)) / self.grid.h)
        return g


@dataclass
class ReachableSet:
    mask: RegionMask
    time: float
    origin: tuple  # (t0, x0)


def distance_level(grid: Grid, env: Environment, x0, t0: float = 0.0) -> LevelFunction:
    """phi0(y) = -|y - x0| clamped at -half_width."""
    phi = np.maximum(-grid.distance_from(x0), -grid.half_width)
    return LevelFunction(grid, phi, env, t0=float(t0))


class HJStepper:
    """Stepping state for one level function.

    Parameters
    ----------
    guard : float or None
        Raise BoundaryReached when phi on the outer ring reaches this value.
    """

    def __init__(self, lf: LevelFunction, env: Environment, guard: float | None = None,
                 sampler: GridSampler | None = None):
        if env.mode is not Mode.GEQ:
            raise ValueError("level-set stepper needs a GEQ environment")
        rate = geq_stability(env.spec, lf.grid.h, lf.grid.dt)
        if rate > 0.5 + 1e-12:
            raise CFLViolation(f"dt * rate = {rate:.6g} exceeds 1/2")
        self.lf = lf
        self.env = env
        self.guard = guard
        self.sampler = sampler if sampler is not None and sampler.grid == lf.grid \
            else env.sampler(lf.grid)
        self.work = lf.phi.copy()
        self.mean = np.array(env.spec.mean_flow, dtype=float)
        self.ring = -math.inf  # largest phi on the outer ring after the last step

    def advance(self, dt: float | None = None) -> None:
        lf = self.lf
        full = dt is None
        dt = lf.grid.dt if full else dt
        l0, l1, w0, w1 = self.sampler.layers(lf.t0 + lf.t)
        lo, span = self.sampler.lo, self.sampler.span
        if lf.grid.dimension == 2:
            bad, ring = _stencils.hj_step_2d(lf.phi, self.work, l0, l1, w0, w1, lo, span,
                                             self.mean, dt, lf.grid.h)
        else:
            bad, ring = _stencils.hj_step_1d(lf.phi, self.work, l0, l1, w0, w1, lo, span,
                                             dt, lf.grid.h)
        lf.phi, self.work = self.work, lf.phi
        self.ring = ring
        if full:
            lf.steps += 1
            lf.t = lf.steps * lf.grid.dt
        else:
            lf.t = lf.t + dt
        if bad:
            raise NumericalAnomaly(f"NaN in level function at t={lf.t}")
        if self.guard is not None and ring >= self.guard:
            raise BoundaryReached(f"reachable set touched the box boundary at t={lf.t}")

    def run_until(self, T: float, callback=None) -> LevelFunction:
        lf = self.lf
        if T < lf.t - 1e-12:
            raise ValueError("target time lies in the past")
        dt = lf.grid.dt
        while lf.t < T:
            self.advance() if lf.t + dt <= T else self.advance(T - lf.t)
            if callback is not None and callback(lf):
                break
        return lf


def hj_step(lf: LevelFunction, env: Environment) -> LevelFunction:
    """One explicit step; returns a new LevelFunction."""
    new = lf.copy()
    HJStepper(new, env).advance()
    return new


def evolve(lf: LevelFunction, env: Environment, T: float, guard: float | None = None) -> LevelFunction:
    """Evolve a copy of `lf` to elapsed time T."""
    new = lf.copy()
    return HJStepper(new, env, guard=guard).run_until(T)


def _mean_speed_spec(spec: EnvironmentSpec) -> EnvironmentSpec:
    c = 0.5 * (spec.speed_min + spec.speed_max)
    return EnvironmentSpec(dimension=spec.dimension, mode=Mode.GEQ, speed_min=c, speed_max=c,
                           mean_flow=spec.mean_flow, cell_duration=spec.cell_duration,
                           cell_size=spec.cell_size, mollify_radius=spec.mollify_radius)


@lru_cache(maxsize=64)
def _schedule(spec: EnvironmentSpec, d: int, h: float, dt: float, n_steps: int) -> np.ndarray:
    ref = _mean_speed_spec(spec)
    c = ref.speed_min
    vbar = np.array(ref.mean_flow[:d])
    T = n_steps * dt
    # the reference ball B_{ct}(vt) stays inside a box around vT/2
    mid = tuple(h * np.round(0.5 * T * vbar / h))
    half = (c + 0.5 * float(np.linalg.norm(vbar))) * T + 4 * h + 1.0
    grid = Grid(d, h, int(math.ceil(half / h)), dt, mid)
    env = Environment(ref, 0)
    lf = distance_level(grid, env, np.zeros(d))
    origin = np.array([grid.axis(a)[0] for a in range(d)])
    kappa = np.full(n_steps + 1, h)

    def record(state):
        low = _stencils.ball_min(state.phi, origin, h, vbar * state.t, c * state.t)
        kappa[state.steps] = max(h, -low)
        return False

    HJStepper(lf, env).run_until(T, callback=record)
    return kappa


def threshold_schedule(spec: EnvironmentSpec, grid: Grid, horizon: float) -> np.ndarray:
    """Mask thresholds kappa_k for step k = 0 .. ceil(horizon / dt).

    The first-order scheme smears the edge of the plateau {phi = max phi0}
    over a width growing like sqrt(h t). kappa_k is the smallest threshold
    for which {phi >= -kappa} still contains the exact reachable ball in the
    constant environment with the mean flame speed and the mean flow, run on
    the same spacing and step; never below h.
    """
    n_steps = max(0, int(math.ceil(horizon / grid.dt - 1e-9)))
    # quantize upwards so that nearby horizons share one cached reference run
    n_run = 32
    while n_run < n_steps:
        n_run = int(math.ceil(n_run * 1.25))
    return _schedule(spec, grid.dimension, grid.h, grid.dt, n_run)[: n_steps + 1]


def threshold_at(spec: EnvironmentSpec, grid: Grid, t: float) -> float:
    kap = threshold_schedule(spec, grid, t)
    return float(kap[-1])


def reachable_mask(lf: LevelFunction, threshold: float | None = None) -> RegionMask:
    """{phi >= -threshold}; the default threshold follows the calibrated schedule."""
    if threshold is None:
        threshold = threshold_at(lf.env.spec, lf.grid, lf.t)
    return RegionMask(lf.grid, lf.phi >= -threshold)


def reachable_set(env: Environment, t0: float, x0, t: float, grid: Grid,
                  threshold: float | None = None) -> ReachableSet:
    """Nodes reachable at time t0 + t from x0 at time t0.

    Evolves phi0 = -dist(., x0) and returns {phi >= -threshold}.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not grid.contains_ball(x0, reach_speed(env.spec) * t + grid.h):
        raise ValueError("box too small for the reachable set at this horizon")
    if threshold is None:
        threshold = threshold_at(env.spec, grid, t)
    lf = evolve(distance_level(grid, env, x0, t0), env, t, guard=-threshold)
    return ReachableSet(reachable_mask(lf, threshold), t, (float(t0), tuple(x0)))


# ----------------------------------------------------------------------
# control oracles
# ----------------------------------------------------------------------
def unit_controls(n_controls: int, include_zero: bool = True) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n_controls) / n_controls
    ctl = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if include_zero:
        ctl = np.vstack([ctl, np.zeros((1, 2))])
    return ctl


def _flow_at(env: Environment, t: float, pts: np.ndarray):
    f = env.evaluate(t, pts)
    return np.ascontiguousarray(f.v), np.ascontiguousarray(f.c)


def control_frontier(env: Environment, t0: float, x0, t: float, n_steps: int,
                     n_controls: int, grid: Grid) -> np.ndarray:
    """Points reachable at t0 + t by Euler paths with piecewise constant controls.

    Each step moves every point by dtau (v + c alpha) for the unit controls
    and alpha = 0; per grid cell only the extreme children in eight
    directions survive. Every returned point is exactly reachable by an
    Euler path, so the cloud is an inner approximation of the reachable set.
    """
    if env.dimension != 2:
        raise ValueError("the control oracle is implemented for d = 2")
    controls = unit_controls(n_controls)
    dtau = t / n_steps
    pts = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    origin = np.array([grid.axis(0)[0], grid.axis(1)[0]])
    for k in range(n_steps):
        v, c = _flow_at(env, t0 + k * dtau, pts)
        pts, escaped = _stencils.frontier_advance(pts, v, c, dtau, controls, _DIRS8,
                                                  origin, grid.h, grid.size)
        if escaped:
            raise BoundaryReached(f"oracle frontier left the box at step {k + 1}")
    return pts


def control_oracle(env: Environment, t0: float, x0, t: float, n_steps: int = 60,
                   n_controls: int = 16, grid: Grid | None = None) -> RegionMask:
    """Mask of grid nodes nearest to the oracle frontier points."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if grid is None:
        grid = geq_grid(env.spec, reach_speed(env.spec) * t + 2.0, center=x0)
    pts = control_frontier(env, t0, x0, t, n_steps, n_controls, grid)
    origin = np.array([grid.axis(0)[0], grid.axis(1)[0]])
    return RegionMask(grid, _stencils.points_to_mask(pts, origin, grid.h, grid.size))


def control_solution(env: Environment, u0, t: float, grid: Grid, t0: float = 0.0,
                     n_controls: int = 32, courant: float = 2.0) -> LevelFunction:
    """u(t0 + t, x) = sup of u0 over origins from which x is reachable.

    Evaluated by dynamic programming on the node lattice: each sub-step of
    length dtau takes the best bilinearly interpolated value among the
    origins x - dtau (v(x) + c(x) alpha), alpha in the control set. Fields
    come from pointwise evaluation (analytic curl), independent of the
    level-set solver.

    Parameters
    ----------
    u0 : ndarray or callable
        Data on `grid` or a function of points of shape (..., 2).
    courant : float
        Displacement per sub-step in cells at the largest path speed.
    """
    if env.dimension != 2:
        raise ValueError("control_solution is implemented for d = 2")
    X = grid.coordinates()
    u = np.asarray(u0(X) if callable(u0) else u0, dtype=float).copy()
    if u.shape != grid.shape:
        raise ValueError("u0 does not match the grid")
    spd = reach_speed(env.spec)
    n_steps = max(1, int(math.ceil(t * spd / (courant * grid.h))))
    dtau = t / n_steps
    if env.spec.speed_min * dtau < 0.5 * grid.h and t > 0:
        raise ValueError("sub-step displacement below half a cell: origin lattice too coarse")
    controls = unit_controls(n_controls)
    origin = np.array([grid.axis(0)[0], grid.axis(1)[0]])
    out = np.empty_like(u)
    for k in range(n_steps):
        f = env.evaluate(t0 + (k + 1) * dtau, X)
        _stencils.dp_step(u, out, np.ascontiguousarray(f.v), np.ascontiguousarray(f.c),
                          dtau, controls, origin, grid.h)
        u, out = out, u
    return LevelFunction(grid, u, env, t0=t0, t=t, steps=n_steps)


def trace_back(env: Environment, t_end: float, x, duration: float, control,
               n_steps: int = 200) -> np.ndarray:
    """Origin of the path with gamma' = v + c alpha(s) ending at x at t_end.

    Integrates the path ODE backwards with RK4; `control(s)` returns a
    vector of norm at most one for absolute time s.
    """
    y = np.asarray(x, dtype=float).copy()
    ds = duration / n_steps

    def rhs(s, p):
        f = env.evaluate(s, p[None, :])
        return f.v[0] + f.c[0] * np.asarray(control(s))

    s = t_end
    for _ in range(n_steps):
        k1 = rhs(s, y)
        k2 = rhs(s - ds / 2, y - ds / 2 * k1)
        k3 = rhs(s - ds / 2, y - ds / 2 * k2)
        k4 = rhs(s - ds, y - ds * k3)
        y = y - ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s -= ds
    return y


def stability_constant(spec: EnvironmentSpec) -> float:
    """C = v_max + Lip(v) + Lip(c) for the path stability estimate."""
    b = spec.bounds()
    return b.flow + b.flow_lipschitz + b.speed_lipschitz


def calibrate_threshold(spec: EnvironmentSpec, grid: Grid, t: float, seeds, n_steps: int,
                        n_controls: int = 16, margin: float | None = None) -> float:
    """Threshold making the level-set masks contain the oracle masks.

    Uses the largest value of -phi at oracle nodes over the calibration
    `seeds`, plus `margin` (default h / 2). Calibrate and validate on
    disjoint seed sets.
    """
    need = grid.h
    center = np.array(grid.center)
    for seed in seeds:
        env = Environment(spec, seed)
        lf = evolve(distance_level(grid, env, center), env, t)
        om = control_oracle(env, 0.0, center, t, n_steps, n_controls, grid).mask
        need = max(need, -float(lf.phi[om].min()))
    return need + (0.5 * grid.h if margin is None else margin)
