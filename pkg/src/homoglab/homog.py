"""Rescaled solutions and their comparison with the homogenized front.

For a scale eps the rescaled solution is u_eps(t, x) = u(t / eps, x / eps)
of the unscaled problem started from theta on (G + y_eps) / eps. The
homogenized limit is the indicator of G + t S, where S is a Wulff shape
estimated from travel times of the same discretization. The checks here
compare superlevel sets of u_eps with (G + (1 -/+ delta) t S) inside the
window B_{1/delta}, evaluate pointwise limits at probes, and compare
G-equation solutions with the sup-dilation of their data over x - t S.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely
from scipy import ndimage
from scipy.stats import binomtest
from shapely.geometry import Point, Polygon

from . import _stencils
from .env import Environment, EnvironmentSpec, Mode, ReactionSpec, build_environment
from .errors import BoundaryReached, ConfigError
from .geq import (DEFAULT_H as GEQ_H, HJStepper, LevelFunction, geq_grid, reach_speed,
                  threshold_schedule)
from .pde import DEFAULT_H as KPP_H, GUARD_LEVEL, KPPStepper, SolutionField, kpp_grid
from .subadd import cell_seed
from .wulff import Ball, WulffShape, minkowski_sum

EPS_DEFAULT = (1 / 4, 1 / 8, 1 / 16, 1 / 32)


# ----------------------------------------------------------------------
# data profiles for the G-equation limit
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class RadialProfile:
    """u0(y) = profile(|y - center|) for a non-increasing profile.

    kind "bump": height * (1 - (r / radius)^2)^2 on r < radius, else 0.
    kind "cone": -r. kind "const": height everywhere.
    """

    kind: str = "bump"
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bump", "cone", "const"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("profile radius must be positive")

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "bump":
            s = np.clip(r / self.radius, 0.0, 1.0)
            return self.height * (1.0 - s * s) ** 2
        if self.kind == "cone":
            return -r
        return np.full_like(r, self.height)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.profile(np.linalg.norm(x - np.asarray(self.center), axis=-1))

    @property
    def lipschitz(self) -> float:
        if self.kind == "bump":
            # max of |d/dr (1 - s^2)^2| / radius, attained at s = 1/sqrt(3)
            return self.height * 8.0 / (3.0 * math.sqrt(3.0)) / self.radius
        return 1.0 if self.kind == "cone" else 0.0

    def support_radius(self) -> float:
        return self.radius if self.kind == "bump" else math.inf


def sup_dilation(u0: RadialProfile, shape: WulffShape, t: float, x) -> np.ndarray:
    """sup { u0(y) : y in x - t S } for a radial non-increasing u0.

    The supremum sits at the point of x - t S closest to the profile centre,
    so it equals profile(dist(x - center, t S)).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(u0.center)
    if t == 0:
        return u0.profile(np.linalg.norm(x, axis=-1))
    poly = shape.polygon(t)
    dist = shapely.distance(poly, shapely.points(x))
    return u0.profile(dist)


# ----------------------------------------------------------------------
# experiment description
# ----------------------------------------------------------------------
@dataclass
class ScaledExperiment:
    """Parameters of a family of rescaled solves.

    Attributes
    ----------
    G : Ball or (n, 2) array
        Initial set (scaled coordinates). Must lie inside B_{1/delta}.
    rho : "zero", "sqrt" or float
        Perturbation allowance rho(eps); "sqrt" is sqrt(eps).
    shift_bound : float
        Lambda in |y_eps| <= Lambda. The schedule alternates
        y_eps = +-(Lambda / 2) e_1 along the halving sequence of eps.
    margin : float
        Extra unscaled distance between the window B_{1/delta} / eps and
        the Dirichlet box edge.
    """

    spec: EnvironmentSpec
    shape: WulffShape
    G: object = field(default_factory=Ball)
    theta: float = 0.5
    rho: object = "sqrt"
    shift_bound: float = 1.0
    shift: str = "alternate"
    eps_list: tuple = EPS_DEFAULT
    delta: float = 0.25
    theta_prime: float = 0.5
    times: tuple = (0.5, 1.0, 2.0)
    seeds_per_eps: int = 50
    reaction: ReactionSpec = field(default_factory=ReactionSpec)
    h: float | None = None
    margin: float = 8.0
    u0: RadialProfile | None = None
    seed: int = 0

    def check(self) -> "ScaledExperiment":
        self.spec.check()
        if self.spec.dimension != 2:
            raise ConfigError("rescaled experiments are two-dimensional")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not 0 < self.theta <= 1 or not 0 < self.theta_prime < 1:
            raise ConfigError("theta must lie in (0, 1] and theta' in (0, 1)")
        eps = list(self.eps_list)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps_list must be positive and strictly decreasing")
        if self.shift not in ("alternate", "none"):
            raise ConfigError("shift must be 'alternate' or 'none'")
        if self.shift_bound < 0:
            raise ConfigError("shift bound must be non-negative")
        if any(t <= 0 for t in self.times):
            raise ConfigError("observation times must be positive")
        if not self.initial_set().within(Point(0, 0).buffer(1 / self.delta, 256)):
            raise ConfigError("G must lie inside the window B_{1/delta}")
        return self

    @property
    def grid_h(self) -> float:
        if self.h is not None:
            return self.h
        return KPP_H if self.spec.mode is Mode.KPP else GEQ_H

    def rho_of(self, eps: float) -> float:
        if self.rho == "zero":
            return 0.0
        if self.rho == "sqrt":
            return math.sqrt(eps)
        return float(self.rho)

    def shift_of(self, eps: float) -> np.ndarray:
        if self.shift == "none":
            return np.zeros(2)
        k = int(round(math.log2(1 / eps)))
        sign = 1.0 if k % 2 == 0 else -1.0
        return np.array([sign * self.shift_bound / 2, 0.0])

    def seeds(self, eps: float, n: int | None = None) -> list[int]:
        k = int(round(math.log2(1 / eps)))
        return [cell_seed(self.seed, k, j) for j in range(n or self.seeds_per_eps)]

    def initial_set(self):
        G = self.G
        if isinstance(G, Ball):
            return Point(*G.center).buffer(G.radius, 256)
        return Polygon(np.asarray(G, dtype=float))

    def target(self, t: float, factor: float = 1.0):
        """G + factor * t * S as a polygon."""
        return minkowski_sum(self.G, factor * t, self.shape)


# ----------------------------------------------------------------------
# rescaled KPP solves
# ----------------------------------------------------------------------
@dataclass
class ScaledField:
    """Unscaled node values of u at scaled time t, plus the coordinate map.

    Scaled coordinates (relative to the shift) of the nodes are
    eps * x - y.
    """

    t: float
    eps: float
    grid: object
    u: np.ndarray
    shift: np.ndarray
    touched: bool  # Dirichlet edge saw u > GUARD_LEVEL at or before t

    def scaled_axes(self):
        return (self.eps * self.grid.axis(0) - self.shift[0],
                self.eps * self.grid.axis(1) - self.shift[1])

    def value_at(self, x) -> np.ndarray:
        """Bilinear value of u_eps(t, x + y_eps) at scaled points x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        X = (x + self.shift) / self.eps
        origin = np.array([self.grid.axis(0)[0], self.grid.axis(1)[0]])
        return np.array([_stencils._bilinear(self.u, p[0], p[1], origin, self.grid.h) for p in X])


def _snap(v: np.ndarray, h: float) -> tuple:
    return tuple(float(h * round(c / h)) for c in v)


def _initial_mask(exp: ScaledExperiment, eps: float, grid, shift) -> np.ndarray:
    ax = [eps * grid.axis(a) - shift[a] for a in range(2)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    rho = exp.rho_of(eps)
    G = exp.G
    if isinstance(G, Ball):
        r = G.radius - rho
        return (X - G.center[0]) ** 2 + (Y - G.center[1]) ** 2 < r * r
    poly = Polygon(np.asarray(G, dtype=float))
    inside = shapely.contains_xy(poly, X, Y)
    if rho > 0:
        d = shapely.distance(poly.boundary, shapely.points(X[inside], Y[inside]))
        keep = np.zeros_like(inside)
        keep[inside] = d > rho
        inside = keep
    return inside


def scaled_solve_kpp(exp: ScaledExperiment, eps: float, seed: int,
                     times: Sequence[float] | None = None) -> list[ScaledField]:
    """Solve the unscaled KPP problem and snapshot u at t / eps for each t.

    The box covers the window B_{1/delta} / eps plus `margin` with zero
    Dirichlet data. The Dirichlet solution lies below the full-space one,
    so inclusions of the form "set inside the superlevel set" remain valid;
    whether the edge was touched is recorded for the opposite inclusion.
    """
    times = sorted(exp.times if times is None else times)
    spec = exp.spec
    shift = exp.shift_of(eps)
    h = exp.grid_h
    center = _snap(shift / eps, h)
    grid = kpp_grid(spec, (1 / exp.delta) / eps + exp.margin, h=h, center=center)
    env = build_environment(spec, seed)
    u = np.where(_initial_mask(exp, eps, grid, shift), exp.theta, 0.0)
    sol = SolutionField(grid, u, env)
    stepper = KPPStepper(sol, env, exp.reaction, guard=False)
    touched = [False]

    def watch(s):
        if stepper.ring > GUARD_LEVEL:
            touched[0] = True
        return False

    out = []
    for t in times:
        stepper.run_until(t / eps, callback=watch)
        out.append(ScaledField(t, eps, grid, sol.u.copy(), shift, touched[0]))
    return out


def _initial_distance(exp: ScaledExperiment, eps: float, grid, shift) -> np.ndarray:
    """-dist(x, (G + y) / eps eroded by rho / eps), in unscaled units, 0 inside."""
    ax = [eps * grid.axis(a) - shift[a] for a in range(2)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    rho = exp.rho_of(eps)
    G = exp.G
    if isinstance(G, Ball):
        r = np.hypot(X - G.center[0], Y - G.center[1])
        dist = np.maximum(r - (G.radius - rho), 0.0)
    else:
        core = Polygon(np.asarray(G, dtype=float))
        if rho > 0:
            core = core.buffer(-rho)
        dist = shapely.distance(core, shapely.points(X, Y))
    return -dist / eps


def scaled_solve_geq_set(exp: ScaledExperiment, eps: float, seed: int,
                         times: Sequence[float] | None = None) -> list[ScaledField]:
    """Reachable set from (G + y_eps) / eps at unscaled times t / eps.

    The level function starts at minus the distance to the set and the
    mask uses the calibrated threshold schedule of the solver, so u in
    the returned fields is the 0/1 indicator of the reachable set.
    """
    times = sorted(exp.times if times is None else times)
    spec = exp.spec
    shift = exp.shift_of(eps)
    h = exp.grid_h
    grid = geq_grid(spec, (1 / exp.delta) / eps + exp.margin, h=h,
                    center=_snap(shift / eps, h))
    env = build_environment(spec, seed)
    horizon = times[-1] / eps
    kappa = threshold_schedule(spec, grid, horizon)
    phi = np.maximum(_initial_distance(exp, eps, grid, shift), -grid.half_width)
    lf = LevelFunction(grid, np.ascontiguousarray(phi), env)
    stepper = HJStepper(lf, env)
    touched = [False]

    def watch(s):
        if stepper.ring >= -kappa[min(s.steps, len(kappa) - 1)]:
            touched[0] = True
        return False

    out = []
    for t in times:
        stepper.run_until(t / eps, callback=watch)
        k = kappa[min(lf.steps, len(kappa) - 1)]
        out.append(ScaledField(t, eps, grid, (lf.phi >= -k).astype(float), shift, touched[0]))
    return out


def scaled_solve(exp: ScaledExperiment, eps: float, seed: int,
                 times: Sequence[float] | None = None) -> list[ScaledField]:
    if exp.spec.mode is Mode.KPP:
        return scaled_solve_kpp(exp, eps, seed, times)
    return scaled_solve_geq_set(exp, eps, seed, times)


# ----------------------------------------------------------------------
# rasterization and margins
# ----------------------------------------------------------------------
def raster(poly, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Closed-set membership of the points (X, Y) in a polygon.

    Convex polygons use a polar lookup around their centroid; anything
    else falls back to shapely.
    """
    hull = poly.convex_hull
    if poly.geom_type != "Polygon" or poly.area < hull.area * (1 - 1e-12):
        return shapely.intersects_xy(poly, X, Y)
    c = np.array(poly.centroid.coords[0])
    v = np.array(poly.exterior.coords[:-1]) - c
    ang = np.arctan2(v[:, 1], v[:, 0])
    order = np.argsort(ang)
    v, ang = v[order], ang[order]
    px, py = X - c[0], Y - c[1]
    pa = np.arctan2(py, px)
    j = np.searchsorted(ang, pa) % len(v)
    i = (j - 1) % len(v)
    a, b = v[i], v[j]
    ex, ey = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    # p inside iff it lies on the inner side of the edge between the two
    # vertices bracketing its angle
    cross = ex * (py - a[..., 1]) - ey * (px - a[..., 0])
    scale = np.hypot(ex, ey)
    return cross >= -1e-12 * scale


def _clearance(inner: np.ndarray, outer: np.ndarray, cell: float) -> float:
    """Signed clearance of `inner` inside `outer`, in units of `cell`.

    Positive: every inner node is at least that far from the complement of
    outer. Negative: the worst offending node is that far from outer.
    """
    if not inner.any():
        return math.inf
    bad = inner & ~outer
    if bad.any():
        if not outer.any():
            return -math.inf
        return -cell * float(ndimage.distance_transform_edt(~outer)[bad].max())
    return cell * float(ndimage.distance_transform_edt(outer)[inner].min())


@dataclass
class SandwichResult:
    eps: float
    t: float
    seed: int
    inner: bool
    outer: bool
    inner_margin: float
    outer_margin: float
    outer_vacuous: bool
    valid: bool = True

    @property
    def passed(self) -> bool:
        return self.valid and self.inner and self.outer

    def to_dict(self) -> dict:
        return {"eps": self.eps, "t": self.t, "seed": self.seed, "inner": self.inner,
                "outer": self.outer, "inner_margin": self.inner_margin,
                "outer_margin": self.outer_margin, "outer_vacuous": self.outer_vacuous,
                "valid": self.valid, "passed": self.passed}


def sandwich_from_field(exp: ScaledExperiment, f: ScaledField, seed: int) -> SandwichResult:
    """Inclusion checks for one snapshot inside the window B_{1/delta}."""
    sx, sy = f.scaled_axes()
    X, Y = np.meshgrid(sx, sy, indexing="ij")
    R = 1 / exp.delta
    window = X * X + Y * Y <= R * R
    gamma = f.u >= exp.theta_prime
    inner_poly = exp.target(f.t, 1 - exp.delta)
    outer_poly = exp.target(f.t, 1 + exp.delta)
    inner_set = raster(inner_poly, X, Y) & window
    outer_set = raster(outer_poly, X, Y)
    observed = gamma & window
    cell = f.eps * f.grid.h
    inner_m = _clearance(inner_set, gamma, cell)
    outer_m = _clearance(observed, outer_set, cell)
    vacuous = bool(outer_set[window].all())
    valid = vacuous or not f.touched
    return SandwichResult(f.eps, f.t, seed, inner_m > 0, outer_m > 0, inner_m, outer_m,
                          vacuous, valid)


def sandwich_check(exp: ScaledExperiment, eps: float, seed: int,
                   times: Sequence[float] | None = None) -> list[SandwichResult]:
    """Inner and outer inclusions at each observation time from one solve.

    A result is marked invalid (and counts as a failure) when the outer
    inclusion is not vacuous and the front had reached the box edge. For
    G-equation specs the mask is the reachable set from G.
    """
    fields = scaled_solve(exp, eps, seed, times)
    return [sandwich_from_field(exp, f, seed) for f in fields]


# ----------------------------------------------------------------------
# pointwise limits
# ----------------------------------------------------------------------
@dataclass
class PointwiseResult:
    eps: float
    seed: int
    inside_min: float   # smallest u at probes well inside G + tS
    outside_max: float  # largest u at probes well outside
    n_inside: int
    n_outside: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.inside_min >= 1 - self.tol and self.outside_max <= self.tol


def probe_points(exp: ScaledExperiment, t: float, kappa: float, n: int = 24
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Probes at distance >= kappa inside and outside G + t S (in B_{1/delta})."""
    poly = exp.target(t)
    R = 1 / exp.delta
    s = np.linspace(-R, R, n)
    P = np.stack(np.meshgrid(s, s, indexing="ij"), -1).reshape(-1, 2)
    P = P[np.linalg.norm(P, axis=1) <= R]
    pts = shapely.points(P)
    d = shapely.distance(poly.boundary, pts)
    inside = shapely.contains(poly, pts)
    return P[inside & (d >= kappa)], P[~inside & (d >= kappa)]


def pointwise_limit_check(exp: ScaledExperiment, eps: float, seed: int, t: float = 1.0,
                          kappa: float = 0.5, tol: float = 0.1) -> PointwiseResult:
    """u_eps(t, x + y_eps) near 1 well inside G + tS and near 0 well outside."""
    f = scaled_solve_kpp(exp, eps, seed, [t])[0]
    pin, pout = probe_points(exp, t, kappa)
    vin = f.value_at(pin) if len(pin) else np.array([1.0])
    vout = f.value_at(pout) if len(pout) else np.array([0.0])
    if f.touched and len(pout):
        raise BoundaryReached("outside probes are not covered by the Dirichlet box")
    return PointwiseResult(eps, seed, float(vin.min()), float(vout.max()),
                           len(pin), len(pout), tol)


# ----------------------------------------------------------------------
# G-equation limit
# ----------------------------------------------------------------------
@dataclass
class GEQLimitResult:
    eps: float
    t: float
    seed: int
    max_error: float
    tolerance: float
    n_probes: int

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {"eps": self.eps, "t": self.t, "seed": self.seed, "max_error": self.max_error,
                "tolerance": self.tolerance, "n_probes": self.n_probes, "passed": self.passed}


def geq_probes(exp: ScaledExperiment, t: float, n: int = 21) -> np.ndarray:
    """Lattice probes covering supp(u0) + t S with a margin."""
    u0 = exp.u0
    ext = min(u0.support_radius(), 1 / exp.delta) + t * float(np.max(exp.shape.radii)) + 0.25
    s = np.linspace(-ext, ext, n)
    P = np.stack(np.meshgrid(s, s, indexing="ij"), -1).reshape(-1, 2)
    return P + np.asarray(u0.center)


def scaled_solve_geq(exp: ScaledExperiment, eps: float, seed: int, t: float,
                     extent: float | None = None) -> LevelFunction:
    """Unscaled level function at time t / eps started from u0 (minus rho).

    The box covers supp(u0) + (c_max + v_max) t, which contains the region
    influenced by the data; outside it u keeps its far-field value.
    """
    spec, u0 = exp.spec, exp.u0
    shift = exp.shift_of(eps)
    h = exp.grid_h
    if extent is None:
        base = u0.support_radius() if math.isfinite(u0.support_radius()) else 1 / exp.delta
        extent = base + reach_speed(spec) * t + 0.5
    c_un = np.asarray(u0.center) + shift
    grid = geq_grid(spec, extent / eps + 4 * h, h=h, center=_snap(c_un / eps, h))
    env = build_environment(spec, seed)
    X = grid.coordinates()
    phi = u0(eps * X - shift) - exp.rho_of(eps)
    lf = LevelFunction(grid, np.ascontiguousarray(phi), env)
    far = float(u0.profile(np.array(1e9))) if u0.kind == "bump" else None
    guard = None if far is None else far - exp.rho_of(eps) + 1e-9
    HJStepper(lf, env, guard=guard).run_until(t / eps)
    return lf


def geq_limit_check(exp: ScaledExperiment, eps: float, seed: int, t: float = 1.0,
                    tol: float = 0.1, m_emp: float = 0.0, delta_geom: float = 0.0,
                    probes: np.ndarray | None = None) -> GEQLimitResult:
    """Largest |u_eps(t, x + y_eps) - ubar(t, x)| over probes.

    ubar is the sup of u0 over x - t S. The tolerance is
    L_u0 * M_emp * delta_geom + rho(eps) + tol.
    """
    if exp.u0 is None:
        raise ConfigError("G-equation limit needs u0")
    lf = scaled_solve_geq(exp, eps, seed, t)
    P = geq_probes(exp, t) if probes is None else np.atleast_2d(probes)
    shift = exp.shift_of(eps)
    grid = lf.grid
    origin = np.array([grid.axis(0)[0], grid.axis(1)[0]])
    got = np.array([_stencils._bilinear(lf.phi, *(p + shift) / eps, origin, grid.h) for p in P])
    want = sup_dilation(exp.u0, exp.shape, t, P)
    err = float(np.max(np.abs(got - want)))
    tolerance = exp.u0.lipschitz * m_emp * delta_geom + exp.rho_of(eps) + tol
    return GEQLimitResult(eps, t, seed, err, tolerance, len(P))


# ----------------------------------------------------------------------
# pass fractions
# ----------------------------------------------------------------------
@dataclass
class PassFraction:
    eps: float
    t: float | None
    passes: int
    n: int

    @property
    def fraction(self) -> float:
        return self.passes / self.n if self.n else math.nan

    def wilson(self, level: float = 0.95) -> tuple[float, float]:
        ci = binomtest(self.passes, self.n).proportion_ci(confidence_level=level, method="wilson")
        return float(ci.low), float(ci.high)

    def to_dict(self) -> dict:
        lo, hi = self.wilson()
        return {"eps": self.eps, "t": self.t, "passes": self.passes, "n": self.n,
                "fraction": self.fraction, "wilson_low": lo, "wilson_high": hi}


def pass_fractions(results: Sequence[SandwichResult], by_time: bool = True) -> list[PassFraction]:
    """Group sandwich results by eps (and t). Without by_time a seed passes
    only when it passes at every observation time."""
    out = []
    eps_vals = sorted({r.eps for r in results}, reverse=True)
    for e in eps_vals:
        rs = [r for r in results if r.eps == e]
        if by_time:
            for t in sorted({r.t for r in rs}):
                sub = [r for r in rs if r.t == t]
                out.append(PassFraction(e, t, sum(r.passed for r in sub), len(sub)))
        else:
            seeds = sorted({r.seed for r in rs})
            ok = sum(all(r.passed for r in rs if r.seed == s) for s in seeds)
            out.append(PassFraction(e, None, ok, len(seeds)))
    return out


def monotone_in_eps(fracs: Sequence[PassFraction]) -> bool:
    """Pass fraction does not drop below the previous (coarser) eps by more
    than its Wilson interval, for each observation time."""
    times = sorted({f.t for f in fracs}, key=lambda v: -1 if v is None else v)
    for t in times:
        seq = sorted([f for f in fracs if f.t == t], key=lambda f: -f.eps)
        for a, b in zip(seq, seq[1:]):
            if b.fraction < a.wilson()[0]:
                return False
    return True


def run_sandwich(exp: ScaledExperiment, eps_list: Sequence[float] | None = None,
                 seeds_per_eps: int | None = None, mapper: Callable = map
                 ) -> list[SandwichResult]:
    """All sandwich checks for the experiment (one solve per seed)."""
    exp.check()
    jobs = [(e, s) for e in (eps_list or exp.eps_list) for s in exp.seeds(e, seeds_per_eps)]
    rows = mapper(_SandwichCell(exp), jobs)
    return [r for rs in rows for r in rs]


@dataclass
class _SandwichCell:
    exp: ScaledExperiment

    def __call__(self, job):
        eps, seed = job
        return sandwich_check(self.exp, eps, seed)


def write_summary(path, fracs: Sequence[PassFraction]) -> None:
    cols = ["eps", "t", "passes", "n", "fraction", "wilson_low", "wilson_high"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for f in fracs:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in f.to_dict().items()})
