"""Travel times of KPP fronts, arrival times of G-equation reachable sets,
and the structural inequalities they satisfy.

One evolution serves any number of targets: every step the pending
targets are tested and their hit times recorded.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _stencils
from .env import Environment, EnvironmentSpec, Mode, ReactionSpec
from .errors import BoundaryReached, DeadlineExceeded, HypothesisViolation
from .geq import (DEFAULT_H as GEQ_H, HJStepper, distance_level, geq_grid, reach_speed,
                  threshold_schedule)
from .grid import Grid
from .pde import DEFAULT_H as KPP_H, KPPStepper, init_ball_datum, kpp_grid, guard_reach


@dataclass(frozen=True)
class TravelTimeRecord:
    """One travel (KPP) or arrival (GEQ) time.

    tau is a multiple of the grid time step: the first step boundary at
    which the target condition held.
    """

    t0: float
    x0: tuple
    x: tuple
    tau: float
    kind: str
    seed: int
    grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["x0"] = list(self.x0)
        out["x"] = list(self.x)
        return out


@dataclass
class FrontTrace:
    """Radii of the front around the origin at sampled times."""

    times: list = field(default_factory=list)
    inner: list = field(default_factory=list)
    outer: list = field(default_factory=list)

    def add(self, t, mask, dist):
        self.times.append(float(t))
        out = dist[~mask]
        self.inner.append(float(out.min()) if out.size else math.inf)
        ins = dist[mask]
        self.outer.append(float(ins.max()) if ins.size else 0.0)


@dataclass
class Solve:
    """Hit times of one multi-target evolution."""

    taus: np.ndarray
    grid: Grid
    trace: FrontTrace | None = None


def kpp_speed_floor(spec: EnvironmentSpec) -> float:
    """2 sqrt(lambda g_min) - b_max, positive under the drift condition."""
    return 2.0 * math.sqrt(spec.ellipticity * spec.reaction_min) - spec.drift_max


def geq_speed_floor(spec: EnvironmentSpec) -> float:
    return spec.speed_min - math.hypot(*spec.mean_flow)


def default_deadline(spec: EnvironmentSpec, distance: float) -> float:
    """A-priori bound on the time needed to cover `distance` (plus the unit ball)."""
    if spec.mode is Mode.KPP:
        return 2.0 * (distance + 1.0) / kpp_speed_floor(spec) + 4.0 / spec.reaction_min
    return 2.0 * (distance + 1.0) / geq_speed_floor(spec) + 1.0


def _as_points(targets, d):
    pts = np.asarray(targets, dtype=float)
    if d == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    return np.atleast_2d(pts)


def _ball_index(grid: Grid, targets: np.ndarray, radius: float = 1.0):
    idx, starts = [np.empty(0, dtype=np.int64)], [0]
    for x in targets:
        dist = grid.distance_from(x)
        flat = np.flatnonzero(dist.ravel() <= radius)
        idx.append(flat)
        starts.append(starts[-1] + flat.size)
    return np.concatenate(idx).astype(np.int64), np.array(starts, dtype=np.int64)


def _interp_index(grid: Grid, targets: np.ndarray):
    d = grid.dimension
    k = 1 << d
    idx = np.zeros((len(targets), k), dtype=np.int64)
    wts = np.zeros((len(targets), k))
    for p, x in enumerate(targets):
        base, frac = [], []
        for a in range(d):
            s = (x[a] - grid.center[a]) / grid.h + grid.n
            i = min(max(int(math.floor(s)), 0), grid.size - 2)
            base.append(i)
            frac.append(s - i)
        for q in range(k):
            node, w = [], 1.0
            for a in range(d):
                bit = (q >> a) & 1
                node.append(base[a] + bit)
                w *= frac[a] if bit else 1.0 - frac[a]
            idx[p, q] = np.ravel_multi_index(tuple(node), grid.shape)
            wts[p, q] = w
    return idx, wts


def _trace_steps(dt: float, every: float | None, horizon: float):
    if not every:
        return set()
    k = max(1, int(round(every / dt)))
    return set(range(0, int(horizon / dt) + 2, k))


def solve_kpp_times(env: Environment, t0: float, x0, targets, reaction: ReactionSpec,
                    h: float = KPP_H, deadline: float | None = None, height: float = 0.5,
                    trace_every: float | None = None, horizon: float | None = None) -> Solve:
    """Travel times to several targets from one evolution.

    tau_k is the first step time at which every node of B_1(x_k) has
    u >= 1/2. With `horizon`, the evolution continues to that time even
    after all targets are hit (useful with `trace_every`, which records
    the radii of the 1/2-super-level set around x0).
    """
    spec = env.spec
    d = spec.dimension
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    pts = _as_points(targets, d)
    reach = float(np.linalg.norm(pts - x0, axis=1).max()) if len(pts) else 0.0
    if deadline is None:
        deadline = default_deadline(spec, reach)
    T = max(deadline, horizon or 0.0)
    half = max(reach + 2.0, guard_reach(spec, T, height=height) + 1.0)
    grid = kpp_grid(spec, half, h=h, center=tuple(x0))
    sol = init_ball_datum(grid, env, x0, height=height, t0=t0)
    idx, starts = _ball_index(grid, pts)
    hit = np.full(len(pts), -1, dtype=np.int64)
    trace = FrontTrace() if trace_every else None
    marks = _trace_steps(grid.dt, trace_every, T)
    dist0 = grid.distance_from(x0) if trace is not None else None
    pending = _stencils.check_balls(sol.u.ravel(), idx, starts, hit, 0, 0.5)
    if trace is not None:
        trace.add(0.0, sol.u >= 0.5, dist0)
    stop = horizon if horizon is not None else deadline

    def watch(s):
        nonlocal pending
        if pending:
            pending = _stencils.check_balls(s.u.ravel(), idx, starts, hit, s.steps, 0.5)
        if trace is not None and s.steps in marks:
            trace.add(s.t, s.u >= 0.5, dist0)
        return pending == 0 and (horizon is None or s.t >= horizon)

    if pending or horizon is not None:
        KPPStepper(sol, env, reaction).run_until(max(T, stop), callback=watch)
    if (hit < 0).any():
        raise DeadlineExceeded(
            f"{int((hit < 0).sum())} target(s) not reached by t={deadline:.4g}")
    return Solve(hit * grid.dt, grid, trace)


def solve_geq_times(env: Environment, t0: float, x0, targets, h: float = GEQ_H,
                    deadline: float | None = None, trace_every: float | None = None,
                    horizon: float | None = None) -> Solve:
    """Arrival times to several targets from one level-set evolution.

    The arrival time of x is the first step time at which the interpolated
    phi(t, x) >= -kappa(t), with kappa the calibrated mask threshold, so
    that arrival times agree with the reachable-set masks. The box is
    sized for a trial horizon and enlarged when the sets reach its edge.
    """
    spec = env.spec
    d = spec.dimension
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    pts = _as_points(targets, d)
    reach = float(np.linalg.norm(pts - x0, axis=1).max()) if len(pts) else 0.0
    if deadline is None:
        deadline = default_deadline(spec, reach)
    T_need = horizon or 0.0
    trial = max(T_need, min(deadline, (reach + 1.0) / spec.speed_min + 1.0))
    spd = reach_speed(spec)
    while True:
        half = max(reach + 4 * h, spd * trial + 1.0)
        grid = geq_grid(spec, half, h=h, center=tuple(x0))
        try:
            return _geq_run(env, t0, x0, pts, grid, trial, deadline, trace_every, horizon)
        except BoundaryReached:
            if trial >= deadline:
                raise
            trial = min(deadline, 2.0 * trial)


def _geq_run(env, t0, x0, pts, grid, trial, deadline, trace_every, horizon):
    spec = env.spec
    kappa = threshold_schedule(spec, grid, trial)
    lf = distance_level(grid, env, x0, t0)
    idx, wts = _interp_index(grid, pts)
    hit = np.full(len(pts), -1, dtype=np.int64)
    trace = FrontTrace() if trace_every else None
    marks = _trace_steps(grid.dt, trace_every, trial)
    dist0 = grid.distance_from(x0) if trace is not None else None
    pending = _stencils.check_points(lf.phi.ravel(), idx, wts, hit, 0, -kappa[0])
    if trace is not None:
        trace.add(0.0, lf.phi >= -kappa[0], dist0)

    def watch(s):
        nonlocal pending
        kap = kappa[min(s.steps, len(kappa) - 1)]
        if pending:
            pending = _stencils.check_points(s.phi.ravel(), idx, wts, hit, s.steps, -kap)
        if trace is not None and s.steps in marks:
            trace.add(s.t, s.phi >= -kap, dist0)
        return pending == 0 and (horizon is None or s.t >= horizon)

    stepper = HJStepper(lf, env, guard=-float(kappa[-1]))
    stepper.run_until(trial, callback=watch)
    if (hit < 0).any():
        if trial >= deadline:
            raise DeadlineExceeded(
                f"{int((hit < 0).sum())} target(s) not reached by t={deadline:.4g}")
        raise BoundaryReached("trial horizon too short")
    return Solve(hit * grid.dt, grid, trace)


def solve_times(env: Environment, t0: float, x0, targets, reaction: ReactionSpec | None = None,
                h: float | None = None, **kw) -> Solve:
    if env.mode is Mode.KPP:
        return solve_kpp_times(env, t0, x0, targets, reaction or ReactionSpec(),
                               h=h or KPP_H, **kw)
    return solve_geq_times(env, t0, x0, targets, h=h or GEQ_H, **kw)


def _record(env, t0, x0, x, tau, grid) -> TravelTimeRecord:
    return TravelTimeRecord(float(t0), tuple(float(v) for v in np.atleast_1d(x0)),
                            tuple(float(v) for v in np.atleast_1d(x)), float(tau),
                            env.mode.value, int(env.seed), grid.describe())


def travel_time_kpp(env: Environment, t0: float, x0, x, reaction: ReactionSpec,
                    h: float = KPP_H, deadline: float | None = None) -> TravelTimeRecord:
    """First time B_1(x) lies in the 1/2-super-level set of the front from x0."""
    sol = solve_kpp_times(env, t0, x0, [np.atleast_1d(x)], reaction, h=h, deadline=deadline)
    return _record(env, t0, x0, x, sol.taus[0], sol.grid)


def travel_time_geq(env: Environment, t0: float, x0, x, h: float = GEQ_H,
                    deadline: float | None = None) -> TravelTimeRecord:
    """First time x lies in the reachable set from (t0, x0)."""
    sol = solve_geq_times(env, t0, x0, [np.atleast_1d(x)], h=h, deadline=deadline)
    return _record(env, t0, x0, x, sol.taus[0], sol.grid)


def travel_time(env: Environment, t0: float, x0, x, reaction: ReactionSpec | None = None,
                h: float | None = None) -> TravelTimeRecord:
    if env.mode is Mode.KPP:
        return travel_time_kpp(env, t0, x0, x, reaction or ReactionSpec(), h=h or KPP_H)
    return travel_time_geq(env, t0, x0, x, h=h or GEQ_H)


# ----------------------------------------------------------------------
# structural inequalities
# ----------------------------------------------------------------------
@dataclass
class InequalityReport:
    """lhs <= rhs up to tol; margin = rhs - lhs (passes when margin >= -tol)."""

    name: str
    lhs: float
    rhs: float
    tol: float
    detail: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol

    def raise_if_failed(self):
        if not self.passed:
            raise HypothesisViolation(
                f"{self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} margin={self.margin:.3g} "
                f"tol={self.tol:.3g} {self.detail}")

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "tol": self.tol,
                "margin": self.margin, "passed": self.passed, **self.detail}


def tolerance(grid: Grid, m_emp: float) -> float:
    """2 dt + 4 h M: step resolution plus grid slack in distance."""
    return 2.0 * grid.dt + 4.0 * grid.h * m_emp


def _times(env, t0, x0, targets, reaction, h):
    return solve_times(env, t0, x0, targets, reaction, h)


def check_subadditivity(env: Environment, t0: float, x0, z, x, m_emp: float,
                        reaction: ReactionSpec | None = None, h: float | None = None
                        ) -> InequalityReport:
    """tau(x0, x) <= tau(x0, z) + tau^{t0 + tau(x0, z)}(z, x)."""
    first = _times(env, t0, x0, [z, x], reaction, h)
    t_z, t_x = first.taus
    second = _times(env, t0 + t_z, z, [x], reaction, h)
    t_zx = second.taus[0]
    return InequalityReport("subadditivity", float(t_x), float(t_z + t_zx),
                            tolerance(first.grid, m_emp),
                            {"seed": env.seed, "t0": t0, "tau_x0_z": float(t_z),
                             "tau_z_x": float(t_zx)})


def check_restart_monotonicity(env: Environment, t0: float, x0, z, x, t: float,
                               m_emp: float, reaction: ReactionSpec | None = None,
                               h: float | None = None) -> InequalityReport:
    """tau^{t0}(x0, x) <= tau^{t0 + t}(z, x) + t for t >= M(|z - x0| + 1)."""
    gap = np.linalg.norm(np.atleast_1d(z) - np.atleast_1d(x0))
    if t < m_emp * (gap + 1.0) - 1e-12:
        raise ValueError("restart delay below M(|z - x0| + 1)")
    a = _times(env, t0, x0, [x], reaction, h)
    b = _times(env, t0 + t, z, [x], reaction, h)
    return InequalityReport("restart", float(a.taus[0]), float(b.taus[0] + t),
                            tolerance(a.grid, m_emp), {"seed": env.seed, "t0": t0, "t": t})


def check_lipschitz_in_target(env: Environment, t0: float, x0, x, z, m_emp: float,
                              reaction: ReactionSpec | None = None, h: float | None = None
                              ) -> InequalityReport:
    """tau(x0, x) <= tau(x0, z) + M(|x - z| + 1)."""
    s = _times(env, t0, x0, [x, z], reaction, h)
    t_x, t_z = s.taus
    gap = float(np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(z)))
    return InequalityReport("target-lipschitz", float(t_x), float(t_z + m_emp * (gap + 1.0)),
                            tolerance(s.grid, m_emp), {"seed": env.seed, "t0": t0})


def check_linear_bound(record: TravelTimeRecord, m_emp: float, tol: float = 0.0
                       ) -> InequalityReport:
    """tau <= M(|x - x0| + 1)."""
    gap = float(np.linalg.norm(np.subtract(record.x, record.x0)))
    return InequalityReport("linear-bound", record.tau, m_emp * (gap + 1.0), tol,
                            {"seed": record.seed})


def check_ball_sandwich(trace: FrontTrace, m_emp: float, h: float) -> InequalityReport:
    """B_{t/M} inside the set and the set inside B_{Mt}, for sampled t >= M.

    Reported as the worst relative clearance over the sampled times; one
    cell of slack on each radius.
    """
    worst, where = math.inf, None
    for t, rin, rout in zip(trace.times, trace.inner, trace.outer):
        if t < m_emp:
            continue
        m = min(rin + h - t / m_emp, m_emp * t + h - rout)
        if m < worst:
            worst, where = m, t
    if where is None:
        raise ValueError("no sampled time reaches M")
    return InequalityReport("ball-sandwich", 0.0, worst, 0.0, {"t": where})


# ----------------------------------------------------------------------
# calibration of M
# ----------------------------------------------------------------------
@dataclass
class MCalibration:
    """Empirical M with its ingredients (before the safety factor)."""

    m_emp: float
    sandwich: float
    speed_low: float
    speed_high: float
    hair_trigger: float
    safety: float
    n_seeds: int
    horizon: float
    spec_digest: str

    def to_dict(self) -> dict:
        return asdict(self)


def calibration_seeds(spec: EnvironmentSpec, n: int) -> list[int]:
    """Seeds reserved for calibrating `spec`, disjoint in practice from run seeds."""
    root = int(spec.digest(), 16)
    return [int(np.random.SeedSequence(root, spawn_key=(0xCA1, k)).generate_state(
        1, np.uint64)[0]) for k in range(n)]


def minimal_sandwich_m(times, inner, outer) -> float:
    """Smallest M with max(t / r_in(t), r_out(t) / t) <= M at every sampled t >= M."""
    t = np.asarray(times, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.maximum(np.where(np.asarray(inner) > 0, t / np.asarray(inner), np.inf),
                       np.asarray(outer) / t)
    order = np.argsort(t)
    t, q = t[order], q[order]
    keep = t > 0
    t, q = t[keep], q[keep]
    suffix = np.maximum.accumulate(q[::-1])[::-1]
    prev = np.concatenate([[0.0], t[:-1]])
    cand = np.maximum(suffix, prev)
    ok = cand <= t
    if not ok.any():
        return math.inf
    return float(cand[ok].min())


def _hair_trigger(trace: FrontTrace) -> float:
    """First sampled time after which the unit ball stays inside the set."""
    last_bad = 0.0
    for t, rin in zip(trace.times, trace.inner):
        if rin < 1.0:
            last_bad = t
    return last_bad


def calibrate_m(spec: EnvironmentSpec, reaction: ReactionSpec | None = None, n_seeds: int = 50,
                horizon: float | None = None, h: float | None = None, safety: float = 1.5,
                sample_every: float = 0.25, cache_dir=None) -> MCalibration:
    """Empirical M for the linear bound and the ball sandwich.

    Evolves from the unit ball at the origin for `n_seeds` calibration
    seeds, records the radii of the front, and takes the largest of the
    sandwich constant, the reciprocal lower speed, the upper speed and the
    hair-trigger time, times `safety`. Results are cached on disk by spec
    digest when `cache_dir` is given.
    """
    spec.check()
    if spec.mode is Mode.KPP:
        reaction = reaction or ReactionSpec()
        floor = kpp_speed_floor(spec)
        h = h or KPP_H
    else:
        floor = geq_speed_floor(spec)
        h = h or GEQ_H
    if horizon is None:
        horizon = max(10.0, 8.0 / floor)
    key = {"spec": spec.digest(), "reaction": reaction.form.value if reaction else None,
           "n": n_seeds, "horizon": horizon, "h": h, "safety": safety, "every": sample_every}
    path = None
    if cache_dir is not None:
        tag = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:10]
        path = Path(cache_dir) / f"m_emp_{spec.digest()}_{tag}.json"
        if path.exists():
            data = json.loads(path.read_text())
            if data.get("key") == key:
                return MCalibration(**data["calibration"])
    sand, lo, hi, hair = 0.0, math.inf, 0.0, 0.0
    x0 = np.zeros(spec.dimension)
    for seed in calibration_seeds(spec, n_seeds):
        env = Environment(spec, seed)
        if spec.mode is Mode.KPP:
            s = solve_kpp_times(env, 0.0, x0, np.empty((0, spec.dimension)), reaction, h=h,
                                horizon=horizon, deadline=horizon, trace_every=sample_every)
        else:
            s = solve_geq_times(env, 0.0, x0, np.empty((0, spec.dimension)), h=h,
                                horizon=horizon, deadline=horizon, trace_every=sample_every)
        tr = s.trace
        sand = max(sand, minimal_sandwich_m(tr.times, tr.inner, tr.outer))
        # front speeds from the radius growth over the second half
        i, j = int(np.searchsorted(tr.times, 0.5 * horizon)), len(tr.times) - 1
        span = tr.times[j] - tr.times[i]
        lo = min(lo, (tr.inner[j] - tr.inner[i]) / span)
        hi = max(hi, (tr.outer[j] - tr.outer[i]) / span)
        hair = max(hair, _hair_trigger(tr))
    raw = max(sand, 1.0 / lo if lo > 0 else math.inf, hi, hair)
    if not math.isfinite(raw) or raw > 0.5 * horizon:
        raise DeadlineExceeded(f"calibration horizon {horizon} too short for M={raw:.3g}")
    cal = MCalibration(safety * raw, sand, lo, hi, hair, safety, n_seeds, horizon, spec.digest())
    if path is not None:
        os.makedirs(path.parent, exist_ok=True)
        path.write_text(json.dumps({"key": key, "calibration": cal.to_dict()}, indent=1))
    return cal
