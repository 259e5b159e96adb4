"""Acceptance suite: one pass/fail line per criterion.

Run with pytest (the lines are repeated in the terminal summary) or as a
script, ``python3 tests/test_acceptance.py [AC1 AC5 ...]``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import tomli_w
from scipy import ndimage

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import report  # noqa: E402
from homoglab.cli import main as cli_main  # noqa: E402
from homoglab.env import EnvironmentSpec, ReactionSpec, build_environment  # noqa: E402
from homoglab.geq import (LevelFunction, calibrate_threshold, control_oracle,  # noqa: E402
                          distance_level, evolve, geq_grid, hj_step, reach_speed)
from homoglab.homog import (RadialProfile, ScaledExperiment, geq_limit_check,  # noqa: E402
                            monotone_in_eps, pass_fractions, run_sandwich)
from homoglab.pde import SolutionField, kpp_grid, step  # noqa: E402
from homoglab.subadd import AdditiveProcess, estimate_limit  # noqa: E402
from homoglab.ttime import (calibrate_m, check_ball_sandwich, check_lipschitz_in_target,  # noqa: E402
                            check_linear_bound, check_restart_monotonicity,
                            check_subadditivity, solve_times, travel_time)
from homoglab.wulff import (assemble_shape, check_convexity, compare_tables,  # noqa: E402
                            estimate_speed_table)
from specs import CONST_KPP, FLOW_GEQ, RANDOM_GEQ, RANDOM_KPP  # noqa: E402

LOG = ReactionSpec()
PL = ReactionSpec(form="PIECEWISE_LINEAR")


def _elapsed(t0):
    return f"{time.perf_counter() - t0:.0f}s"


def random_spec(rng, mode):
    """A random admissible environment law."""
    while True:
        if mode == "KPP":
            lam = rng.uniform(0.5, 1.0)
            gmin = rng.uniform(0.5, 1.5)
            spec = EnvironmentSpec(ellipticity=lam, diffusion_max=lam + rng.uniform(0.0, 1.0),
                                   drift_max=rng.uniform(0.0, 0.5) * math.sqrt(lam * gmin),
                                   reaction_min=gmin, reaction_max=gmin + rng.uniform(0.0, 1.0))
        else:
            cmin = rng.uniform(0.8, 1.0)
            spec = EnvironmentSpec(mode="GEQ", speed_min=cmin,
                                   speed_max=cmin + rng.uniform(0.0, 0.4),
                                   stream_amplitude=rng.uniform(0.0, 0.1), mollify_radius=0.5)
        try:
            spec.check()
        except ValueError:
            continue
        return spec


# ---------------------------------------------------------------- criteria
def ac1():
    t0 = time.perf_counter()
    tab = estimate_speed_table(CONST_KPP, K=32, R=40.0, samples=2)
    ok = bool(np.all((tab.w >= 1.8) & (tab.w <= 2.2)))
    return ok, f"w in [{tab.w.min():.4f}, {tab.w.max():.4f}] over 32 directions ({_elapsed(t0)})"


def ac2():
    t0 = time.perf_counter()
    tab = estimate_speed_table(FLOW_GEQ, K=32, R=20.0, samples=2, h=0.1)
    got = {"e1": tab.w[0], "-e1": tab.w[16], "e2": tab.w[8]}
    want = {"e1": 1.5, "-e1": 0.5, "e2": math.sqrt(0.75)}
    err = {k: abs(got[k] / want[k] - 1) for k in want}
    ok = max(err.values()) <= 0.05
    txt = ", ".join(f"w({k})={got[k]:.4f} ({100 * err[k]:.1f}%)" for k in want)
    return ok, f"{txt} ({_elapsed(t0)})"


def _structural(spec, seeds, m):
    fails, n = [], 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        env = build_environment(spec, seed)
        ang = rng.uniform(0, 2 * np.pi, 2)
        x = rng.uniform(4.0, 8.0) * np.array([math.cos(ang[0]), math.sin(ang[0])])
        z = rng.uniform(0.3, 0.7) * x + rng.normal(scale=1.0, size=2)
        w = x + rng.uniform(1.0, 3.0) * np.array([math.cos(ang[1]), math.sin(ang[1])])
        t0 = float(rng.uniform(0.0, 4.0))
        reps = [check_subadditivity(env, t0, (0, 0), z, x, m),
                check_lipschitz_in_target(env, t0, (0, 0), x, w, m),
                check_linear_bound(travel_time(env, t0, (0, 0), x), m),
                check_restart_monotonicity(env, t0, (0, 0), (0, 0), x, m, m)]
        s = solve_times(env, t0, (0, 0), np.empty((0, 2)), horizon=3 * m, deadline=3 * m,
                        trace_every=0.25)
        reps.append(check_ball_sandwich(s.trace, m, s.grid.h))
        n += len(reps)
        fails += [(seed, r.name, r.margin) for r in reps if not r.passed]
    return fails, n


def ac3():
    t0 = time.perf_counter()
    out = []
    all_fails = []
    for name, spec in (("KPP", RANDOM_KPP), ("GEQ", RANDOM_GEQ)):
        m = calibrate_m(spec, n_seeds=8).m_emp
        fails, n = _structural(spec, range(100, 120), m)
        all_fails += fails
        out.append(f"{name}: {len(fails)}/{n} violations (M={m:.3g})")
    detail = "; ".join(out) + f" ({_elapsed(t0)})"
    if all_fails:
        detail += f" first: {all_fails[0]}"
    return not all_fails, detail


def ac4():
    est = estimate_limit(AdditiveProcess(), [8, 16, 32, 64, 128], 200, seed=11)
    se = est.sds[-1] / math.sqrt(200)
    ok = abs(est.limit - 1.5) <= 3 * se and est.sds[-1] <= 0.5 * est.sds[0]
    return ok, (f"limit {est.limit:.5f} (|diff| = {abs(est.limit - 1.5) / se:.2f} SE), "
                f"SD(128)/SD(8) = {est.sds[-1] / est.sds[0]:.3f}")


def _ordered_pair(rng, shape, lo, hi):
    a = rng.uniform(lo, hi, size=shape)
    b = np.minimum(a + rng.uniform(0, hi - lo, size=shape) * (rng.uniform(size=shape) < 0.7),
                   hi)
    return a, b


def ac5():
    rng = np.random.default_rng(5)
    worst_k = worst_g = math.inf
    steps = 25
    for i in range(50):
        spec = random_spec(rng, "KPP")
        env = build_environment(spec, i)
        g = kpp_grid(spec, 4.0)
        a, b = _ordered_pair(rng, g.shape, 0.0, 1.0)
        sa, sb = SolutionField(g, a, env), SolutionField(g, b, env)
        form = LOG if i % 2 else PL
        for _ in range(steps):
            sa, sb = step(sa, env, form), step(sb, env, form)
            worst_k = min(worst_k, float((sb.u - sa.u).min()))
    for i in range(50):
        spec = random_spec(rng, "GEQ")
        env = build_environment(spec, i)
        g = geq_grid(spec, 2.0)
        a, b = _ordered_pair(rng, g.shape, -3.0, 3.0)
        la, lb = LevelFunction(g, a, env), LevelFunction(g, b, env)
        for _ in range(steps):
            la, lb = hj_step(la, env), hj_step(lb, env)
            worst_g = min(worst_g, float((lb.phi - la.phi).min()))
    ok = worst_k >= -1e-10 and worst_g >= -1e-10
    return ok, f"min(u_b - u_a): KPP {worst_k:.3g}, GEQ {worst_g:.3g} over {steps} steps"


def ac6():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    margins, bad = [], []
    for i in range(10):
        mode = "KPP" if i % 2 == 0 else "GEQ"
        spec = random_spec(rng, mode)
        kw = dict(R=16.0, samples=4) if mode == "KPP" else dict(R=12.0, samples=4, h=0.2)
        tab = estimate_speed_table(spec, K=32, seed=i, **kw)
        rep = check_convexity(assemble_shape(tab), tab, seed=i)
        margins.append(rep.worst_margin + rep.slack)
        if not (rep.passed and rep.hull_passed):
            bad.append(i)
    return not bad, (f"{10 - len(bad)}/10 specs convex within slack, smallest "
                     f"margin+slack {min(margins):.3g} ({_elapsed(t0)})")


def ac7():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bad, worst = [], math.inf
    for i in range(5):
        spec = random_spec(rng, "KPP")
        a = estimate_speed_table(spec, LOG, K=16, R=16.0, samples=4, seed=i)
        b = estimate_speed_table(spec, PL, K=16, R=16.0, samples=4, seed=i)
        cmp = compare_tables(a, b)
        worst = min(worst, cmp["margin"])
        if not cmp["passed"]:
            bad.append(i)
    return not bad, (f"{5 - len(bad)}/5 specs agree within 2 CI, smallest margin "
                     f"{worst:.3g} ({_elapsed(t0)})")


AC8_SPEC = EnvironmentSpec(ellipticity=1.2, diffusion_max=1.8, drift_max=0.5,
                           reaction_min=5.0, reaction_max=7.0)


def ac8():
    t0 = time.perf_counter()
    shape = assemble_shape(estimate_speed_table(AC8_SPEC, K=32, R=40.0, samples=4))
    exp = ScaledExperiment(AC8_SPEC, shape, rho="zero", delta=0.25, theta_prime=0.5,
                           times=(0.5, 1.0, 2.0), seeds_per_eps=50, seed=8)
    fr = pass_fractions(run_sandwich(exp), by_time=False)
    by_eps = {f.eps: f for f in fr}
    ok = (by_eps[1 / 8].fraction >= 0.7 and by_eps[1 / 32].fraction >= 0.9
          and monotone_in_eps(fr))
    txt = ", ".join(f"eps=1/{round(1 / f.eps)}: {f.passes}/{f.n}" for f in fr)
    return ok, f"{txt}; monotone={monotone_in_eps(fr)} ({_elapsed(t0)})"


def ac9():
    t0 = time.perf_counter()
    shape = assemble_shape(estimate_speed_table(RANDOM_GEQ, K=32, R=40.0, samples=4, h=0.2))
    exp = ScaledExperiment(RANDOM_GEQ, shape, u0=RadialProfile("bump"), rho="zero",
                           eps_list=(1 / 16,), seed=9)
    res = [geq_limit_check(exp, 1 / 16, s, t=1.0, tol=0.1) for s in exp.seeds(1 / 16, 20)]
    n = sum(r.passed for r in res)
    worst = max(r.max_error for r in res)
    return n >= 18, f"{n}/20 seeds with probe error <= 0.1 (max {worst:.3f}) ({_elapsed(t0)})"


def ac10():
    t0 = time.perf_counter()
    # the level-set corner smearing costs about twice the threshold in distance, so the
    # oracle step has to be coarse enough for the allowance to cover it
    spec, t, n_steps = RANDOM_GEQ, 4.0, 8
    g = geq_grid(spec, reach_speed(spec) * t + 1.0, h=0.05)
    kappa = calibrate_threshold(spec, g, t, range(900, 908), n_steps)
    allow = reach_speed(spec) * t / n_steps + 2 * g.h
    worst_excess, missing = 0.0, 0
    for seed in range(20):
        env = build_environment(spec, seed)
        lf = evolve(distance_level(g, env, (0, 0)), env, t)
        hj = lf.phi >= -kappa
        om = control_oracle(env, 0.0, (0, 0), t, n_steps, grid=g).mask
        missing += int((om & ~hj).sum())
        dist = ndimage.distance_transform_edt(~om) * g.h
        worst_excess = max(worst_excess, float(dist[hj].max()))
    ok = missing == 0 and worst_excess <= allow
    return ok, (f"oracle nodes outside HJ mask: {missing}; excess {worst_excess:.3f} <= "
                f"{allow:.3f} (threshold {kappa:.3f}) ({_elapsed(t0)})")


AC11_CONFIG = {
    "kind": "full_pipeline", "seed": 7,
    "environment": {"mode": "GEQ", "speed_min": 0.8, "speed_max": 1.2,
                    "stream_amplitude": 0.1, "mollify_radius": 0.5},
    "validate": {"samples": 10},
    "speed_table": {"K": 16, "R": 10.0, "samples": 2, "h": 0.2},
    "sandwich": {"eps_list": [0.25, 0.125], "times": [0.5, 1.0], "seeds_per_eps": 2,
                 "rho": "zero"},
    "geq_limit": {"eps": 0.125, "tol": 0.25, "seeds": 2},
}


def ac11(workdir=None):
    import tempfile
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(dir=workdir) as d:
        d = Path(d)
        cfg = d / "fp.toml"
        cfg.write_text(tomli_w.dumps(AC11_CONFIG))
        codes = [cli_main(["run", str(cfg), "--out", str(d / name)]) for name in ("a", "b")]
        files = sorted(p.name for p in (d / "a").glob("*.csv"))
        same = [(d / "a" / f).read_bytes() == (d / "b" / f).read_bytes() for f in files]
    ok = bool(files) and all(same) and codes[0] == codes[1]
    return ok, (f"{sum(same)}/{len(files)} summaries byte-identical, exit codes {codes} "
                f"({_elapsed(t0)})")


CRITERIA = {f"AC{i}": f for i, f in enumerate(
    [ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10, ac11], start=1)}


@pytest.mark.parametrize("name", list(CRITERIA))
def test_acceptance(name):
    passed, detail = CRITERIA[name]()
    report(name, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    names = sys.argv[1:] or list(CRITERIA)
    results = []
    for name in names:
        passed, detail = CRITERIA[name]()
        report(name, passed, detail)
        results.append(passed)
    sys.exit(0 if all(results) else 1)
