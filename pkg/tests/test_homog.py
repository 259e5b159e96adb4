import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from homoglab.env import build_environment
from homoglab.errors import ConfigError
from homoglab.homog import (PassFraction, RadialProfile, ScaledExperiment, geq_limit_check,
                            monotone_in_eps, pass_fractions, pointwise_limit_check, raster,
                            run_sandwich, sandwich_check, sandwich_from_field, scaled_solve_geq,
                            scaled_solve_kpp, sup_dilation, write_summary)
from homoglab.pde import init_datum, solve_until
from homoglab.wulff import Ball, assemble_shape, ball_shape, estimate_speed_table
from specs import CONST_GEQ, CONST_KPP, RANDOM_GEQ, RANDOM_KPP


def const_exp(**kw):
    base = dict(spec=CONST_KPP, shape=ball_shape(2.0, K=128), rho="zero", shift="none")
    base.update(kw)
    return ScaledExperiment(**base)


@pytest.fixture(scope="module")
def fine_field():
    """Constant environment, G = B_1, t = 1, eps = 1/32, delta = 0.15."""
    exp = const_exp(delta=0.15, times=(1.0,))
    return exp, scaled_solve_kpp(exp, 1 / 32, 0)[0]


# ---------------------------------------------------------------- experiment
def test_experiment_validation():
    with pytest.raises(ConfigError):
        const_exp(delta=1.5).check()
    with pytest.raises(ConfigError):
        const_exp(eps_list=(1 / 8, 1 / 4)).check()
    with pytest.raises(ConfigError):
        const_exp(G=Ball((3.5, 0.0), 1.0)).check()
    assert const_exp().check().rho_of(0.25) == 0.0


def test_schedules():
    exp = ScaledExperiment(CONST_KPP, ball_shape())
    assert exp.rho_of(1 / 16) == 0.25
    assert exp.shift_of(1 / 4)[0] == 0.5 and exp.shift_of(1 / 8)[0] == -0.5
    assert np.linalg.norm(exp.shift_of(1 / 32)) <= exp.shift_bound
    assert exp.seeds(1 / 8, 3) == exp.seeds(1 / 8, 5)[:3]
    assert set(exp.seeds(1 / 8, 3)).isdisjoint(exp.seeds(1 / 16, 3))


# ---------------------------------------------------------------- rescaled KPP
def test_unit_scale_is_the_ordinary_solve():
    exp = const_exp(spec=RANDOM_KPP, delta=0.5, times=(2.0,))
    f = scaled_solve_kpp(exp, 1.0, 7)[0]
    env = build_environment(RANDOM_KPP, 7)
    u0 = np.where(f.grid.distance_from((0, 0)) < 1.0, 0.5, 0.0)
    ref = solve_until(init_datum(f.grid, env, u0), env, exp.reaction, 2.0, guard=False)
    assert np.array_equal(f.u, ref.u)


def test_datum_height_comparison():
    low = scaled_solve_kpp(const_exp(spec=RANDOM_KPP, theta=0.3), 1 / 4, 3)
    high = scaled_solve_kpp(const_exp(spec=RANDOM_KPP, theta=1.0), 1 / 4, 3)
    for a, b in zip(low, high):
        assert np.all(a.u <= b.u + 1e-12)
        assert a.u.max() <= 1.0


def test_constant_front_between_balls(fine_field):
    exp, f = fine_field
    res = sandwich_from_field(exp, f, 0)
    assert res.inner and res.outer and res.valid
    R = np.hypot(*np.meshgrid(*f.scaled_axes(), indexing="ij"))
    gamma = f.u >= 0.5
    assert gamma[R <= 1 + 2 * 0.85].all() and not gamma[R >= 1 + 2 * 1.15].any()


def test_speed_two_ball_sandwich(fine_field):
    _, f = fine_field
    exp = const_exp(delta=0.2)
    res = sandwich_from_field(exp, f, 0)
    assert res.passed and res.inner_margin > 0 and res.outer_margin > 0


def test_probes_straddling_the_front(fine_field):
    _, f = fine_field
    ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang)], 1)
    assert f.value_at(2.5 * ring).min() >= 0.9
    assert f.value_at(3.5 * ring).max() <= 0.1
    assert f.u.max() <= 1.0


def test_pointwise_report():
    exp = const_exp(delta=0.2)
    res = pointwise_limit_check(exp, 1 / 16, 0, t=1.0, kappa=1.0)
    assert res.passed and res.n_inside > 0 and res.n_outside > 0


def test_outer_inclusion_at_small_time():
    exp = const_exp(spec=RANDOM_KPP, rho="sqrt", times=(0.05,))
    for r in sandwich_check(exp, 1 / 4, 1):
        assert r.outer and r.valid


def test_geq_sandwich_constant():
    exp = const_exp(spec=CONST_GEQ, shape=ball_shape(1.0, K=128), times=(0.5, 1.0))
    for r in sandwich_check(exp, 1 / 8, 0):
        assert r.passed, r.to_dict()


# ---------------------------------------------------------------- G-equation limit
def test_constant_datum_stays_constant():
    exp = const_exp(spec=RANDOM_GEQ, shape=ball_shape(), u0=RadialProfile("const", height=0.3))
    lf = scaled_solve_geq(exp, 1 / 4, 2, 1.0, extent=2.0)
    assert np.all(lf.phi == 0.3)
    assert geq_limit_check(exp, 1 / 4, 2, probes=[[0.0, 0.0], [1.0, 1.0]]).max_error == 0.0


def test_cone_datum():
    exp = const_exp(spec=CONST_GEQ, shape=ball_shape(1.0, K=256), u0=RadialProfile("cone"),
                    delta=0.5)
    P = np.array([[0.0, 0.0], [0.5, 0.5], [1.5, 0.0], [0.0, -1.8], [1.2, 1.2]])
    res = geq_limit_check(exp, 1 / 4, 0, t=1.0, tol=0.0, probes=P)
    exact = -np.maximum(np.linalg.norm(P, axis=1) - 1.0, 0.0)
    assert np.allclose(sup_dilation(exp.u0, exp.shape, 1.0, P), exact, atol=1e-3)
    assert res.max_error <= 2 * 0.1 / 4 + 1e-3


def test_random_geq_bump_is_bounded_by_datum():
    exp = const_exp(spec=RANDOM_GEQ, shape=ball_shape(1.0), u0=RadialProfile("bump"))
    lf = scaled_solve_geq(exp, 1 / 4, 3, 1.0)
    assert lf.phi.max() <= 1.0 + 1e-12 and lf.phi.min() >= -1e-12


@given(x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
       y=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
       t=st.floats(0.05, 2), s=st.floats(0.05, 2))
def test_dilation_regularity(x, y, t, s):
    shape = assemble_shape(_offset_table())
    u0 = RadialProfile("bump", radius=1.5)
    M = float(shape.radii.max())
    a = sup_dilation(u0, shape, t, [x])[0]
    b = sup_dilation(u0, shape, s, [y])[0]
    bound = u0.lipschitz * (math.dist(x, y) + M * abs(t - s))
    assert abs(a - b) <= bound + 1e-9
    assert 0.0 <= a <= u0.height


def _offset_table():
    from homoglab.wulff import DirectionalSpeedTable, unit_directions
    d = unit_directions(32)
    ve = d[:, 0] * 0.5
    w = ve + np.sqrt(ve ** 2 + 0.75)
    return DirectionalSpeedTable(d, 1 / w, np.zeros(32), 1.0, 1)


# ---------------------------------------------------------------- shift robustness
@pytest.fixture(scope="module")
def random_shape():
    tab = estimate_speed_table(RANDOM_KPP, K=16, R=12.0, samples=2)
    return assemble_shape(tab)


def test_shift_robustness(random_shape):
    kw = dict(spec=RANDOM_KPP, shape=random_shape, rho="zero", times=(0.5, 1.0),
              delta=0.25, seeds_per_eps=6)
    a = ScaledExperiment(shift="alternate", **kw)
    b = ScaledExperiment(shift="none", **kw)
    fa = pass_fractions(run_sandwich(a, [1 / 8]), by_time=False)[0]
    fb = pass_fractions(run_sandwich(b, [1 / 8]), by_time=False)[0]
    lo, hi = fb.wilson()
    assert lo <= fa.fraction <= hi


# ---------------------------------------------------------------- statistics
def test_wilson_interval():
    f = PassFraction(1 / 8, 1.0, 45, 50)
    p, n, z = 0.9, 50, 1.959963984540054
    mid = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert f.wilson() == pytest.approx((mid - half, mid + half), abs=1e-9)


def test_monotone_trend():
    ok = [PassFraction(1 / 4, 1.0, 30, 50), PassFraction(1 / 8, 1.0, 29, 50),
          PassFraction(1 / 16, 1.0, 48, 50)]
    assert monotone_in_eps(ok)
    bad = [PassFraction(1 / 4, 1.0, 48, 50), PassFraction(1 / 8, 1.0, 30, 50)]
    assert not monotone_in_eps(bad)


def test_pass_fractions_and_summary(tmp_path):
    from homoglab.homog import SandwichResult
    rs = [SandwichResult(0.25, t, s, True, s != 1 or t < 1, 0.1, 0.1, False)
          for s in range(3) for t in (0.5, 1.0)]
    per_t = pass_fractions(rs)
    assert [(f.t, f.passes) for f in per_t] == [(0.5, 3), (1.0, 2)]
    joint = pass_fractions(rs, by_time=False)
    assert joint[0].passes == 2 and joint[0].n == 3
    p = tmp_path / "s.csv"
    write_summary(p, per_t)
    assert p.read_text().splitlines()[0] == "eps,t,passes,n,fraction,wilson_low,wilson_high"


# ---------------------------------------------------------------- rasterization
@given(seed=st.integers(0, 10_000))
def test_raster_agrees_with_shapely(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 2))
    poly = Polygon(pts).convex_hull
    X, Y = rng.uniform(-3, 3, size=(2, 400))
    got = raster(poly, X, Y)
    ref = np.array([poly.contains(Point(x, y)) for x, y in zip(X, Y)])
    near = np.array([poly.exterior.distance(Point(x, y)) < 1e-9 for x, y in zip(X, Y)])
    assert np.array_equal(got[~near], ref[~near])
