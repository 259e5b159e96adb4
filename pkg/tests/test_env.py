import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from homoglab.env import (EnvironmentSpec, Mode, ReactionSpec, build_environment,
                          temporal_dependence_range, validate_hypotheses)
from homoglab.errors import InvalidSpecError
from homoglab.grid import make_grid
from specs import CONST_GEQ, CONST_KPP, RANDOM_GEQ, RANDOM_KPP

coord = st.floats(-50, 50, allow_nan=False)
times = st.floats(0, 50, allow_nan=False)


def _pts(rng, n, scale=20.0):
    return rng.uniform(-scale, scale, size=(n, 2))


def _same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


# ---------------------------------------------------------------- examples
def test_constant_kpp_fields():
    env = build_environment(CONST_KPP, 3)
    f = env.evaluate(2.5, _pts(np.random.default_rng(0), 50))
    assert np.all(f.A == 1.0) and np.all(f.b == 0.0) and np.all(f.g == 1.0)


def test_constant_geq_fields():
    env = build_environment(CONST_GEQ, 3)
    f = env.evaluate(1.0, _pts(np.random.default_rng(0), 50))
    assert np.all(f.c == 1.0) and np.all(f.v == 0.0)


def test_distinct_seeds_give_distinct_fields():
    x = _pts(np.random.default_rng(1), 100)
    g7 = build_environment(RANDOM_KPP, 7).evaluate(0.3, x).g
    g8 = build_environment(RANDOM_KPP, 8).evaluate(0.3, x).g
    assert np.any(g7 != g8)


def test_realization_is_deterministic():
    x = _pts(np.random.default_rng(2), 100)
    a = build_environment(RANDOM_GEQ, 11).evaluate(4.2, x)
    b = build_environment(RANDOM_GEQ, 11).evaluate(4.2, x)
    assert _same(a, b)


def test_shift_probe():
    env = build_environment(RANDOM_KPP, 5)
    x = _pts(np.random.default_rng(3), 100)
    y = np.array([1.2, -0.4])
    lhs = env.shift(3.7, y).evaluate(0.8, x)
    rhs = env.evaluate(0.8 + 3.7, x + y)
    assert _same(lhs, rhs)


def test_temporal_dependence_examples():
    assert temporal_dependence_range(EnvironmentSpec(mollify_radius=0.1)) == pytest.approx(1.2)
    assert temporal_dependence_range(
        EnvironmentSpec(cell_duration=2.0, mollify_radius=0.0)) == 2.0


def test_mode_coercion_and_check():
    assert EnvironmentSpec(mode="GEQ").mode is Mode.GEQ
    with pytest.raises(InvalidSpecError) as err:
        build_environment(EnvironmentSpec(drift_max=2.0), 0)
    assert err.value.hypothesis == "drift-bound"
    with pytest.raises(InvalidSpecError):
        build_environment(EnvironmentSpec(mode="GEQ", mean_flow=(1.0, 0.0)), 0)
    with pytest.raises(InvalidSpecError):
        build_environment(EnvironmentSpec(mollify_radius=0.6), 0)


# ---------------------------------------------------------------- invariants
@given(s=times, y0=coord, y1=coord, t=times, x0=coord, x1=coord, seed=st.integers(0, 2**40))
def test_shift_identity(s, y0, y1, t, x0, x1, seed):
    env = build_environment(RANDOM_GEQ, seed)
    x = np.array([[x0, x1]])
    y = np.array([y0, y1])
    assert _same(env.shift(s, y).evaluate(t, x), env.evaluate(t + s, x + y))


@given(s=times, r=times, y=st.tuples(coord, coord), z=st.tuples(coord, coord),
       t=times, x=st.tuples(coord, coord))
def test_shift_group_law(s, r, y, z, t, x):
    env = build_environment(RANDOM_KPP, 1)
    pt = np.array([x])
    zero = env.shift(0.0, (0.0, 0.0))
    assert _same(zero.evaluate(t, pt), env.evaluate(t, pt))
    a = env.shift(s, y).shift(r, z)
    b = env.shift(s + r, np.add(y, z))
    assert a.offset_t == b.offset_t and a.offset_x == b.offset_x
    assert _same(a.evaluate(t, pt), b.evaluate(t, pt))


@given(seed=st.integers(0, 2**63), t=times, x=st.tuples(coord, coord))
def test_kpp_range_containment(seed, t, x):
    sp = RANDOM_KPP
    f = build_environment(sp, seed).evaluate(t, np.array([x]))
    assert np.all((sp.ellipticity <= f.A) & (f.A <= sp.diffusion_max))
    assert np.all(np.linalg.norm(f.b, axis=-1) <= sp.drift_max + 1e-12)
    assert np.all((sp.reaction_min <= f.g) & (f.g <= sp.reaction_max))


@given(seed=st.integers(0, 2**63), t=times, x=st.tuples(coord, coord))
def test_geq_range_containment(seed, t, x):
    sp = RANDOM_GEQ
    env = build_environment(sp, seed)
    f = env.evaluate(t, np.array([x]))
    assert np.all((sp.speed_min <= f.c) & (f.c <= sp.speed_max))
    assert np.all(np.linalg.norm(f.v, axis=-1) <= sp.bounds().flow + 1e-12)
    psi = env.raw_values(t, np.array([x]))[0][..., 1]
    assert np.all(np.abs(psi) <= sp.stream_amplitude)


def test_lipschitz_bound_on_close_pairs():
    rng = np.random.default_rng(4)
    env = build_environment(RANDOM_KPP, 9)
    lip = RANDOM_KPP.bounds().lipschitz
    x = _pts(rng, 1000)
    dx = rng.normal(size=(1000, 2))
    dx *= (0.05 * rng.uniform(size=(1000, 1))) / np.linalg.norm(dx, axis=1, keepdims=True)
    a, b = env.evaluate(1.3, x), env.evaluate(1.3, x + dx)
    dist = np.linalg.norm(dx, axis=1)
    assert np.all(np.abs(a.g - b.g) <= lip * dist + 1e-12)
    assert np.all(np.abs(a.A - b.A).max(axis=1) <= lip * dist + 1e-12)


def test_reflection_in_law():
    x = np.array([[3.3, -1.7]])
    a = [build_environment(RANDOM_KPP, s).evaluate(0.0, x).g[0] for s in range(1000)]
    b = [build_environment(RANDOM_KPP, s).evaluate(0.0, -x).g[0] for s in range(1000, 2000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_decorrelation_beyond_dependence_range():
    x = np.array([[0.4, 0.7]])
    lag = temporal_dependence_range(RANDOM_KPP) + 1.0
    a, b = [], []
    for s in range(500):
        env = build_environment(RANDOM_KPP, s)
        a.append(env.evaluate(0.0, x).g[0])
        b.append(env.evaluate(lag, x).g[0])
    assert abs(np.corrcoef(a, b)[0, 1]) < 3 / math.sqrt(500)


@given(t=st.floats(0, 30), gap=st.floats(0, 10))
def test_finite_dependence_cells(t, gap):
    env = build_environment(RANDOM_KPP, 2)
    tdep = temporal_dependence_range(RANDOM_KPP)
    later = t + tdep + gap + 1e-9
    assert not env.time_cells(t) & env.time_cells(later)


def test_divergence_free_on_grid():
    env = build_environment(RANDOM_GEQ, 6)
    grid = make_grid(RANDOM_GEQ, 0.1, 3.0)
    sp = env.sampler(grid)
    h = grid.h
    v = sp.fields(0.7).v
    div = ((v[2:, 1:-1, 0] - v[:-2, 1:-1, 0]) + (v[1:-1, 2:, 1] - v[1:-1, :-2, 1])) / (2 * h)
    assert np.abs(div).max() <= 1e-10


def test_pointwise_divergence_small():
    env = build_environment(RANDOM_GEQ, 6)
    rng = np.random.default_rng(5)
    x = _pts(rng, 200, 5.0)
    e = 1e-5
    dv0 = env.evaluate(0.2, x + [e, 0]).v[:, 0] - env.evaluate(0.2, x - [e, 0]).v[:, 0]
    dv1 = env.evaluate(0.2, x + [0, e]).v[:, 1] - env.evaluate(0.2, x - [0, e]).v[:, 1]
    # centred differences of an analytic curl: truncation error only
    assert np.abs((dv0 + dv1) / (2 * e)).max() < 1e-4


@pytest.mark.parametrize("spec", [RANDOM_KPP, RANDOM_GEQ])
def test_sampler_matches_pointwise(spec):
    env = build_environment(spec, 13)
    grid = make_grid(spec, 0.25, 2.0, center=(0.5, -0.25))
    f = env.sampler(grid).fields(1.37)
    p = env.evaluate(1.37, grid.coordinates())
    if spec.mode is Mode.KPP:
        assert _same(f, p)
    else:
        assert np.array_equal(f.c, p.c)


# ---------------------------------------------------------------- reactions
# subnormal u has no relative precision, so f/u is meaningless there
@given(u=st.floats(0, 1, allow_subnormal=False), g=st.floats(0.1, 5),
       form=st.sampled_from(["LOGISTIC", "PIECEWISE_LINEAR"]))
def test_reaction_invariants(u, g, form):
    r = ReactionSpec(form)
    assert r(g, 0.0) == 0.0 and r(g, 1.0) == 0.0
    assert r(g, u) <= g * u + 1e-15
    assert r(g, u) >= r.lower_bound(g, u) - 1e-15
    if u > 0:
        assert g - r(g, u) / u <= r.gap_modulus(g, u) + 1e-12


# ---------------------------------------------------------------- validation
def test_validate_drift_margin():
    ok = validate_hypotheses(EnvironmentSpec(drift_max=1.9), samples=10)
    assert ok.passed and ok["drift-bound"].margin == pytest.approx(0.39)
    bad = validate_hypotheses(EnvironmentSpec(drift_max=2.0), samples=10)
    assert "drift-bound" in [i.name for i in bad.failed()]
    with pytest.raises(InvalidSpecError):
        bad.raise_if_failed()


def test_validate_geq_examples():
    rep = validate_hypotheses(RANDOM_GEQ, samples=10)
    assert rep.passed
    slow = validate_hypotheses(EnvironmentSpec(mode="GEQ", speed_min=0.5, speed_max=0.5,
                                               mean_flow=(0.2, 0.0)), samples=5)
    assert slow.passed and slow["box-average-flow"].margin > 0
    fast = validate_hypotheses(EnvironmentSpec(mode="GEQ", speed_min=0.5, speed_max=0.5,
                                               mean_flow=(0.6, 0.0)), samples=5)
    assert "flow-below-flame-speed" in [i.name for i in fast.failed()]


def test_validate_report_serializes():
    d = validate_hypotheses(RANDOM_KPP, samples=5).to_dict()
    assert d["passed"] is True
