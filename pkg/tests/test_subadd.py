import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homoglab.errors import HypothesisViolation
from homoglab.subadd import (AdditiveProcess, DeterministicProcess, TravelTimeProcess,
                             cell_seed, estimate_limit, half_width, summarize, validate_process)
from homoglab.ttime import calibrate_m
from specs import CONST_KPP


@dataclass(frozen=True)
class SquareProcess:
    """Superadditive counterexample X = (n - m)^2."""

    bound: float = 1.0
    window: float = 1.0
    t_dep: float | None = None
    tol: float = 0.0

    def __call__(self, seed, t, m, n):
        return float((n - m) ** 2)


def test_additive_validation_is_exact():
    rep = validate_process(AdditiveProcess(), samples=200)
    assert rep.passed
    sub = rep.checks[0]
    assert sub.name == "subadditivity" and abs(sub.worst_margin) < 1e-11
    statuses = {c.name: c.status for c in rep.checks}
    assert statuses["mixing"] == "by construction"


@given(seed=st.integers(0, 2**62), m=st.integers(0, 50), a=st.integers(1, 50),
       b=st.integers(1, 50))
def test_additive_identity(seed, m, a, b):
    p = AdditiveProcess()
    k, n = m + a, m + a + b
    assert math.isclose(p(seed, 0.0, m, n), p(seed, 0.0, m, k) + p(seed, 3.0, k, n),
                        rel_tol=1e-14)
    assert p.batch(seed, 0.0, m, [k, n]) == [p(seed, 0.0, m, k), p(seed, 0.0, m, n)]


def test_violated_bound_is_reported():
    rep = validate_process(DeterministicProcess(declared_bound=0.0), samples=10)
    assert rep.failed() == ["bounded-first-step"]
    with pytest.raises(HypothesisViolation):
        rep.raise_if_failed()


def test_violated_subadditivity_has_witness():
    rep = validate_process(SquareProcess(), samples=20)
    sub = rep.checks[0]
    assert sub.status == "fail" and len(sub.witness) == 5
    seed, t, m, k, n = sub.witness
    p = SquareProcess()
    assert p(seed, t, m, n) > p(seed, t, m, k) + p(seed, t, k, n)


def test_additive_limit():
    est = estimate_limit(AdditiveProcess(), [8, 32, 128], 200, seed=1)
    sd = est.sds[-1]
    assert abs(est.limit - 1.5) <= 3 * sd / math.sqrt(200)
    assert abs(est.limit - 1.5) <= est.half_width * 1.5
    assert est.sds[0] / est.sds[-1] >= 2.0
    # half-widths shrink like 1 / sqrt(n): a factor 4 from n = 8 to n = 128
    assert est.half_width < half_width(est.sds[0], 200) / 2
    assert not est.flags


def test_deterministic_limit():
    est = estimate_limit(DeterministicProcess(), [4, 16], 5)
    assert est.limit == 1.0 and est.sds == [0.0, 0.0] and est.half_width == 0.0


def test_paired_secant_removes_offset():
    est = estimate_limit(DeterministicProcess(offset=3.0), [4, 16], 5, paired=True)
    assert est.secant == pytest.approx(1.0) and est.limit > 1.0


def test_scheduling_does_not_change_estimates():
    a = estimate_limit(AdditiveProcess(), [8, 32], 20, seed=4)
    b = estimate_limit(AdditiveProcess(), [8, 32], 20, seed=4,
                       mapper=lambda f, xs: reversed([f(x) for x in reversed(list(xs))]))
    assert a.to_dict() == b.to_dict()


def test_increasing_means_are_flagged():
    table = np.array([[1.0, 4.0], [1.1, 4.1], [0.9, 3.9]]) * np.array([4, 8])
    est = summarize(table, [4, 8], paired=False)
    assert any("increase" in f for f in est.flags)


def test_cell_seeds_are_stable_and_distinct():
    assert cell_seed(3, 1, 2) == cell_seed(3, 1, 2)
    assert len({cell_seed(3, k) for k in range(100)}) == 100


@pytest.fixture(scope="module")
def kpp_process():
    m = calibrate_m(CONST_KPP, n_seeds=2).m_emp
    return TravelTimeProcess(CONST_KPP, (1.0, 0.0), m)


def test_travel_time_process_validates(kpp_process):
    rep = validate_process(kpp_process, samples=4, n_max=5, t_max=2.0)
    assert rep.passed, [c.to_dict() for c in rep.checks]


def test_travel_time_process_limit(kpp_process):
    # the plain ratio carries an O(1/n) start-up offset of about 5 time units
    est = estimate_limit(kpp_process, [20, 40, 80], 2, paired=True)
    assert est.limit == pytest.approx(0.5, rel=0.15)
    assert est.means[0] > est.means[1] > est.means[2]
    assert est.secant == pytest.approx(0.5, rel=0.05)
