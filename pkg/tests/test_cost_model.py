import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droopdispatch.cost_model import DgSpec, DomainError, Fleet, eval_cost, eval_marginal_cost, total_cost
from droopdispatch.scenarios import builtin

CASE1_DG1 = DgSpec(1, a=0.0, b=4e-3, c=4e-3, d=3e-3, e=0.286, p_max=10.0)
CASE2_DG1 = DgSpec(1, a=4e-4, b=-5e-3, c=6e-2, d=0.0, e=0.0, p_max=10.0)
ZERO = DgSpec(9, 0.0, 0.0, 0.0, 0.0, 0.0, p_max=10.0)


def mp_cost(dg, p):
    mpmath.mp.dps = 40
    p = mpmath.mpf(p)
    return mpmath.mpf(dg.a) * p**3 + mpmath.mpf(dg.b) * p**2 + mpmath.mpf(dg.c) * p + mpmath.mpf(dg.d) * mpmath.exp(
        mpmath.mpf(dg.e) * p
    )


def test_zero_cost():
    assert eval_cost(ZERO, 5.0) == 0.0
    assert eval_marginal_cost(ZERO, 3.0) == 0.0


def test_case2_dg1_at_capacity():
    # 0.4 - 0.5 + 0.6
    assert eval_cost(CASE2_DG1, 10.0) == pytest.approx(0.5, rel=1e-14)


def test_case1_dg1_matches_high_precision():
    expected = 0.4 + 0.04 + 0.003 * math.exp(2.86)
    assert eval_cost(CASE1_DG1, 10.0) == pytest.approx(expected, rel=1e-14)
    assert eval_cost(CASE1_DG1, 10.0) == pytest.approx(float(mp_cost(CASE1_DG1, 10.0)), rel=1e-14)


def test_marginal_at_zero_is_c_plus_de():
    assert eval_marginal_cost(CASE2_DG1, 0.0) == pytest.approx(0.06, rel=1e-15)
    assert eval_marginal_cost(CASE1_DG1, 0.0) == pytest.approx(4e-3 + 3e-3 * 0.286, rel=1e-14)


def test_marginal_matches_central_difference_1000_samples():
    rng = np.random.default_rng(7)
    h = 1e-5
    worst = 0.0
    for _ in range(1000):
        p_max = rng.uniform(1.0, 10.0)
        dg = DgSpec(
            1,
            a=rng.uniform(-5e-4, 5e-4),
            b=rng.uniform(-5e-3, 5e-3),
            c=rng.uniform(0.0, 0.1),
            d=rng.uniform(0.0, 5e-3),
            e=rng.uniform(0.0, 0.3),
            p_max=p_max,
        )
        p = rng.uniform(h, p_max - h)
        fd = (eval_cost(dg, p + h) - eval_cost(dg, p - h)) / (2 * h)
        an = eval_marginal_cost(dg, p)
        err = abs(fd - an) / max(abs(an), 1e-3)
        worst = max(worst, err)
    assert worst <= 1e-6


def test_out_of_range_names_dg_and_bound():
    with pytest.raises(DomainError, match=r"DG 1.*\[0, 10"):
        eval_cost(CASE1_DG1, 10.5)
    with pytest.raises(DomainError):
        eval_marginal_cost(CASE1_DG1, -0.1)


def test_total_cost_checks_length():
    fleet = builtin("case1").fleet
    with pytest.raises(DomainError):
        total_cost(fleet, [1.0, 2.0])


def test_total_cost_symmetry():
    twin = Fleet([CASE1_DG1, DgSpec(2, *CASE1_DG1.coefficients, p_max=10.0)], 20.0)
    assert total_cost(twin, [3.0, 3.0]) == pytest.approx(2 * eval_cost(CASE1_DG1, 3.0), rel=1e-15)


def test_total_cost_zero_when_idle_and_no_exponential():
    fleet = Fleet([CASE2_DG1, ZERO], 20.0)
    assert total_cost(fleet, [0.0, 0.0]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.permutations(range(4)), st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_total_cost_permutation_equivariant(perm, fracs):
    fleet = builtin("case1").fleet
    powers = [f * dg.p_max for f, dg in zip(fracs, fleet.dgs)]
    shuffled = Fleet([fleet.dgs[k] for k in perm], fleet.p_l_max)
    assert total_cost(shuffled, [powers[k] for k in perm]) == pytest.approx(total_cost(fleet, powers), rel=1e-14)


def test_fleet_validation():
    with pytest.raises(ValueError):
        Fleet([], 1.0)
    with pytest.raises(ValueError):
        Fleet([CASE1_DG1, CASE1_DG1], 5.0)
    with pytest.raises(ValueError):
        Fleet([CASE1_DG1], 11.0)
    with pytest.raises(ValueError):
        DgSpec(1, math.nan, 0, 0, 0, 0, 1.0)
    with pytest.raises(ValueError):
        DgSpec(1, 0, 0, 0, 0, 0, 0.0)
