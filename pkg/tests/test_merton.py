import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frozen import MERTON_C0_S0, MERTON_NU_S0
from nestedrisk.errors import ValidationError
from nestedrisk.merton import (
    MertonParams,
    adjudicate,
    adjudication_json,
    consumption_curve,
    default_s_grid,
    f_closed,
    hjb_residual,
    hjb_residual_fd,
    nu,
    ode_check,
    pi_star,
    solution,
)

FIG = MertonParams()


def test_nu_at_zero_risk():
    for v in ("paper", "drift_shift"):
        assert nu(FIG, v) == pytest.approx(MERTON_NU_S0, abs=1e-15)
    assert solution(FIG).c_star(0.0, 1.0) == pytest.approx(MERTON_C0_S0, abs=1e-14)


def test_variants_diverge_with_risk():
    gaps = [abs(nu(FIG.with_s(s), "paper") - nu(FIG.with_s(s), "drift_shift")) for s in (0.0, 0.05, 0.1, 0.2)]
    assert gaps[0] == 0.0 and all(a < b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_gamma_domain(gamma):
    with pytest.raises(ValidationError):
        MertonParams(gamma=gamma)


def test_f_endpoints_and_limit():
    sol = solution(FIG)
    assert sol.f(FIG.T) == pytest.approx(FIG.epsilon, abs=1e-12)
    assert sol.c_star(FIG.T, 2.0) == pytest.approx(2.0 / FIG.epsilon)
    assert f_closed(0.0, 0.1, 2.0) == pytest.approx(2.1)
    assert f_closed(1e-12, 0.1, 2.0) == pytest.approx(2.1, abs=1e-10)


def test_value_function_terminal_condition():
    sol = solution(FIG)
    x = np.array([0.5, 1.0, 3.0])
    assert sol.R(FIG.T, x) == pytest.approx(FIG.epsilon ** FIG.gamma * x ** (1 - FIG.gamma) / (1 - FIG.gamma), rel=1e-14)


def test_pi_star():
    assert pi_star(FIG) == pytest.approx((FIG.mu - FIG.r) / (FIG.sigma ** 2 * FIG.gamma))
    assert pi_star(FIG.with_s(FIG.s_max)) == pytest.approx(0.0, abs=1e-12)
    assert pi_star(FIG.with_s(FIG.s_max + 0.1)) == 0.0


@given(st.floats(0.0, 0.29), st.floats(0.0, 0.29))
def test_pi_star_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    assert pi_star(FIG.with_s(hi)) <= pi_star(FIG.with_s(lo))


@pytest.mark.parametrize("variant", ["paper", "drift_shift"])
def test_zero_risk_residuals(variant):
    assert hjb_residual(FIG, variant, equation="hjb2") < 1e-9
    assert hjb_residual(FIG, variant, equation="hjb") < 1e-9
    assert hjb_residual_fd(FIG, variant) < 1e-5
    assert ode_check(FIG, variant) < 1e-8


def test_each_variant_solves_one_equation():
    p = FIG.with_s(0.15)
    assert hjb_residual(p, "paper", equation="hjb2") < 1e-12
    assert hjb_residual(p, "drift_shift", equation="hjb") < 1e-12
    assert hjb_residual(p, "paper", equation="hjb") > 1e-3
    assert hjb_residual(p, "drift_shift", equation="hjb2") > 1e-3


def test_consumption_linear_in_wealth():
    sol = solution(FIG.with_s(0.1))
    c = sol.c_star(1.0, np.array([0.5, 1.0, 4.0]))
    assert c / np.array([0.5, 1.0, 4.0]) == pytest.approx(np.full(3, c[1]))


@pytest.mark.parametrize("variant", ["paper", "drift_shift"])
def test_consumption_curve_monotone(variant):
    rows = consumption_curve(FIG, default_s_grid(FIG), variant)
    c = [r[1] for r in rows]
    pis = [r[2] for r in rows]
    assert np.all(np.diff(c) >= 0)
    assert np.all(np.diff(pis) < 0)


def test_consumption_curve_domain():
    with pytest.raises(ValidationError):
        consumption_curve(FIG, [0.0, FIG.s_max])


def test_adjudication_report():
    rep = adjudicate(FIG, [0.0, 0.1])
    assert rep["canonical"] == {"hjb2": "paper", "hjb": "drift_shift"}
    assert json.loads(adjudication_json(FIG, [0.0, 0.1])) == json.loads(json.dumps(rep))


def test_grid_must_be_positive():
    with pytest.raises(ValidationError):
        hjb_residual(FIG, x_grid=[0.0, 1.0])


@given(st.floats(0.2, 0.9), st.floats(0.0, 0.05), st.floats(0.05, 0.15), st.floats(0.15, 0.4))
def test_ode_check_random(gamma, r, mu_excess, sigma):
    p = MertonParams(r=r, mu=r + mu_excess, sigma=sigma, gamma=gamma)
    assert ode_check(p) < 1e-8
