import json

import numpy as np
import pytest

from nestedrisk.closedform import EuroParams, option_value
from nestedrisk.errors import ValidationError
from nestedrisk.pdesolve import Grid, Operator, make_payoff, solve_european

GRID = Grid(0.0, 3.6, 200, 200)


@pytest.fixture(scope="module")
def solved():
    p = EuroParams(1.0, 1.2, 0.03, 0.15, 0.0, 1.0, 0.2)
    return p, {(k, s): solve_european(p, k, s, GRID) for k in ("call", "put") for s in ("bid", "ask")}


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid(1.0, 0.5, 10, 10)
    with pytest.raises(ValidationError):
        Grid(0.0, 1.0, 2, 10)
    with pytest.raises(ValidationError):
        Grid(0.0, 1.0, 10, 10, spacing="log")
    assert Grid(0.1, 1.0, 5, 1, "log").nodes()[-1] == pytest.approx(1.0)


def test_payoff_spec():
    assert make_payoff("put", 1.0)(np.array([0.5, 2.0])) == pytest.approx([0.5, 0.0])
    with pytest.raises(ValidationError):
        make_payoff("digital", 1.0)


@pytest.mark.parametrize("kind", ["call", "put"])
@pytest.mark.parametrize("side", ["bid", "ask"])
def test_matches_closed_form(solved, kind, side):
    p, sols = solved
    x = np.linspace(0.6, 2.4, 50)
    exact = option_value(EuroParams(x, p.K, p.r, p.sigma, 0.0, p.T, p.s_rho), kind, side)
    assert np.max(np.abs(sols[kind, side].at(0.0, x) - exact)) < 2e-4
    assert sols[kind, side].max_residual < 1e-8


def test_bid_below_ask_everywhere(solved):
    _, sols = solved
    for kind in ("call", "put"):
        assert np.all(sols[kind, "bid"].values <= sols[kind, "ask"].values + 1e-12)


def test_fixed_policy_equals_iterated(solved):
    p, sols = solved
    fixed = solve_european(p, "call", "ask", GRID, policy=1.0)
    assert np.max(np.abs(fixed.values - sols["call", "ask"].values)) < 1e-12


def test_custom_payoff_linear():
    # a forward: value x - K e^{-r tau} at zero risk
    p = EuroParams(1.0, 1.0, 0.03, 0.2)
    sol = solve_european(p, lambda s: s - 1.0, "ask", Grid(0.0, 3.0, 120, 60))
    assert sol.at(0.0, 1.0) == pytest.approx(1.0 - np.exp(-0.03), abs=1e-6)
    assert sol.kind == "custom"


def test_operator_hamiltonian_is_extremal():
    x = np.linspace(0, 2, 21)
    op = Operator(x, 0.03, 0.2, 0.3)
    v = np.sin(3 * x)
    h_ask, y_ask = op.hamiltonian(v, 1.0)
    h_bid, y_bid = op.hamiltonian(v, -1.0)
    for y in (-1.0, 1.0):
        lv = op.apply(v, np.full(op.xi.size, y))
        assert np.all(h_bid <= lv + 1e-12) and np.all(lv <= h_ask + 1e-12)
    assert np.allclose(op.apply(v, y_ask), h_ask) and np.allclose(op.apply(v, y_bid), h_bid)


def test_operator_rows_are_monotone():
    op = Operator(np.linspace(0, 3, 31), 0.5, 0.05, 0.4)
    for y in (-1.0, 1.0):
        lo, diag, up = op.rows(np.full(op.xi.size, y))
        assert np.all(lo >= 0) and np.all(up >= 0) and np.all(diag < 0)


def test_outputs(solved):
    _, sols = solved
    sol = sols["put", "bid"]
    text = sol.slice_csv(0.0)
    assert text.splitlines()[0] == "x,V" and len(text.splitlines()) == GRID.nx + 1
    stats = json.loads(sol.stats_json())
    assert stats["nx"] == GRID.nx and len(stats["iterations_per_step"]) == GRID.nt
