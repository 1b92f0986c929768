import math

import numpy as np
import pytest

from nestedrisk.errors import ValidationError
from nestedrisk.lattice import build_tree, call_payoff, nested_wiener_value
from nestedrisk.oracle import SeededSampler, bs_reference, enumerate_nested, mc_nested_wiener
from nestedrisk.riskcore import RiskSpec


def test_sampler_reproducible():
    a = SeededSampler(42).generator().standard_normal(5)
    b = SeededSampler(42).generator().standard_normal(5)
    assert np.array_equal(a, b)
    s1, s2 = SeededSampler(42).substreams(2)
    assert not np.array_equal(s1.standard_normal(3), s2.standard_normal(3))


def test_sampler_validation():
    with pytest.raises(ValidationError):
        SeededSampler(1, "MT19937")
    with pytest.raises(ValidationError):
        SeededSampler(-1)


def test_enumeration_limits():
    tree = build_tree(1.0, 0.03, 0.15, 1.0, 25)
    with pytest.raises(ValidationError):
        enumerate_nested(tree, RiskSpec.expectation(), call_payoff(1.0))
    with pytest.raises(ValidationError):
        enumerate_nested(build_tree(1.0, 0.03, 0.15, 1.0, 2), RiskSpec.expectation(), call_payoff(1.0), "mid")


def test_one_step_enumeration_by_hand():
    tree = build_tree(1.0, 0.0, 0.2, 1.0, 1)
    m = RiskSpec.semideviation(1.0, 0.5)
    up = tree.up - 1.0
    mean = tree.p * up
    ask = mean + 0.5 * tree.p * (1 - tree.p) * up
    assert enumerate_nested(tree, m, call_payoff(1.0), "ask") == pytest.approx(ask, abs=1e-15)


@pytest.mark.parametrize("p_order, beta", [(1.0, 0.5), (2.0, 1.0)])
def test_mc_agrees_with_closed_sum(p_order, beta):
    est, se = mc_nested_wiener(1.0, 8, p_order, beta, 50_000, seed=11)
    exact = nested_wiener_value(1.0, 8, p_order, [beta] * 8)
    assert abs(est - exact) < 3 * se


def test_mc_is_seeded():
    assert mc_nested_wiener(1.0, 2, 1.0, 0.5, 10_000, 5) == mc_nested_wiener(1.0, 2, 1.0, 0.5, 10_000, 5)
    with pytest.raises(ValidationError):
        mc_nested_wiener(1.0, 2, 1.0, 0.5, 100, 5)


def test_bs_reference_parity():
    c = bs_reference(1.0, 1.1, 0.02, 0.01, 0.25, 2.0, "call")
    p = bs_reference(1.0, 1.1, 0.02, 0.01, 0.25, 2.0, "put")
    assert c - p == pytest.approx(math.exp(-0.02) - 1.1 * math.exp(-0.04), abs=1e-14)
    assert bs_reference(1.5, 1.0, 0.02, 0.0, 0.2, 0.0) == 0.5
