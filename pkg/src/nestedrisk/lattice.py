"""Risk-averse binomial trees and nested backward induction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import ValidationError
from .riskcore import AVAR, EXPECTATION, DiscreteDistribution, RiskSpec, evaluate

MAX_STEPS = 1_000_000

Payoff = Callable[[np.ndarray], np.ndarray]


def call_payoff(K: float) -> Payoff:
    return lambda s: np.maximum(s - K, 0.0)


def put_payoff(K: float) -> Payoff:
    return lambda s: np.maximum(K - s, 0.0)


def identity_payoff(s: np.ndarray) -> np.ndarray:
    return np.asarray(s, dtype=float)


@dataclass(frozen=True)
class BinomialTree:
    S0: float
    r: float
    sigma: float
    T: float
    n: int
    dt: float = field(init=False)
    up: float = field(init=False)
    down: float = field(init=False)
    p: float = field(init=False)

    def __post_init__(self):
        if not self.S0 > 0:
            raise ValidationError(f"S0 must be positive, got {self.S0}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not self.T > 0:
            raise ValidationError(f"T must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if self.n > MAX_STEPS:
            raise ValidationError(f"n = {self.n} exceeds the cap of {MAX_STEPS} steps")
        dt = self.T / self.n
        step = self.sigma * math.sqrt(dt)
        up, down = math.exp(step), math.exp(-step)
        p = (math.exp(self.r * dt) - down) / (up - down)
        if not p > 0.0:
            raise ValidationError(f"up probability {p:.6g} <= 0: need r*sqrt(dt) > -sigma")
        if not p < 1.0:
            raise ValidationError(f"up probability {p:.6g} >= 1: need r*sqrt(dt) < sigma")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "p", p)

    def prices(self, level: int) -> np.ndarray:
        """Stock prices at time level ``level``, indexed by the number of up moves."""
        j = np.arange(level + 1)
        return self.S0 * np.exp(self.sigma * math.sqrt(self.dt) * (2 * j - level))

    def step_distribution(self, s: float = None) -> DiscreteDistribution:
        s = self.S0 if s is None else s
        return DiscreteDistribution.two_point(s * self.up, s * self.down, self.p)

    def martingale_gap(self) -> float:
        return self.p * self.up + (1.0 - self.p) * self.down - math.exp(self.r * self.dt)


def build_tree(S0: float, r: float, sigma: float, T: float, n: int) -> BinomialTree:
    return BinomialTree(S0, r, sigma, T, n)


def risk_adjusted_prob(p: float, beta_dt: float) -> float:
    """Up probability under which the one-step SD(1, beta_dt) bid is an expectation."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    if beta_dt < 0.0:
        raise ValidationError(f"beta_dt must be nonnegative, got {beta_dt}")
    pt = p * (1.0 - beta_dt * (1.0 - p))
    if not 0.0 <= pt <= 1.0:
        raise ValidationError(f"risk-adjusted probability {pt:.6g} outside [0, 1]")
    return pt


def two_point_ask(measure: RiskSpec, p: float, up: np.ndarray, down: np.ndarray) -> np.ndarray:
    """rho of the two-point law {up w.p. p, down w.p. 1-p}, elementwise."""
    mean = p * up + (1.0 - p) * down
    if measure.kind == EXPECTATION:
        return mean
    if measure.kind == AVAR:
        alpha = measure.level
        up_hi = up >= down
        hi = np.where(up_hi, up, down)
        lo = np.where(up_hi, down, up)
        p_hi = np.where(up_hi, p, 1.0 - p)
        return np.where(alpha <= p_hi, hi, (p_hi * hi + (alpha - p_hi) * lo) / alpha)
    if measure.level == 0.0:
        return mean
    q = measure.order
    d = up - down
    dev = np.maximum(d, 0.0) * (1.0 - p) * p ** (1.0 / q) + np.maximum(-d, 0.0) * p * (1.0 - p) ** (1.0 / q)
    return mean + measure.level * dev


@dataclass(frozen=True)
class NestedPriceResult:
    value: float
    side: str
    measure: RiskSpec
    n: int


def _check_side(side: str) -> str:
    if side not in ("bid", "ask"):
        raise ValidationError(f"side must be 'bid' or 'ask', got {side!r}")
    return side


def price_nested(
    tree: BinomialTree,
    measure: RiskSpec,
    payoff: Payoff,
    side: str = "bid",
    discounted: bool = True,
) -> NestedPriceResult:
    """Backward induction with the one-step conditional measure at every node.

    The recombining lattice is rolled back one level at a time, so memory is
    O(n). With ``discounted=False`` the per-step factor exp(-r dt) is dropped.
    """
    _check_side(side)
    step = measure.at_step(tree.dt)
    values = np.asarray(payoff(tree.prices(tree.n)), dtype=float)
    if values.shape != (tree.n + 1,) or not np.all(np.isfinite(values)):
        raise ValidationError("payoff must return finite values for every terminal node")
    disc = math.exp(-tree.r * tree.dt) if discounted else 1.0
    sign = 1.0 if side == "ask" else -1.0
    for _ in range(tree.n):
        v = sign * values
        values = disc * sign * two_point_ask(step, tree.p, v[1:], v[:-1])
    return NestedPriceResult(float(values[0]), side, measure, tree.n)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    dt: float
    bid: float
    ask: float
    reference: float
    abs_error: float


def convergence_study(
    S0: float,
    K: float,
    r: float,
    sigma: float,
    T: float,
    beta: float,
    n_list: Sequence[int],
    threads: int = 1,
) -> List[ConvergenceRow]:
    """Nested SD(1, beta*sqrt(dt)) call prices against the dividend-yield limit q = beta*sigma/2."""
    from .closedform import dividend_call

    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing")
    measure = RiskSpec.semideviation(1.0, beta)
    payoff = call_payoff(K)
    reference = dividend_call(S0, K, r, beta * sigma / 2.0, sigma, T)

    def row(n: int) -> ConvergenceRow:
        tree = build_tree(S0, r, sigma, T, n)
        bid = price_nested(tree, measure, payoff, "bid").value
        ask = price_nested(tree, measure, payoff, "ask").value
        return ConvergenceRow(n, tree.dt, bid, ask, reference, abs(bid - reference))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, n_list))
    return [row(n) for n in n_list]


def nested_wiener_value(T: float, n: int, p_order: float, beta_vector: Sequence[float]) -> float:
    """Nested scaled semi-deviation of W_T on the uniform partition with n steps.

    Each stage contributes beta_i * dt times the Gaussian constant s_rho(p, 1).
    A factor 2^(-1/2) sometimes attached to this sum disagrees with
    the divisibility constant at p = 1; the divisibility constant is used.
    """
    from .riskcore import s_rho

    betas = np.asarray(beta_vector, dtype=float)
    if betas.shape != (n,):
        raise ValidationError(f"beta_vector must have length n = {n}, got {betas.size}")
    if np.any(betas < 0):
        raise ValidationError("risk levels must be nonnegative")
    dt = T / n
    return float(np.sum(betas) * dt * s_rho(p_order, 1.0))


def _interp(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    # Linear interpolation with linear extrapolation at both ends.
    out = np.interp(x, xp, fp)
    lo, hi = x < xp[0], x > xp[-1]
    out[lo] = fp[0] + (x[lo] - xp[0]) * (fp[1] - fp[0]) / (xp[1] - xp[0])
    out[hi] = fp[-1] + (x[hi] - xp[-1]) * (fp[-1] - fp[-2]) / (xp[-1] - xp[-2])
    return out


def gaussian_bins(m: int) -> np.ndarray:
    """Conditional means of a standard normal on m equiprobable bins."""
    edges = ndtri(np.linspace(0.0, 1.0, m + 1))
    phi = np.exp(-0.5 * edges ** 2) / math.sqrt(2.0 * math.pi)
    phi[[0, -1]] = 0.0
    return m * (phi[:-1] - phi[1:])


def avar_nesting_demo(T: float, n_list: Sequence[int], alpha: float, bins: int = 200, states: int = 81) -> List[tuple]:
    """Nested, unscaled AVaR_alpha of W_T on uniform partitions.

    Increments are discretized on ``bins`` equiprobable Gaussian bins (exact
    tail means whenever alpha*bins is an integer); the value function is rolled
    back on a grid of Brownian states with linear interpolation.
    """
    measure = RiskSpec.avar(alpha)
    xi = gaussian_bins(bins)
    probs = np.full(bins, 1.0 / bins)
    grid = np.linspace(-8.0 * math.sqrt(T), 8.0 * math.sqrt(T), states)
    rows = []
    for n in n_list:
        dt = T / n
        values = grid.copy()
        for _ in range(n):
            nxt = np.empty_like(values)
            for j, w in enumerate(grid):
                outcomes = _interp(w + math.sqrt(dt) * xi, grid, values)
                nxt[j] = evaluate(measure, DiscreteDistribution(outcomes, probs))
            values = nxt
        rows.append((int(n), float(_interp(np.array([0.0]), grid, values)[0])))
    return rows
