"""Brute-force and Monte Carlo references.

Nothing here reuses the fast paths it is meant to check: the nested
evaluation walks every path of the non-recombining tree, and the
Black-Scholes reference carries its own normal CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError
from .lattice import BinomialTree, Payoff
from .riskcore import DiscreteDistribution, RiskSpec, evaluate

MAX_ENUM_STEPS = 24


@dataclass(frozen=True)
class SeededSampler:
    """Reproducible random streams from numpy's PCG64 bit generator."""

    seed: int
    algorithm: str = "PCG64"

    def __post_init__(self):
        if self.algorithm != "PCG64":
            raise ValidationError(f"unsupported generator {self.algorithm!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(int(self.seed)))

    def substreams(self, k: int) -> list:
        """k independent generators derived deterministically from the seed."""
        children = np.random.SeedSequence(int(self.seed)).spawn(k)
        return [np.random.Generator(np.random.PCG64(c)) for c in children]


def enumerate_nested(
    tree: BinomialTree,
    measure: RiskSpec,
    payoff: Payoff,
    side: str = "bid",
    discounted: bool = True,
) -> float:
    """Nested risk of the discounted payoff by recursion over all 2^n paths."""
    if tree.n > MAX_ENUM_STEPS:
        raise ValidationError(f"path enumeration is limited to n <= {MAX_ENUM_STEPS} (got {tree.n})")
    if side not in ("bid", "ask"):
        raise ValidationError(f"side must be 'bid' or 'ask', got {side!r}")
    step = measure.at_step(tree.dt)
    disc = math.exp(-tree.r * tree.T) if discounted else 1.0
    sign = -1.0 if side == "bid" else 1.0

    def descend(s: float, level: int) -> float:
        if level == tree.n:
            v = float(np.asarray(payoff(np.array([s])), dtype=float)[0])
            if not math.isfinite(v):
                raise ValidationError("payoff is not finite on a terminal node")
            return sign * disc * v
        up = descend(s * tree.up, level + 1)
        down = descend(s * tree.down, level + 1)
        return evaluate(step, DiscreteDistribution(np.array([up, down]), np.array([tree.p, 1.0 - tree.p])))

    return sign * descend(tree.S0, 0)


def risk_neutral_sum(tree: BinomialTree, payoff: Payoff) -> float:
    """Discounted expectation over all 2^n paths, summed path by path."""
    if tree.n > MAX_ENUM_STEPS:
        raise ValidationError(f"path enumeration is limited to n <= {MAX_ENUM_STEPS} (got {tree.n})")
    total = 0.0
    for path in range(2 ** tree.n):
        ups = bin(path).count("1")
        s = tree.S0 * tree.up ** ups * tree.down ** (tree.n - ups)
        prob = tree.p ** ups * (1.0 - tree.p) ** (tree.n - ups)
        total += prob * float(np.asarray(payoff(np.array([s])))[0])
    return math.exp(-tree.r * tree.T) * total


def _empirical_sd(z: np.ndarray, p: float, beta: float) -> Tuple[float, np.ndarray]:
    # Plug-in SD_{p,beta} and its influence function (for the delta-method error).
    m = z.mean()
    dev = z - m
    pos = np.maximum(dev, 0.0)
    moment = np.mean(pos ** p)
    if beta == 0.0 or moment == 0.0:
        return m, dev
    norm = moment ** (1.0 / p)
    lower = np.mean(pos ** (p - 1.0)) if p > 1.0 else np.mean(dev > 0)
    influence = dev + beta * norm / (p * moment) * (pos ** p - moment - p * lower * dev)
    return m + beta * norm, influence


def mc_nested_wiener(
    T: float,
    n: int,
    p_order: float,
    beta: Union[float, Sequence[float]],
    samples: int,
    seed: int,
) -> Tuple[float, float]:
    """Monte Carlo estimate of the nested scaled semi-deviation of W_T.

    Each stage's conditional semi-deviation of its Gaussian increment is
    estimated from fresh samples and the stages are summed (translation
    equivariance telescopes the nesting). Returns (estimate, standard error).
    """
    if samples < 10_000:
        raise ValidationError("need at least 10^4 samples per stage")
    betas = np.broadcast_to(np.asarray(beta, dtype=float), (n,))
    dt = T / n
    streams = SeededSampler(seed).substreams(n)
    estimate, variance = 0.0, 0.0
    for b, rng in zip(betas, streams):
        z = math.sqrt(dt) * rng.standard_normal(samples)
        value, influence = _empirical_sd(z, p_order, b * math.sqrt(dt))
        estimate += value
        variance += influence.var(ddof=1) / samples
    return float(estimate), math.sqrt(variance)


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def bs_reference(x: float, K: float, r: float, q: float, sigma: float, tau: float, kind: str = "call") -> float:
    """Textbook Black-Scholes with a continuous dividend yield q."""
    if kind not in ("call", "put"):
        raise ValidationError(f"kind must be 'call' or 'put', got {kind!r}")
    if tau <= 0.0:
        return max(x - K, 0.0) if kind == "call" else max(K - x, 0.0)
    sd = sigma * math.sqrt(tau)
    d1 = (math.log(x / K) + (r - q) * tau) / sd + 0.5 * sd
    d2 = d1 - sd
    fwd = x * math.exp(-q * tau)
    pv = K * math.exp(-r * tau)
    if kind == "call":
        return fwd * _phi(d1) - pv * _phi(d2)
    return pv * _phi(-d2) - fwd * _phi(-d1)
