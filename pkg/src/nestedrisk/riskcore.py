"""Coherent risk measures on finite distributions.

Three measures are supported: the expectation, the mean semi-deviation of
order ``p`` at level ``beta`` and the upper-tail average value-at-risk at
level ``alpha``. Outcomes are payoffs (larger is worse for the holder of the
risk), so ``evaluate`` is the seller's ask and ``bid_value`` the buyer's bid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .errors import ValidationError

PROB_TOL = 1e-12
AXIOM_TOL = 1e-10

EXPECTATION = "expectation"
SEMIDEVIATION = "semideviation"
AVAR = "avar"


@dataclass(frozen=True)
class DiscreteDistribution:
    outcomes: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float).ravel()
        q = np.asarray(self.probabilities, dtype=float).ravel()
        if y.size == 0 or y.size != q.size:
            raise ValidationError(
                f"outcomes and probabilities need equal, nonzero length (got {y.size} and {q.size})"
            )
        if not np.all(np.isfinite(y)):
            raise ValidationError("outcomes must be finite")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValidationError("probabilities must be nonnegative")
        total = math.fsum(q)
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "probabilities", q)

    @classmethod
    def uniform(cls, outcomes: Sequence[float]) -> "DiscreteDistribution":
        y = np.asarray(outcomes, dtype=float)
        return cls(y, np.full(y.size, 1.0 / y.size))

    @classmethod
    def two_point(cls, up: float, down: float, p_up: float) -> "DiscreteDistribution":
        return cls(np.array([up, down]), np.array([p_up, 1.0 - p_up]))

    def mean(self) -> float:
        return float(np.dot(self.probabilities, self.outcomes))

    def __neg__(self) -> "DiscreteDistribution":
        return DiscreteDistribution(-self.outcomes, self.probabilities)

    def shift(self, c: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.outcomes + c, self.probabilities)

    def scale(self, lam: float) -> "DiscreteDistribution":
        return DiscreteDistribution(lam * self.outcomes, self.probabilities)


@dataclass(frozen=True)
class RiskSpec:
    """Which coherent measure to apply, and how its level scales with the step.

    ``level`` is ``beta`` for the semi-deviation and ``alpha`` for AVaR.
    With ``scaled=True`` a semi-deviation used on a time step ``dt`` runs at
    level ``beta * sqrt(dt)``; AVaR is never rescaled.
    """

    kind: str = EXPECTATION
    order: float = 1.0
    level: float = 0.0
    scaled: bool = True

    def __post_init__(self):
        if self.kind not in (EXPECTATION, SEMIDEVIATION, AVAR):
            raise ValidationError(f"unknown risk measure kind {self.kind!r}")
        if self.kind == SEMIDEVIATION:
            if not self.order >= 1.0:
                raise ValidationError(f"semi-deviation order must be >= 1, got {self.order}")
            if not 0.0 <= self.level <= 1.0:
                raise ValidationError(f"semi-deviation level beta must lie in [0, 1], got {self.level}")
        elif self.kind == AVAR:
            if not 0.0 < self.level < 1.0:
                raise ValidationError(f"AVaR level alpha must lie in (0, 1), got {self.level}")

    @classmethod
    def expectation(cls) -> "RiskSpec":
        return cls(EXPECTATION)

    @classmethod
    def semideviation(cls, order: float = 1.0, beta: float = 0.0, scaled: bool = True) -> "RiskSpec":
        return cls(SEMIDEVIATION, float(order), float(beta), scaled)

    @classmethod
    def avar(cls, alpha: float) -> "RiskSpec":
        return cls(AVAR, 1.0, float(alpha), False)

    @property
    def beta(self) -> float:
        return self.level if self.kind == SEMIDEVIATION else 0.0

    def at_step(self, dt: float) -> "RiskSpec":
        """The one-step measure used on a step of length ``dt``."""
        if self.kind != SEMIDEVIATION or not self.scaled:
            return self
        level = self.level * math.sqrt(dt)
        if level > 1.0:
            raise ValidationError(
                f"scaled level beta*sqrt(dt) = {level:.6g} exceeds 1; use a finer step"
            )
        return RiskSpec(SEMIDEVIATION, self.order, level, False)

    def label(self) -> str:
        if self.kind == EXPECTATION:
            return "E"
        if self.kind == SEMIDEVIATION:
            return f"SD(p={self.order:g},beta={self.level:g})"
        return f"AVaR(alpha={self.level:g})"


def _avar_upper(y: np.ndarray, q: np.ndarray, alpha: float) -> float:
    # Mean of the upper alpha-tail; the boundary atom contributes fractionally.
    order = np.argsort(-y, kind="stable")
    y, q = y[order], q[order]
    cum_before = np.concatenate(([0.0], np.cumsum(q)[:-1]))
    take = np.clip(alpha - cum_before, 0.0, q)
    return float(np.dot(take, y) / alpha)


def evaluate(measure: RiskSpec, dist: DiscreteDistribution) -> float:
    """rho(Y) for a finite distribution."""
    y, q = dist.outcomes, dist.probabilities
    mean = float(np.dot(q, y))
    if measure.kind == EXPECTATION:
        return mean
    if measure.kind == SEMIDEVIATION:
        if measure.level == 0.0:
            return mean
        p = measure.order
        upper = np.maximum(y - mean, 0.0)
        return mean + measure.level * float(np.dot(q, upper ** p)) ** (1.0 / p)
    return _avar_upper(y, q, measure.level)


def bid_value(measure: RiskSpec, dist: DiscreteDistribution) -> float:
    """-rho(-Y), the buyer's price."""
    return -evaluate(measure, -dist)


def s_rho(p: float, beta: float) -> float:
    """Per-unit-time risk of a Gaussian increment for the scaled semi-deviation family."""
    if not p >= 1.0:
        raise ValidationError(f"order p must be >= 1, got {p}")
    if beta < 0.0:
        raise ValidationError(f"beta must be nonnegative, got {beta}")
    return (
        beta
        * (2.0 * math.pi) ** (-1.0 / (2.0 * p))
        * 2.0 ** (0.5 - 1.0 / (2.0 * p))
        * math.gamma((p + 1.0) / 2.0) ** (1.0 / p)
    )


def gaussian_semideviation(p: float, beta: float, scale: float = 1.0, nodes: int = 200) -> float:
    """SD_{p,beta}(scale * W), W standard normal, by Gaussian quadrature.

    The mean uses a Gauss-Hermite rule. The positive part has a kink at the
    mean, so it is integrated on the half line above the mean, in the
    variable u = sqrt(y - mean), with a Gauss-Legendre rule truncated at 40
    standard deviations.
    """
    if nodes < 2:
        raise ValidationError("need at least two quadrature nodes")
    x, w = hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    mean = float(np.dot(w, scale * x))

    top = math.sqrt(40.0 * scale)
    t, v = leggauss(nodes)
    u = 0.5 * top * (t + 1.0)
    y = mean + u * u
    pdf = np.exp(-0.5 * (y / scale) ** 2) / (scale * math.sqrt(2.0 * math.pi))
    moment = 0.5 * top * float(np.dot(v, u ** (2.0 * p) * pdf * 2.0 * u))
    return mean + beta * moment ** (1.0 / p)


def s_rho_limit_probe(p: float, beta: float, dt_sequence: Iterable[float], nodes: int = 200) -> List[float]:
    """rho_dt(sqrt(dt) W) / dt for each dt, with the level scaled to beta*sqrt(dt)."""
    if not p >= 1.0:
        raise ValidationError(f"order p must be >= 1, got {p}")
    dts = [float(dt) for dt in dt_sequence]
    if any(dt <= 0.0 for dt in dts):
        raise ValidationError("time steps must be positive")
    if any(b > a for a, b in zip(dts, dts[1:])):
        raise ValidationError("time steps must be decreasing")
    return [
        gaussian_semideviation(p, beta * math.sqrt(dt), math.sqrt(dt), nodes) / dt
        for dt in dts
    ]


# --------------------------------------------------------------------------- #
# Axiom harness
# --------------------------------------------------------------------------- #

AXIOMS = ("A1_monotonicity", "A2_translation", "A3_subadditivity", "A4_homogeneity", "A5_law_invariance")


@dataclass
class AxiomResult:
    passed: bool
    worst_violation: float
    cases: int


@dataclass
class AxiomReport:
    measure: str
    trials: int
    seed: int
    results: Dict[str, AxiomResult] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def as_dict(self) -> dict:
        return {
            "measure": self.measure,
            "trials": self.trials,
            "seed": self.seed,
            "results": {
                k: {"passed": r.passed, "worst_violation": r.worst_violation, "cases": r.cases}
                for k, r in self.results.items()
            },
        }


def random_distribution(rng: np.random.Generator, size: int | None = None) -> DiscreteDistribution:
    """Support 2-20, outcomes uniform on [-10, 10], probabilities a flat Dirichlet draw."""
    n = int(rng.integers(2, 21)) if size is None else size
    q = rng.dirichlet(np.ones(n))
    q = q / math.fsum(q)
    return DiscreteDistribution(rng.uniform(-10.0, 10.0, n), q)


def _same_law(rng: np.random.Generator, dist: DiscreteDistribution) -> DiscreteDistribution:
    # Permute atoms and split one of them in two; the law is unchanged.
    perm = rng.permutation(dist.outcomes.size)
    y, q = dist.outcomes[perm], dist.probabilities[perm]
    k = int(rng.integers(0, y.size))
    frac = rng.uniform(0.1, 0.9)
    y = np.insert(y, k, y[k])
    q = np.insert(q, k, q[k] * frac)
    q[k + 1] *= 1.0 - frac
    return DiscreteDistribution(y, q)


def axiom_report(measure: RiskSpec, trials: int = 1000, seed: int = 0, tol: float = AXIOM_TOL) -> AxiomReport:
    """Check A1-A5 (plus bid <= ask) on seeded random distributions."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in AXIOMS + ("bid_le_ask",)}
    rho = lambda d: evaluate(measure, d)  # noqa: E731

    for _ in range(trials):
        dist = random_distribution(rng)
        n = dist.outcomes.size
        base = rho(dist)

        bump = DiscreteDistribution(dist.outcomes + rng.uniform(0.0, 5.0, n), dist.probabilities)
        worst["A1_monotonicity"] = max(worst["A1_monotonicity"], base - rho(bump))

        c = rng.uniform(-10.0, 10.0)
        worst["A2_translation"] = max(worst["A2_translation"], abs(rho(dist.shift(c)) - base - c))

        other = DiscreteDistribution(rng.uniform(-10.0, 10.0, n), dist.probabilities)
        both = DiscreteDistribution(dist.outcomes + other.outcomes, dist.probabilities)
        worst["A3_subadditivity"] = max(worst["A3_subadditivity"], rho(both) - base - rho(other))

        for lam in (0.0, 0.5, 2.0, 10.0, rng.uniform(0.0, 10.0)):
            worst["A4_homogeneity"] = max(worst["A4_homogeneity"], abs(rho(dist.scale(lam)) - lam * base))

        worst["A5_law_invariance"] = max(worst["A5_law_invariance"], abs(rho(_same_law(rng, dist)) - base))

        worst["bid_le_ask"] = max(worst["bid_le_ask"], bid_value(measure, dist) - base)

    report = AxiomReport(measure.label(), trials, seed)
    for name, v in worst.items():
        v = max(v, 0.0)
        report.results[name] = AxiomResult(v <= tol, v, trials)
    return report
