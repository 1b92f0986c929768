"""Finite differences for the risk-averse Black-Scholes equation

    V_t + r x V_x + sigma^2 x^2 V_xx / 2 +- s_rho |sigma x V_x| - r V = 0,

with + for the ask and - for the bid. The absolute value is written as an
extremum over a drift sign y in {-1, +1} (max for the ask, min for the bid)
and resolved by policy iteration at every time step.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from .closedform import EuroParams
from .errors import SolverError, ValidationError

MAX_POLICY_SWEEPS = 50
RANNACHER_STEPS = 2

PayoffSpec = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    nx: int
    nt: int
    spacing: str = "uniform"

    def __post_init__(self):
        if self.x_min < 0:
            raise ValidationError(f"x_min must be >= 0, got {self.x_min}")
        if not self.x_max > self.x_min:
            raise ValidationError(f"x_max must exceed x_min (got {self.x_min}, {self.x_max})")
        if self.nx < 3:
            raise ValidationError(f"need nx >= 3, got {self.nx}")
        if self.nt < 1:
            raise ValidationError(f"need nt >= 1, got {self.nt}")
        if self.spacing not in ("uniform", "log"):
            raise ValidationError(f"spacing must be 'uniform' or 'log', got {self.spacing!r}")
        if self.spacing == "log" and self.x_min <= 0:
            raise ValidationError("log spacing needs x_min > 0")

    def nodes(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.x_min, self.x_max, self.nx)
        return np.linspace(self.x_min, self.x_max, self.nx)

    @classmethod
    def around(cls, K: float, nx: int = 400, nt: int = 400, width: float = 3.0) -> "Grid":
        return cls(0.0, width * K, nx, nt)


@dataclass
class PDESolution:
    grid: Grid
    times: np.ndarray
    x: np.ndarray
    values: np.ndarray
    max_residual: float = float("nan")
    iterations_per_step: List[int] = field(default_factory=list)
    thetas: List[float] = field(default_factory=list)
    kind: Optional[str] = None
    K: Optional[float] = None
    side: Optional[str] = None

    def __post_init__(self):
        if self.values.shape != (self.times.size, self.x.size):
            raise ValidationError("values must have shape (len(times), len(x))")
        if not np.all(np.isfinite(self.values)):
            raise SolverError("solution contains non-finite values")

    def at(self, t: float, x) -> np.ndarray:
        """Linear interpolation in x at the time level nearest to t."""
        k = int(np.argmin(np.abs(self.times - t)))
        return np.interp(x, self.x, self.values[k])

    def slice_csv(self, t: float) -> str:
        k = int(np.argmin(np.abs(self.times - t)))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "V"])
        for xi, vi in zip(self.x, self.values[k]):
            w.writerow([f"{xi:.12g}", f"{vi:.12g}"])
        return buf.getvalue()

    def stats_json(self) -> str:
        return json.dumps(
            {
                "max_residual": self.max_residual,
                "iterations_per_step": list(self.iterations_per_step),
                "nx": self.grid.nx,
                "nt": self.grid.nt,
            },
            sort_keys=True,
        )


def make_payoff(payoff: PayoffSpec, K: float) -> Callable[[np.ndarray], np.ndarray]:
    if payoff == "call":
        return lambda s: np.maximum(s - K, 0.0)
    if payoff == "put":
        return lambda s: np.maximum(K - s, 0.0)
    if callable(payoff):
        return payoff
    raise ValidationError(f"payoff must be 'call', 'put' or a callable, got {payoff!r}")


def side_sign(side: str) -> float:
    if side == "ask":
        return 1.0
    if side == "bid":
        return -1.0
    raise ValidationError(f"side must be 'bid' or 'ask', got {side!r}")


class Operator:
    """Tridiagonal rows of L(y) V = a V_xx + (r + s sigma y) x V_x - r V.

    The drift is differenced centrally where that keeps the off-diagonals
    nonnegative and upwind otherwise, so every row is monotone.
    """

    def __init__(self, x: np.ndarray, r: float, sigma: float, s_rho: float):
        self.x, self.r, self.sigma, self.s_rho = x, r, sigma, s_rho
        hm = np.diff(x)[:-1]
        hp = np.diff(x)[1:]
        self.hm, self.hp = hm, hp
        xi = x[1:-1]
        a = 0.5 * sigma * sigma * xi * xi
        self.diff_l = 2.0 * a / (hm * (hm + hp))
        self.diff_u = 2.0 * a / (hp * (hm + hp))
        self.xi = xi

    def rows(self, y: np.ndarray):
        """(lower, diag, upper) for interior nodes under drift signs y."""
        hm, hp = self.hm, self.hp
        b = (self.r + self.s_rho * self.sigma * y) * self.xi
        cl = -b * hp / (hm * (hm + hp))
        cu = b * hm / (hp * (hm + hp))
        cc = b * (hp - hm) / (hm * hp)
        lo = self.diff_l + cl
        up = self.diff_u + cu
        central = (lo >= 0) & (up >= 0)
        fwd = ~central & (b > 0)
        bwd = ~central & (b <= 0)
        lo = np.where(central, lo, self.diff_l + np.where(bwd, -b / hm, 0.0))
        up = np.where(central, up, self.diff_u + np.where(fwd, b / hp, 0.0))
        drift_c = np.where(central, cc, np.where(fwd, -b / hp, b / hm))
        diag = -self.diff_l - self.diff_u + drift_c - self.r
        return lo, diag, up

    def apply(self, v: np.ndarray, y: np.ndarray) -> np.ndarray:
        lo, diag, up = self.rows(y)
        return lo * v[:-2] + diag * v[1:-1] + up * v[2:]

    def hamiltonian(self, v: np.ndarray, eps: float):
        """Extremal L(y) v over y in {-1, +1} (max if eps > 0) and the attaining signs."""
        plus = self.apply(v, np.ones_like(self.xi))
        minus = self.apply(v, -np.ones_like(self.xi))
        if eps > 0:
            return np.maximum(plus, minus), np.where(plus >= minus, 1.0, -1.0)
        return np.minimum(plus, minus), np.where(plus <= minus, 1.0, -1.0)


def _asymptote(payoff: Callable, x0: float, x1: float):
    # Linear payoff asymptote A + B x through two boundary nodes.
    f0, f1 = (float(v) for v in payoff(np.array([x0, x1])))
    slope = (f1 - f0) / (x1 - x0)
    return f0 - slope * x0, slope


def _boundary_value(A: float, B: float, x: float, tau: float, r: float, q_unit: float, eps: float) -> float:
    # Exposure B to the spot earns the yield -eps*sign(B)*s_rho*sigma.
    q = -eps * math.copysign(1.0, B) * q_unit if B != 0 else 0.0
    return A * math.exp(-r * tau) + B * x * math.exp(-q * tau)


def _policy_from(op: Operator, v: np.ndarray, eps: float, prev: np.ndarray) -> np.ndarray:
    plus = op.apply(v, np.ones_like(op.xi))
    minus = op.apply(v, -np.ones_like(op.xi))
    gap = plus - minus
    tie = np.abs(gap) <= 1e-13 * (1.0 + np.abs(plus))
    best = np.where(gap >= 0, 1.0, -1.0) if eps > 0 else np.where(gap <= 0, 1.0, -1.0)
    return np.where(tie, prev, best)


def theta_march(
    params: EuroParams,
    payoff: PayoffSpec,
    side: str,
    grid: Grid,
    policy: Optional[Union[float, np.ndarray]] = None,
    obstacle: Optional[Callable] = None,
) -> PDESolution:
    """Shared time-marching loop; ``obstacle`` is a per-step LCP projector or None."""
    eps = side_sign(side)
    psi = make_payoff(payoff, params.K)
    x = grid.nodes()
    n = x.size
    T = params.T
    dt = T / grid.nt
    times = np.linspace(0.0, T, grid.nt + 1)
    op = Operator(x, params.r, params.sigma, params.s_rho)
    q_unit = params.s_rho * params.sigma
    hi_A, hi_B = _asymptote(psi, x[-2], x[-1])
    lo_dirichlet = x[0] > 0.0
    if lo_dirichlet:
        lo_A, lo_B = _asymptote(psi, x[0], x[1])

    values = np.empty((grid.nt + 1, n))
    pay = np.asarray(psi(x), dtype=float)
    if pay.shape != x.shape or not np.all(np.isfinite(pay)):
        raise ValidationError("payoff must be finite on the grid")
    values[-1] = pay
    fixed = None if policy is None else np.broadcast_to(np.asarray(policy, dtype=float), op.xi.shape).copy()
    y = fixed.copy() if fixed is not None else op.hamiltonian(pay, eps)[1]
    iterations, thetas = [], []

    for step in range(grid.nt):
        k = grid.nt - 1 - step
        theta = 1.0 if step < RANNACHER_STEPS else 0.5
        tau = T - times[k]
        v_old = values[k + 1]
        if fixed is None:
            y = _policy_from(op, v_old, eps, y)
        rhs_int = v_old[1:-1] + (1.0 - theta) * dt * op.apply(v_old, y)
        rhs0 = v_old[0] * (1.0 - (1.0 - theta) * dt * params.r)

        for sweep in range(1, MAX_POLICY_SWEEPS + 1):
            lo, diag, up = op.rows(y)
            ab = np.zeros((3, n))
            rhs = np.empty(n)
            ab[1, 1:-1] = 1.0 - theta * dt * diag
            ab[0, 2:] = -theta * dt * up
            ab[2, :-2] = -theta * dt * lo
            rhs[1:-1] = rhs_int
            if lo_dirichlet:
                ab[1, 0] = 1.0
                rhs[0] = _boundary_value(lo_A, lo_B, x[0], tau, params.r, q_unit, eps)
            else:
                ab[1, 0] = 1.0 + theta * dt * params.r
                rhs[0] = rhs0
            ab[1, -1] = 1.0
            rhs[-1] = _boundary_value(hi_A, hi_B, x[-1], tau, params.r, q_unit, eps)
            v_new = obstacle(ab, rhs, pay) if obstacle is not None else solve_banded((1, 1), ab, rhs)
            if fixed is not None:
                break
            y_new = _policy_from(op, v_new, eps, y)
            if np.array_equal(y_new, y):
                break
            y = y_new
        else:
            raise SolverError(
                f"policy iteration did not settle in {MAX_POLICY_SWEEPS} sweeps at t={times[k]:.6g}"
            )
        if not np.all(np.isfinite(v_new)):
            raise SolverError(f"non-finite values at t={times[k]:.6g}")
        values[k] = v_new
        iterations.append(sweep)
        thetas.append(theta)

    # thetas/iterations are recorded from expiry backwards; store them in time order.
    return PDESolution(
        grid, times, x, values,
        iterations_per_step=iterations[::-1], thetas=thetas[::-1],
        kind=payoff if isinstance(payoff, str) else "custom", K=params.K, side=side,
    )


def solve_european(
    params: EuroParams,
    payoff: PayoffSpec = "call",
    side: str = "ask",
    grid: Optional[Grid] = None,
    policy: Optional[Union[float, np.ndarray]] = None,
) -> PDESolution:
    """Crank-Nicolson (Rannacher start) solve of the bid or ask equation.

    ``policy`` fixes the drift sign y instead of iterating on it, which turns
    the problem into the linear equation with rate r + s_rho*sigma*y.
    """
    grid = grid or Grid.around(params.K)
    sol = theta_march(params, payoff, side, grid, policy)
    sol.max_residual = residual_check(sol, params, side)
    return sol


def residual_check(solution: PDESolution, params: EuroParams, side: str, mask: Optional[np.ndarray] = None) -> float:
    """Largest scaled residual of the discrete equation over interior nodes.

    For each step the residual is (V^{k+1} - V^k)/dt + theta H(V^k) +
    (1 - theta) H(V^{k+1}), H the exact extremal operator, divided by
    1 + |V^k|. The terminal slice only enters through its neighbour. ``mask``
    (same shape as values) excludes nodes, e.g. the exercise region.
    """
    eps = side_sign(side)
    op = Operator(solution.x, params.r, params.sigma, params.s_rho)
    times = solution.times
    thetas = solution.thetas or [0.5] * (times.size - 1)
    worst = 0.0
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        v0, v1 = solution.values[k], solution.values[k + 1]
        h0, _ = op.hamiltonian(v0, eps)
        h1, _ = op.hamiltonian(v1, eps)
        th = thetas[k]
        res = (v1[1:-1] - v0[1:-1]) / dt + th * h0 + (1.0 - th) * h1
        scaled = np.abs(res) / (1.0 + np.abs(v0[1:-1]))
        if mask is not None:
            scaled = scaled[mask[k, 1:-1]]
        if scaled.size:
            worst = max(worst, float(scaled.max()))
    return worst
