"""Risk-averse American options as linear complementarity problems.

In the continuation region the value solves the bid or ask equation; with a
monotone payoff the sign of V_x is fixed, so the absolute value collapses to
a drift r + s_rho*sigma*y with y = -1 for the call bid and put ask and
y = +1 for the call ask and put bid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .closedform import EuroParams
from .errors import SolverError, ValidationError
from .pdesolve import Grid, PDESolution, make_payoff, residual_check, solve_european, theta_march

PSOR_OMEGA = 1.2
PSOR_TOL = 1e-9
PSOR_MAX_ITER = 5000
PENALTY = 1e7
PENALTY_MAX_ITER = 100


@dataclass(frozen=True)
class AmerParams(EuroParams):
    kind: str = "put"

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in ("call", "put"):
            raise ValidationError(f"kind must be 'call' or 'put', got {self.kind!r}")


@dataclass
class ExerciseBoundary:
    """L(t) per time level; NaN where no exercise region exists."""

    times: np.ndarray
    levels: np.ndarray
    side: str
    kind: str

    def early_region_nonempty(self) -> bool:
        return bool(np.any(np.isfinite(self.levels[:-1])))


def fixed_policy(kind: str, side: str) -> float:
    """Drift sign y for a monotone payoff (drift r + s_rho*sigma*y)."""
    if side not in ("bid", "ask"):
        raise ValidationError(f"side must be 'bid' or 'ask', got {side!r}")
    if kind == "call":
        return -1.0 if side == "bid" else 1.0
    if kind == "put":
        return 1.0 if side == "bid" else -1.0
    raise ValidationError(f"kind must be 'call' or 'put', got {kind!r}")


def _tridiag(ab: np.ndarray):
    n = ab.shape[1]
    lower = np.zeros(n)
    upper = np.zeros(n)
    lower[1:] = ab[2, :-1]
    upper[:-1] = ab[0, 1:]
    return lower, ab[1], upper


def psor(ab: np.ndarray, rhs: np.ndarray, obstacle: np.ndarray, x0: np.ndarray,
         omega: float = PSOR_OMEGA, tol: float = PSOR_TOL, max_iter: int = PSOR_MAX_ITER):
    """Projected SOR with red-black ordering. Returns (solution, iterations, converged)."""
    lower, diag, upper = _tridiag(ab)
    v = np.maximum(x0, obstacle)
    n = v.size
    colours = (np.arange(0, n, 2), np.arange(1, n, 2))
    for it in range(1, max_iter + 1):
        change = 0.0
        for idx in colours:
            left = np.where(idx > 0, v[np.maximum(idx - 1, 0)], 0.0)
            right = np.where(idx < n - 1, v[np.minimum(idx + 1, n - 1)], 0.0)
            gs = (rhs[idx] - lower[idx] * left - upper[idx] * right) / diag[idx]
            new = np.maximum(obstacle[idx], v[idx] + omega * (gs - v[idx]))
            change = max(change, float(np.max(np.abs(new - v[idx]))))
            v[idx] = new
        if change < tol:
            return v, it, True
    return v, max_iter, False


def penalty_solve(ab: np.ndarray, rhs: np.ndarray, obstacle: np.ndarray, x0: np.ndarray,
                  penalty: float = PENALTY, max_iter: int = PENALTY_MAX_ITER):
    """Penalized LCP solve by active-set iteration. Returns (solution, iterations)."""
    v = x0.copy()
    active = v < obstacle
    for it in range(1, max_iter + 1):
        a = ab.copy()
        a[1] += penalty * active
        v = solve_banded((1, 1), a, rhs + penalty * active * obstacle)
        new_active = v < obstacle
        if np.array_equal(new_active, active):
            return v, it
        active = new_active
    raise SolverError(f"penalty iteration did not settle in {max_iter} iterations")


class LCPStepper:
    """Per-step obstacle solver: PSOR first, penalty method if PSOR stalls."""

    def __init__(self, method: str = "psor"):
        if method not in ("psor", "penalty"):
            raise ValidationError(f"method must be 'psor' or 'penalty', got {method!r}")
        self.method = method
        self.fallbacks = 0
        self.iterations: List[int] = []

    def __call__(self, ab, rhs, obstacle):
        start = solve_banded((1, 1), ab, rhs)
        if self.method == "psor":
            v, it, ok = psor(ab, rhs, obstacle, start)
            if ok:
                self.iterations.append(it)
                return v
            self.fallbacks += 1
        v, it = penalty_solve(ab, rhs, obstacle, np.maximum(start, obstacle))
        self.iterations.append(it)
        return np.maximum(v, obstacle)


def solve_american(
    params: AmerParams,
    side: str = "bid",
    grid: Optional[Grid] = None,
    method: str = "psor",
    policy: str = "fixed",
    tolerance: float = 1e-6,
) -> Tuple[PDESolution, ExerciseBoundary]:
    """Solve min(-V_t - L V + r V, V - payoff) = 0 backwards from expiry.

    ``policy="fixed"`` uses the drift sign implied by the payoff's
    monotonicity; ``policy="iterate"`` lets policy iteration find it.
    """
    grid = grid or Grid.around(params.K)
    if policy not in ("fixed", "iterate"):
        raise ValidationError(f"policy must be 'fixed' or 'iterate', got {policy!r}")
    y = fixed_policy(params.kind, side) if policy == "fixed" else None
    stepper = LCPStepper(method)
    sol = theta_march(params, params.kind, side, grid, policy=y, obstacle=stepper)
    pay = make_payoff(params.kind, params.K)(sol.x)
    continuation = sol.values - pay[None, :] > tolerance
    sol.max_residual = residual_check(sol, params, side, mask=continuation)
    return sol, exercise_boundary(sol, tolerance)


def exercise_boundary(solution: PDESolution, tolerance: float = 1e-6) -> ExerciseBoundary:
    """Per time level, where V - payoff first exceeds ``tolerance`` coming from the exercise side.

    The crossing is located by linear interpolation between the straddling
    nodes. At expiry every in-the-money node is exercised and the boundary is
    the strike.
    """
    kind, K = solution.kind, solution.K
    if kind not in ("call", "put"):
        raise ValidationError("exercise boundaries need a call or put solution")
    x = solution.x
    pay = make_payoff(kind, K)(x)
    levels = np.full(solution.times.size, np.nan)
    order = np.arange(x.size) if kind == "put" else np.arange(x.size)[::-1]
    xs, ps = x[order], pay[order]
    for k, row in enumerate(solution.values):
        gap = (row - pay)[order]
        exercised = (gap <= tolerance) & (ps > 0)
        if not exercised[0]:
            continue
        j = int(np.argmin(exercised)) if not exercised.all() else xs.size - 1
        if exercised.all():
            levels[k] = xs[-1]
            continue
        if gap[j] <= tolerance:
            # Left the region because the payoff hit zero: the strike, by linearity.
            w = ps[j - 1] / (ps[j - 1] - ps[j])
        else:
            w = (tolerance - gap[j - 1]) / (gap[j] - gap[j - 1])
        levels[k] = xs[j - 1] + w * (xs[j] - xs[j - 1])
    return ExerciseBoundary(solution.times.copy(), levels, solution.side, kind)


def early_exercise_premium(params: AmerParams, side: str = "bid", grid: Optional[Grid] = None, method: str = "psor") -> float:
    """American minus European value at (t, x), both on the same grid."""
    grid = grid or Grid.around(params.K)
    amer, _ = solve_american(params, side, grid, method)
    euro = solve_european(params, params.kind, side, grid)
    return float(amer.at(params.t, params.x) - euro.at(params.t, params.x))


def value_curve(params: AmerParams, s_rho_grid: Sequence[float], grid: Optional[Grid] = None) -> List[tuple]:
    """Rows (s_rho, bid, ask) of the American value at (t, x)."""
    rows = []
    for s in s_rho_grid:
        p = AmerParams(params.x, params.K, params.r, params.sigma, params.t, params.T, float(s), params.kind)
        bid, _ = solve_american(p, "bid", grid)
        ask, _ = solve_american(p, "ask", grid)
        rows.append((float(s), float(bid.at(p.t, p.x)), float(ask.at(p.t, p.x))))
    return rows


def boundary_table(bid: ExerciseBoundary, ask: ExerciseBoundary) -> List[tuple]:
    """Rows (t, L_bid, L_ask) on the shared time grid."""
    if bid.times.shape != ask.times.shape or not np.allclose(bid.times, ask.times):
        raise ValidationError("bid and ask boundaries must share a time grid")
    return [(float(t), float(lb), float(la)) for t, lb, la in zip(bid.times, bid.levels, ask.levels)]
