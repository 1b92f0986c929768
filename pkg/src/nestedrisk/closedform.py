"""Risk-averse Black-Scholes values for European calls and puts.

Risk aversion enters as a continuous yield ``q`` on the underlying: the call
bid and put ask use q = +s_rho*sigma, the call ask and put bid q = -s_rho*sigma.
The same kernel prices the tree limit (q = beta*sigma/2) and Garman-Kohlhagen
FX options (q = r_f).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from .errors import ValidationError

SQRT2 = math.sqrt(2.0)


def norm_cdf(z):
    """Standard normal CDF through the complementary error function."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / SQRT2)


@dataclass(frozen=True)
class EuroParams:
    x: float
    K: float
    r: float
    sigma: float
    t: float = 0.0
    T: float = 1.0
    s_rho: float = 0.0

    def __post_init__(self):
        if not np.all(np.asarray(self.x) > 0):
            raise ValidationError("spot x must be positive")
        if not self.K > 0:
            raise ValidationError(f"strike K must be positive, got {self.K}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (0.0 <= self.t <= self.T):
            raise ValidationError(f"need 0 <= t <= T, got t={self.t}, T={self.T}")
        if self.s_rho < 0:
            raise ValidationError(f"s_rho must be nonnegative, got {self.s_rho}")

    @property
    def tau(self) -> float:
        return self.T - self.t


def _sign(sign) -> float:
    if sign in ("+", 1, 1.0):
        return 1.0
    if sign in ("-", "−", -1, -1.0):
        return -1.0
    raise ValidationError(f"sign must be '+' or '-', got {sign!r}")


def _d1_d2(x, K, r, q, sigma, tau):
    vol = sigma * math.sqrt(tau)
    with np.errstate(divide="ignore"):
        d1 = (np.log(np.asarray(x, dtype=float) / K) + (r - q + 0.5 * sigma * sigma) * tau) / vol
    return d1, d1 - vol


def d_values(params: EuroParams, sign="+") -> Tuple[float, float]:
    """(d1, d2) with the drift r + sign*s_rho*sigma."""
    if params.tau <= 0.0:
        raise ValidationError("d-values are undefined at expiry; use the payoff")
    q = -_sign(sign) * params.s_rho * params.sigma
    return _d1_d2(params.x, params.K, params.r, q, params.sigma, params.tau)


def dividend_call(x, K, r, q, sigma, tau):
    """Call on an asset paying a continuous yield q."""
    if tau <= 0.0:
        return np.maximum(np.asarray(x, dtype=float) - K, 0.0)
    d1, d2 = _d1_d2(x, K, r, q, sigma, tau)
    return x * math.exp(-q * tau) * norm_cdf(d1) - K * math.exp(-r * tau) * norm_cdf(d2)


def dividend_put(x, K, r, q, sigma, tau):
    """Put on an asset paying a continuous yield q."""
    if tau <= 0.0:
        return np.maximum(K - np.asarray(x, dtype=float), 0.0)
    d1, d2 = _d1_d2(x, K, r, q, sigma, tau)
    return K * math.exp(-r * tau) * norm_cdf(-d2) - x * math.exp(-q * tau) * norm_cdf(-d1)


def _check_side(side: str) -> str:
    if side not in ("bid", "ask"):
        raise ValidationError(f"side must be 'bid' or 'ask', got {side!r}")
    return side


def risk_yield(kind: str, side: str, s_rho: float, sigma: float) -> float:
    """Yield q that turns the nonlinear bid/ask PDE into a linear dividend model."""
    _check_side(side)
    if kind == "call":
        return s_rho * sigma if side == "bid" else -s_rho * sigma
    if kind == "put":
        return -s_rho * sigma if side == "bid" else s_rho * sigma
    raise ValidationError(f"kind must be 'call' or 'put', got {kind!r}")


def call_value(params: EuroParams, side: str = "ask"):
    q = risk_yield("call", side, params.s_rho, params.sigma)
    return dividend_call(params.x, params.K, params.r, q, params.sigma, params.tau)


def put_value(params: EuroParams, side: str = "ask"):
    q = risk_yield("put", side, params.s_rho, params.sigma)
    return dividend_put(params.x, params.K, params.r, q, params.sigma, params.tau)


def option_value(params: EuroParams, kind: str, side: str):
    if kind == "call":
        return call_value(params, side)
    if kind == "put":
        return put_value(params, side)
    raise ValidationError(f"kind must be 'call' or 'put', got {kind!r}")


def spread_curve(params: EuroParams, s_rho_grid: Sequence[float], kind: str = "call") -> List[tuple]:
    """Rows (s_rho, bid, ask, ask - bid)."""
    rows = []
    for s in s_rho_grid:
        p = EuroParams(params.x, params.K, params.r, params.sigma, params.t, params.T, float(s))
        bid = float(option_value(p, kind, "bid"))
        ask = float(option_value(p, kind, "ask"))
        rows.append((float(s), bid, ask, ask - bid))
    return rows


def price_grid(spots: Sequence[float], s_rho_grid: Sequence[float], K: float, r: float, sigma: float, T: float) -> List[tuple]:
    """Rows (x, s_rho, call_bid, call_ask, put_bid, put_ask) at t = 0."""
    rows = []
    for s in s_rho_grid:
        for x in spots:
            p = EuroParams(float(x), K, r, sigma, 0.0, T, float(s))
            rows.append((
                float(x), float(s),
                float(call_value(p, "bid")), float(call_value(p, "ask")),
                float(put_value(p, "bid")), float(put_value(p, "ask")),
            ))
    return rows


def z_spread(mu_averse: float, r: float, sigma: float) -> float:
    """(mu_averse - r) / sigma: the risk coefficient in Sharpe-ratio units."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    return (mu_averse - r) / sigma


def garman_kohlhagen_value(x, K, r_d, r_f, sigma, tau):
    """Domestic value of a call on a foreign currency with rates r_d, r_f."""
    if not (K > 0 and sigma > 0 and tau >= 0):
        raise ValidationError("need K > 0, sigma > 0 and tau >= 0")
    return dividend_call(x, K, r_d, r_f, sigma, tau)


def pde_residual(params: EuroParams, kind: str, side: str, t, x, h: float = 1e-3) -> np.ndarray:
    """Scaled residual |V_t + r x V_x + sig^2 x^2 V_xx / 2 -+ s|sig x V_x| - r V| / (1 + |V|).

    Derivatives are fourth-order central differences of the closed form with
    relative step ``h``; the sign of the risk term is + for the ask and - for
    the bid equation.
    """
    _check_side(side)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps = 1.0 if side == "ask" else -1.0
    q = risk_yield(kind, side, params.s_rho, params.sigma)
    price = dividend_call if kind == "call" else dividend_put
    out = np.empty(np.broadcast(t, x).shape)
    for i, (ti, xi) in enumerate(np.broadcast(t, x)):
        v = lambda tt, xx: float(price(xx, params.K, params.r, q, params.sigma, params.T - tt))  # noqa: E731
        hx, ht = h * xi, h
        f = [v(ti, xi + k * hx) for k in (-2, -1, 0, 1, 2)]
        g = [v(ti + k * ht, xi) for k in (-2, -1, 1, 2)]
        vx = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * hx)
        vxx = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * hx * hx)
        vt = (g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * ht)
        res = (
            vt + params.r * xi * vx + 0.5 * params.sigma ** 2 * xi * xi * vxx
            + eps * params.s_rho * abs(params.sigma * xi * vx) - params.r * f[2]
        )
        out.flat[i] = abs(res) / (1.0 + abs(f[2]))
    return out
