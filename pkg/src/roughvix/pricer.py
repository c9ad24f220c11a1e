"""Fourier pricing of power-type VIX puts from the conditional CF.

    P = K/2 - (1/pi) int_0^{l_upper}
            Re[(K e^{-iK^2 l} + (sqrt(pi)/2 - Gamma(3/2, iK^2 l)) / sqrt(il)) Phi(l)/(il)] dl

The payoff represented is (K - sqrt(v))^+ for v >= 0 and K for v < 0, so
prices always lie in [0, K] up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import mpmath as mp
import numpy as np

from . import oracle
from .charfn import MarketState, QuadratureConfig, cf_slope_at_zero, conditional_cf, simpson_rule
from .errors import DomainError, NumericalIntegrityError
from .kernels import KernelParams
from .levy_special import StableParams, SubordinatorParams, lower_gamma_3half
from .params import SPOT_I, ModelParams

BOUND_SLACK = 1e-4
_SQRT_I = np.exp(0.25j * np.pi)


@dataclass(frozen=True)
class OptionSpec:
    """A put on the average-forward volatility: strike K, maturity T in years."""

    strike: float
    maturity: float
    side: str = "put"

    def validate(self) -> None:
        if not self.strike > 0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if self.side != "put":
            raise DomainError("only puts are supported")


@lru_cache(maxsize=8)
def outer_rule(qc: QuadratureConfig):
    """Simpson nodes/weights on (0, l_upper] over decade segments.

    Edges are l_upper * (0, 1e-4, 1e-3, 1e-2, 1e-1, 1). The last decade gets
    half of ``nodes_outer``, the four below share the rest. The l = 0
    endpoint weight is returned separately since the integrand there is a
    limit.
    """
    top = qc.l_upper
    edges = [0.0] + [top * 10.0**-k for k in (4, 3, 2, 1)] + [top]
    n_low = qc.nodes_outer // 8
    panels = [n_low] * 4 + [qc.nodes_outer // 2]
    nodes, weights = [], []
    for lo, hi, n in zip(edges[:-1], edges[1:], panels):
        x, w = simpson_rule(lo, hi, n)
        if nodes:
            weights[-1][-1] += w[0]
            x, w = x[1:], w[1:]
        nodes.append(x)
        weights.append(w)
    l = np.concatenate(nodes)
    w = np.concatenate(weights)
    w0 = float(w[0])
    l, w = l[1:], w[1:]
    l.setflags(write=False)
    w.setflags(write=False)
    return l, w, w0


def bracket_over_il(K: float, l):
    """(K e^{-iK^2 l} + gamma(3/2, iK^2 l)/sqrt(il)) / (il) for l > 0.

    gamma(3/2, .) is the lower incomplete gamma, sqrt(pi)/2 - Gamma(3/2, .).
    """
    l = np.asarray(l, dtype=float)
    z = 1j * K * K * l
    br = K * np.exp(-z) + lower_gamma_3half(z) / (np.sqrt(l) * _SQRT_I)
    return br / (1j * l)


@lru_cache(maxsize=256)
def _bracket_on_grid(K: float, qc: QuadratureConfig):
    l, _, _ = outer_rule(qc)
    out = bracket_over_il(K, l)
    out.setflags(write=False)
    return out


def transform_price(K: float, phi, phi0: complex, slope0: complex, qc: QuadratureConfig) -> float:
    """Apply the put transform to CF values ``phi`` on :func:`outer_rule` nodes.

    ``phi0`` and ``slope0`` are Phi(0) and Phi'(0), used for the l = 0 limit.
    """
    l, w, w0 = outer_rule(qc)
    f = np.real(_bracket_on_grid(float(K), qc) * phi)
    # limit l -> 0: bracket = K - i K^3 l / 3 + O(l^2), Im Phi(0) = 0
    f0 = K * slope0.imag - K**3 / 3.0 * phi0.real
    return K / 2.0 - (np.dot(w, f) + w0 * f0) / math.pi


def _check_bounds(price, K, where=""):
    if not np.isfinite(price) or price < -BOUND_SLACK or price > K + BOUND_SLACK:
        raise NumericalIntegrityError(f"put price {price!r} outside [0, {K}]{where}")


def _strip_prices(strikes, sp, kp, stp, ms, t, r, qc):
    l, _, _ = outer_rule(qc)
    phi = conditional_cf(l, sp, kp, stp, ms, t, r, qc, cache_grid=True)
    fast0 = replace(qc, backend="fast")
    phi0 = conditional_cf(0.0, sp, kp, stp, ms, t, r, fast0)
    slope0 = cf_slope_at_zero(sp, kp, stp, ms, t, r, fast0)
    return [transform_price(float(K), phi, phi0, slope0, qc) for K in strikes]


def put_price(
    spec: OptionSpec,
    sp: SubordinatorParams,
    kp: KernelParams,
    stp: StableParams,
    ms: MarketState,
    r: float,
    qc: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Price one put.

    Raises:
        NumericalIntegrityError: if the price leaves [-1e-4, K + 1e-4].
    """
    spec.validate()
    if qc.backend == "oracle":
        return oracle_put_prices([spec.strike], sp, kp, stp, ms, spec.maturity, r, qc)[0]
    price = _strip_prices([spec.strike], sp, kp, stp, ms, spec.maturity, r, qc)[0]
    _check_bounds(price, spec.strike)
    return float(price)


def default_market_state() -> MarketState:
    return MarketState(spot_I2=SPOT_I**2)


def price_grid(
    params: ModelParams,
    maturities: Sequence[float],
    strikes: Sequence[float],
    qc: QuadratureConfig = QuadratureConfig(),
    ms: MarketState | None = None,
) -> np.ndarray:
    """Put prices on a maturity x strike grid.

    ``maturities`` are in days. Row i holds maturity i, column j strike j.
    Remainders are looked up per maturity via :meth:`ModelParams.remainder`.

    Raises:
        NumericalIntegrityError: naming the offending (maturity, strike) cell.
    """
    if not len(maturities) or not len(strikes):
        raise DomainError("price_grid needs non-empty maturity and strike lists")
    ms = ms or default_market_state()
    sp, kp, stp = params.subordinator(), params.kernel(), params.stable()
    out = np.empty((len(maturities), len(strikes)))
    for i, days in enumerate(maturities):
        t = ms.t0 + days / 365.0
        r = params.remainder(days)
        try:
            row = _strip_prices(strikes, sp, kp, stp, ms, t, r, qc)
        except NumericalIntegrityError as exc:
            raise NumericalIntegrityError(f"maturity {days}d: {exc}") from None
        for j, (K, p) in enumerate(zip(strikes, row)):
            _check_bounds(p, K, f" at maturity {days}d, strike {K}")
            out[i, j] = p
    return out


def save_price_table(path, maturities, strikes, prices) -> None:
    """Write (maturity_days, strike, price) rows with a header line."""
    lines = ["maturity_days,strike,price"]
    for i, days in enumerate(maturities):
        for j, K in enumerate(strikes):
            lines.append(f"{days},{K!r},{float(prices[i][j])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- reference route -----------------------------------------------------------

def _gl_panels(qc: QuadratureConfig, degree: int = 16):
    """Composite Gauss-Legendre on the same truncated range, independent of Simpson."""
    top = qc.l_upper
    edges = [0.0] + [top * 10.0**-k for k in (4, 3, 2, 1)] + [top]
    per_seg = (4, 8, 16, 48, 240)
    gx, gw = np.polynomial.legendre.leggauss(degree)
    nodes, weights = [], []
    for lo, hi, n in zip(edges[:-1], edges[1:], per_seg):
        cuts = np.linspace(lo, hi, n + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            nodes.append(0.5 * (b - a) * gx + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * gw)
    return np.concatenate(nodes), np.concatenate(weights)


def oracle_put_prices(strikes, sp, kp, stp, ms, t, r, qc: QuadratureConfig):
    """Reference prices: mpmath CF and incomplete gamma on a Gauss-Legendre rule.

    Slow (minutes); meant for validating the fast route on a few cases.
    """
    l, w = _gl_panels(qc)
    oq = replace(qc, backend="oracle")
    phi = conditional_cf(l, sp, kp, stp, ms, t, r, oq)
    out = []
    with mp.workdps(oracle.DPS):
        for K in strikes:
            Km = mp.mpf(K)
            acc = mp.mpf(0)
            for li, wi, ph in zip(l, w, phi):
                lm = mp.mpf(li)
                z = 1j * Km**2 * lm
                low = mp.gammainc(mp.mpf(3) / 2, 0, z)
                br = Km * mp.exp(-z) + low / mp.sqrt(1j * lm)
                acc += wi * mp.re(br * mp.mpc(ph) / (1j * lm))
            out.append(float(Km / 2 - acc / mp.pi))
    return out
