"""Conditional characteristic function of the average-forward variance.

    Phi(l) = (1/pi) exp{ il J + int log phi_X(l H_delta) ds }
             * int_{-X}^{X} psi(l, x) int_0^L Re[e^{-i ell x} phi_Z^tau(ell)] dell dx

with J = I^2_{t0} - xi_1 int H_delta ds + r.  The (x, ell) double integral
depends only on (tau, alpha, zeta, delta, Z_t0) and the quadrature layout,
never on the subordinator or kernel parameters, so it is tabulated once per
maturity and reused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import oracle
from .errors import DomainError, NumericalIntegrityError
from .kernels import KernelParams, integral_log_phiX, lag_rule, kernel_H_delta
from .levy_special import StableParams, SubordinatorParams, char_exponent_X, mean_jump_rate

BACKENDS = ("fast", "oracle")


@dataclass(frozen=True)
class MarketState:
    """Observed state at time ``t0``.

    Attributes:
        spot_I2: Squared spot average-forward volatility (e.g. 0.1793**2).
        z_t0: State of the auxiliary stable process, radians.
        t0: Observation time in years.
    """

    spot_I2: float
    z_t0: float = 0.0
    t0: float = 0.0

    def validate(self) -> None:
        if not self.spot_I2 > 0:
            raise DomainError(f"spot_I2 must be positive, got {self.spot_I2}")


@dataclass(frozen=True)
class QuadratureConfig:
    """Truncation limits and panel counts for every integral layer.

    ``nodes_outer`` is spread over decade segments of [0, l_upper] (see
    :func:`roughvix.pricer.outer_rule`); ``nodes_s`` is the panel count per
    smooth segment of the lag integrals.
    """

    ell_upper: float = 30.0
    x_bound: float = 30.0
    l_upper: float = 10_000.0
    nodes_inner: int = 4096
    nodes_mid: int = 4096
    nodes_outer: int = 16384
    nodes_s: int = 128
    backend: str = "fast"

    def __post_init__(self):
        for name in ("ell_upper", "x_bound", "l_upper"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        for name in ("nodes_inner", "nodes_mid", "nodes_s"):
            n = getattr(self, name)
            if n < 16 or n % 2:
                raise DomainError(f"{name} must be even and >= 16, got {n}")
        if self.nodes_outer < 80 or self.nodes_outer % 16:
            raise DomainError(f"nodes_outer must be a multiple of 16 and >= 80, got {self.nodes_outer}")
        if self.backend not in BACKENDS:
            raise DomainError(f"backend must be one of {BACKENDS}, got {self.backend!r}")


def simpson_rule(lo: float, hi: float, panels: int):
    """Composite Simpson nodes and weights on [lo, hi]."""
    x = np.linspace(lo, hi, panels + 1)
    w = np.full(panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * (hi - lo) / (3.0 * panels)


def _ell_rule(upper: float, panels: int):
    # phi_Z^tau has an ell^alpha cusp at 0; grade a short head with ell = v^2.
    head = min(0.25, upper / 8.0)
    n_head = max(8, 2 * (panels // 64))
    v, wv = simpson_rule(0.0, 1.0, n_head)
    x_head, w_head = head * v**2, wv * 2.0 * head * v
    x_tail, w_tail = simpson_rule(head, upper, panels - n_head)
    return np.concatenate([x_head, x_tail[1:]]), np.concatenate([w_head[:-1], [w_head[-1] + w_tail[0]], w_tail[1:]])


def _stable_ratio(alpha: float, delta: float) -> complex:
    """(phi_Z^delta(1) - 1) / log phi_Z(1)."""
    log_phi1 = complex(-(1.0**alpha))
    return (np.exp(delta * log_phi1) - 1.0) / log_phi1


def psi(l, x, ms: MarketState, kp: KernelParams, stp: StableParams):
    """The sinusoidal-jump factor psi(l, x; t0, delta)."""
    q = _stable_ratio(stp.alpha, kp.delta)
    x = np.asarray(x, dtype=float)
    cz, sz = math.cos(ms.z_t0), math.sin(ms.z_t0)
    phase = (
        q.real * (np.cos(x) * cz - np.sin(x) * sz)
        - q.imag * (np.sin(x) * cz + np.cos(x) * sz)
        + kp.delta
    )
    out = np.exp(1j * np.asarray(l, dtype=float) * stp.zeta / kp.delta * phase)
    return out[()] if out.ndim == 0 else out


def inner_ell_integral(x, tau: float, alpha: float, qc: QuadratureConfig):
    """int_0^{ell_upper} cos(ell x) exp(-tau ell^alpha) d ell."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    ell, w = _ell_rule(qc.ell_upper, qc.nodes_inner)
    wd = w * np.exp(-tau * ell**alpha)
    x = np.asarray(x, dtype=float)
    out = np.cos(np.multiply.outer(x, ell)) @ wd
    return out[()] if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _mid_layer(tau: float, alpha: float, zeta: float, delta: float, z_t0: float, qc: QuadratureConfig):
    """x nodes, Simpson weights times the inner integral, and psi's phase."""
    x, wx = simpson_rule(-qc.x_bound, qc.x_bound, qc.nodes_mid)
    wg = wx * inner_ell_integral(x, tau, alpha, qc)
    q = _stable_ratio(alpha, delta)
    y = x + z_t0
    phase = (q.real * np.cos(y) - q.imag * np.sin(y)) / delta
    return wg, phase


def mid_integral(l, tau: float, stp: StableParams, delta: float, z_t0: float, qc: QuadratureConfig):
    """int psi(l, x) * inner(x) dx for an array of l."""
    wg, phase = _mid_layer(float(tau), stp.alpha, stp.zeta, float(delta), float(z_t0), qc)
    l = np.asarray(l, dtype=float)
    flat = l.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 2_000_000 // len(wg))
    for i in range(0, len(flat), chunk):
        lz = flat[i : i + chunk] * stp.zeta
        out[i : i + chunk] = np.exp(1j * np.multiply.outer(lz, phase)) @ wg * np.exp(1j * lz)
    return out.reshape(l.shape)


def mid_integral_slope(tau: float, stp: StableParams, delta: float, z_t0: float, qc: QuadratureConfig):
    """d/dl of :func:`mid_integral` at l = 0 (purely imaginary)."""
    wg, phase = _mid_layer(float(tau), stp.alpha, stp.zeta, float(delta), float(z_t0), qc)
    return 1j * stp.zeta * float(np.dot(wg, phase + 1.0))


@lru_cache(maxsize=64)
def _mid_on_grid(grid_key, tau, stp, delta, z_t0, qc):
    grid = np.frombuffer(grid_key, dtype=float)
    out = mid_integral(grid, tau, stp, delta, z_t0, qc)
    out.setflags(write=False)
    return out


def j_effective(ms: MarketState, xi1: float, iH: float, r: float) -> float:
    """J = I^2_{t0} - xi_1 * int H_delta ds + r."""
    return ms.spot_I2 - xi1 * iH + r


def _check(sp, kp, stp, ms, t):
    sp.validate()
    kp.validate()
    stp.validate()
    ms.validate()
    if not t > ms.t0:
        raise DomainError(f"maturity {t} must exceed t0 {ms.t0}")


def conditional_cf(
    l,
    sp: SubordinatorParams,
    kp: KernelParams,
    stp: StableParams,
    ms: MarketState,
    t: float,
    r: float,
    qc: QuadratureConfig = QuadratureConfig(),
    *,
    cache_grid: bool = False,
):
    """Conditional characteristic function Phi(l), vectorised over ``l``.

    With ``cache_grid=True`` the psi layer for this exact ``l`` array is
    memoised, which the pricer uses for its fixed outer grid.

    Raises:
        NumericalIntegrityError: if any value is non-finite.
    """
    _check(sp, kp, stp, ms, t)
    tau = t - ms.t0
    l_arr = np.asarray(l, dtype=float)
    if qc.backend == "oracle":
        vals = [
            complex(
                oracle.conditional_cf(
                    li, a=sp.a, b=sp.b, c=sp.c, d=kp.d, kappa=kp.kappa, delta=kp.delta,
                    alpha=stp.alpha, zeta=stp.zeta, spot_I2=ms.spot_I2, r=r, tau=tau,
                    z_t0=ms.z_t0, x_bound=qc.x_bound, ell_upper=qc.ell_upper,
                )
            )
            for li in l_arr.reshape(-1)
        ]
        out = np.array(vals, dtype=complex).reshape(l_arr.shape)
    else:
        u, w = lag_rule(tau, kp, qc.nodes_s)
        iH = float(np.dot(w, kernel_H_delta(u, kp)))
        J = j_effective(ms, mean_jump_rate(sp), iH, r)
        lev = integral_log_phiX(l_arr, ms.t0, t, kp, sp, qc.nodes_s)
        if cache_grid:
            l_arr = np.ascontiguousarray(l_arr, dtype=float)
            dbl = _mid_on_grid(l_arr.tobytes(), float(tau), stp, float(kp.delta), float(ms.z_t0), qc)
        else:
            dbl = mid_integral(l_arr, tau, stp, kp.delta, ms.z_t0, qc)
        out = np.exp(1j * l_arr * J + lev) * dbl / math.pi
    if not np.all(np.isfinite(out)):
        raise NumericalIntegrityError("non-finite characteristic function value")
    return out[()] if out.ndim == 0 else out


def cf_slope_at_zero(sp, kp, stp, ms, t, r, qc: QuadratureConfig = QuadratureConfig()) -> complex:
    """Phi'(0) from the fast layout.

    The compensator cancels the subordinator's mean, leaving
    (1/pi)[i (I^2 + r) D(0) + D'(0)] with D the psi-weighted double integral.
    """
    tau = t - ms.t0
    d0 = mid_integral(0.0, tau, stp, kp.delta, ms.z_t0, qc)
    d1 = mid_integral_slope(tau, stp, kp.delta, ms.z_t0, qc)
    return complex((1j * (ms.spot_I2 + r) * d0 + d1) / math.pi)

