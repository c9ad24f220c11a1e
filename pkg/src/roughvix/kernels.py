"""Type-III piecewise Volterra kernel, its window-averaged form, and the
two lag integrals consumed by the characteristic function.

Time is in years (day count /365).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .levy_special import SubordinatorParams, char_exponent_X, mean_jump_rate

DEFAULT_DELTA = 30.0 / 365.0
DEFAULT_S_PANELS = 128


@dataclass(frozen=True)
class KernelParams:
    """Roughness exponent ``d``, mean reversion ``kappa``, window ``delta``."""

    d: float
    kappa: float
    delta: float = DEFAULT_DELTA

    def validate(self) -> None:
        if not 0.5 < self.d < 1:
            raise DomainError(f"d must lie in (0.5, 1), got {self.d}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")

    @property
    def breakpoint(self) -> float:
        """Lag (1-d)/kappa where the kernel switches to its exponential tail."""
        return (1.0 - self.d) / self.kappa

    @property
    def _tail_const(self) -> float:
        # (1-d)^{2-d} Gamma(d-1); negative on (0.5, 1)
        return (1.0 - self.d) ** (2.0 - self.d) * math.gamma(self.d - 1.0)


def kernel_h(x, kp: KernelParams):
    """The piecewise kernel h(x) for lag x > 0."""
    kp.validate()
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("kernel_h requires x > 0")
    d, k = kp.d, kp.kappa
    bp = kp.breakpoint
    cst = kp._tail_const
    xs = np.minimum(x, bp)
    near = (xs ** (d - 1) - bp ** (d - 1)) / math.gamma(d) - k ** (1 - d) / cst
    far = -((math.e * k) ** (1 - d)) * np.exp(-k * x) / cst
    out = np.where(x < bp, near, far)
    return out[()] if out.ndim == 0 else out


def kernel_H_delta(x, kp: KernelParams):
    """Window-averaged kernel (1/delta) int_0^delta h(x+u) du in closed form."""
    kp.validate()
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("kernel_H_delta requires x >= 0")
    d, k, dl = kp.d, kp.kappa, kp.delta
    bp = kp.breakpoint
    cst = kp._tail_const
    g1 = math.gamma(d + 1.0)
    xp = x + dl
    xs = np.minimum(x, bp)
    with np.errstate(over="ignore"):
        e_end = np.exp(-k * xp + 1.0 - d)
    b1 = (xp**d - x**d) / (dl * g1)
    b2 = (bp**d - xs**d) / (dl * g1) + (e_end - 1.0) / (k**d * dl * cst)
    b3 = -e_end * math.expm1(k * dl) / (k**d * dl * cst)
    out = np.where(xp < bp, b1, np.where(x < bp, b2, b3))
    return out[()] if out.ndim == 0 else out


@lru_cache(maxsize=256)
def _lag_rule(tau: float, breaks: tuple[float, ...], panels: int):
    """Nodes and weights for int_0^tau f(u) du.

    Composite Simpson on each segment between interior breakpoints. The
    first segment is graded with u = s1 * v^3 so the u^d behaviour of the
    kernel at zero lag keeps fourth-order convergence.
    """
    edges = [0.0] + [b for b in breaks if 0.0 < b < tau] + [tau]
    nodes, weights = [], []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        v = np.linspace(0.0, 1.0, panels + 1)
        w = np.full(panels + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= 1.0 / (3.0 * panels)
        if i == 0:
            nodes.append(lo + (hi - lo) * v**3)
            weights.append(w * 3.0 * (hi - lo) * v**2)
        else:
            nodes.append(lo + (hi - lo) * v)
            weights.append(w * (hi - lo))
    u = np.concatenate(nodes)
    wt = np.concatenate(weights)
    u.setflags(write=False)
    wt.setflags(write=False)
    return u, wt


def lag_rule(tau: float, kp: KernelParams, panels: int = DEFAULT_S_PANELS):
    """Quadrature nodes/weights on [0, tau] split at both kernel breakpoints."""
    if not tau > 0:
        raise DomainError("integration range must be non-empty (t > t0)")
    bp = kp.breakpoint
    return _lag_rule(float(tau), (bp - kp.delta, bp), int(panels))


def integral_H(t0: float, t: float, kp: KernelParams, panels: int = DEFAULT_S_PANELS) -> float:
    """int_{t0}^{t} H_delta(t - s) ds."""
    kp.validate()
    if not t > t0:
        raise DomainError(f"need t > t0, got t0={t0}, t={t}")
    u, w = lag_rule(t - t0, kp, panels)
    return float(np.dot(w, kernel_H_delta(u, kp)))


def integral_log_phiX(
    l,
    t0: float,
    t: float,
    kp: KernelParams,
    sp: SubordinatorParams,
    panels: int = DEFAULT_S_PANELS,
):
    """int_{t0}^{t} log phi_X(l H_delta(t - s)) ds, vectorised over l."""
    kp.validate()
    sp.validate()
    if not t > t0:
        raise DomainError(f"need t > t0, got t0={t0}, t={t}")
    u, w = lag_rule(t - t0, kp, panels)
    H = kernel_H_delta(u, kp)
    l = np.asarray(l, dtype=float)
    flat = l.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 4_000_000 // len(u))
    for i in range(0, len(flat), chunk):
        lh = flat[i : i + chunk, None] * H[None, :]
        out[i : i + chunk] = char_exponent_X(lh, sp, check=False) @ w
    out = out.reshape(l.shape)
    return out[()] if out.ndim == 0 else out


def compensator(t0: float, t: float, kp: KernelParams, sp: SubordinatorParams,
                panels: int = DEFAULT_S_PANELS) -> float:
    """xi_1 * int H_delta ds, the drift removed from the spot level."""
    return mean_jump_rate(sp) * integral_H(t0, t, kp, panels)
