"""Characteristic exponents of the driving Lévy processes and the complex
special functions needed by the put-pricing transform.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

SQRT_PI = math.sqrt(math.pi)
GAMMA_3HALF = 0.5 * SQRT_PI


@dataclass(frozen=True)
class SubordinatorParams:
    """Tempered-stable subordinator with Lévy density ``a e^{-bz} z^{-1-c}``.

    Attributes:
        a: Jump intensity scale, > 0.
        b: Tempering rate, > 0.
        c: Jump-activity exponent in (0, 1).
    """

    a: float
    b: float
    c: float

    def validate(self) -> None:
        if not self.a > 0:
            raise DomainError(f"a must be positive, got {self.a}")
        if not self.b > 0:
            raise DomainError(f"b must be positive, got {self.b}")
        if not 0 < self.c < 1:
            raise DomainError(f"c must lie in (0, 1), got {self.c}")


@dataclass(frozen=True)
class StableParams:
    """Symmetric stable auxiliary process and the sinusoidal amplitude."""

    alpha: float = 1.715
    zeta: float = 0.01

    def validate(self) -> None:
        if not 1 < self.alpha < 2:
            raise DomainError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.zeta >= 0:
            raise DomainError(f"zeta must be non-negative, got {self.zeta}")


def gamma_neg(c: float) -> float:
    """Gamma(-c) for c in (0, 1), via the reflection formula."""
    return -math.pi / (c * math.gamma(c) * math.sin(math.pi * c))


def char_exponent_X(l, p: SubordinatorParams, check: bool = True):
    """Log characteristic function of the subordinator at unit time.

    ``a Gamma(-c) ((b - il)^c - b^c)``, evaluated as
    ``a Gamma(-c) b^c expm1(c log1p(-il/b))`` so small frequencies keep
    full relative accuracy.
    """
    if check:
        p.validate()
    l = np.asarray(l, dtype=float)
    z = special.log1p(-1j * l / p.b)
    out = p.a * gamma_neg(p.c) * p.b**p.c * special.expm1(p.c * z)
    return out[()] if out.ndim == 0 else out


def mean_jump_rate(p: SubordinatorParams, check: bool = True) -> float:
    """E[X_1] = a Gamma(1-c) / b^(1-c)."""
    if check:
        p.validate()
    return p.a * math.gamma(1.0 - p.c) / p.b ** (1.0 - p.c)


def char_fn_Z(l, alpha: float):
    """Characteristic function ``exp(-|l|^alpha)`` of the stable driver."""
    if not 1 < alpha < 2:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    return np.exp(-np.abs(l) ** alpha)


def erfc_complex(z):
    """Complementary error function on the complex plane.

    Backed by the Faddeeva-function implementation in scipy.
    """
    return special.erfc(np.asarray(z, dtype=complex))[()]


def upper_gamma_3half(z):
    """Upper incomplete gamma Gamma(3/2, z), principal branch.

    Uses Gamma(3/2, z) = Gamma(1/2, z)/2 + sqrt(z) e^{-z} and
    Gamma(1/2, z) = sqrt(pi) erfc(sqrt(z)).

    Raises:
        OverflowError: if the result is not representable.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise OverflowError("non-finite argument to upper_gamma_3half")
    w = np.sqrt(z)
    with np.errstate(over="ignore", invalid="ignore"):
        out = 0.5 * SQRT_PI * special.erfc(w) + w * np.exp(-z)
    if not np.all(np.isfinite(out)):
        raise OverflowError("Gamma(3/2, z) overflows for some |z|")
    return out[()]


_LOWER_SERIES_TERMS = 40


def lower_gamma_3half(z):
    """Lower incomplete gamma gamma(3/2, z) = Gamma(3/2) - Gamma(3/2, z).

    Power series near the origin, where the difference would cancel.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1.0
    if np.any(small):
        zs = z[small]
        term = np.ones_like(zs)
        acc = term / 1.5
        for n in range(1, _LOWER_SERIES_TERMS):
            term = term * (-zs) / n
            acc = acc + term / (n + 1.5)
        out[small] = zs * np.sqrt(zs) * acc
    if np.any(~small):
        out[~small] = GAMMA_3HALF - upper_gamma_3half(z[~small])
    return out[()]
