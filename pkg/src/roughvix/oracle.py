"""Arbitrary-precision reference backend.

Every quantity here is computed along a route that shares no quadrature
with the fast path:

* the compensator integral of the averaged kernel uses closed-form
  antiderivatives of the kernel;
* the log-CF lag integral uses mpmath's adaptive tanh-sinh rule;
* the psi-weighted double integral over (x, ell) is reduced with the
  Jacobi-Anger expansion  exp(i b cos y) = sum_n i^n J_n(b) e^{iny},
  which integrates the x-direction exactly on [-X, X] and leaves a
  one-dimensional ell-integral per Bessel order, done adaptively.

Precision is ``mp.dps = DPS`` inside every public call.
"""

from __future__ import annotations

from functools import lru_cache

import mpmath as mp

DPS = 30


def _mpf(x):
    return mp.mpf(x) if not isinstance(x, mp.mpf) else x


# -- Levy exponents and special functions ----------------------------------

def char_exponent_X(l, a, b, c):
    with mp.workdps(DPS):
        a, b, c = _mpf(a), _mpf(b), _mpf(c)
        return a * mp.gamma(-c) * ((b - 1j * _mpf(l)) ** c - b**c)


def mean_jump_rate(a, b, c):
    with mp.workdps(DPS):
        a, b, c = _mpf(a), _mpf(b), _mpf(c)
        return a * mp.gamma(1 - c) / b ** (1 - c)


def upper_gamma_3half(z):
    with mp.workdps(DPS):
        return mp.gammainc(mp.mpf(3) / 2, mp.mpc(z))


def erfc(z):
    with mp.workdps(DPS):
        return mp.erfc(mp.mpc(z))


# -- kernel -----------------------------------------------------------------

def kernel_h(x, d, kappa):
    with mp.workdps(DPS):
        x, d, k = _mpf(x), _mpf(d), _mpf(kappa)
        bp = (1 - d) / k
        cst = (1 - d) ** (2 - d) * mp.gamma(d - 1)
        if x < bp:
            return (x ** (d - 1) - bp ** (d - 1)) / mp.gamma(d) - k ** (1 - d) / cst
        return -((mp.e * k) ** (1 - d)) * mp.exp(-k * x) / cst


def kernel_H_delta(x, d, kappa, delta):
    with mp.workdps(DPS):
        x, d, k, dl = _mpf(x), _mpf(d), _mpf(kappa), _mpf(delta)
        bp = (1 - d) / k
        cst = (1 - d) ** (2 - d) * mp.gamma(d - 1)
        g1 = mp.gamma(d + 1)
        if x + dl < bp:
            return ((x + dl) ** d - x**d) / (dl * g1)
        e_end = mp.exp(-k * (x + dl) + 1 - d)
        if x < bp:
            return (bp**d - x**d) / (dl * g1) + (e_end - 1) / (k**d * dl * cst)
        return -e_end * mp.expm1(k * dl) / (k**d * dl * cst)


def _h_antiderivatives(d, k):
    """First and second antiderivatives of h vanishing at zero."""
    bp = (1 - d) / k
    cst = (1 - d) ** (2 - d) * mp.gamma(d - 1)
    E = (mp.e * k) ** (1 - d) / (cst * k)
    h1_bp = bp**d / mp.gamma(d + 1)
    h2_bp = bp ** (d + 1) / mp.gamma(d + 2)
    ebp = mp.exp(-k * bp)

    def h2(v):
        if v <= bp:
            return v ** (d + 1) / mp.gamma(d + 2)
        return h2_bp + h1_bp * (v - bp) + E * ((ebp - mp.exp(-k * v)) / k - ebp * (v - bp))

    return h2


def integral_H(tau, d, kappa, delta):
    """int_0^tau H_delta(u) du from the closed-form double antiderivative."""
    with mp.workdps(DPS):
        tau, d, k, dl = _mpf(tau), _mpf(d), _mpf(kappa), _mpf(delta)
        h2 = _h_antiderivatives(d, k)
        return (h2(tau + dl) - h2(dl) - h2(tau)) / dl


def integral_log_phiX(l, tau, a, b, c, d, kappa, delta):
    with mp.workdps(DPS):
        l, tau = _mpf(l), _mpf(tau)
        a, b, c = _mpf(a), _mpf(b), _mpf(c)
        d, k, dl = _mpf(d), _mpf(kappa), _mpf(delta)
        G = a * mp.gamma(-c)
        bc = b**c
        bp = (1 - d) / k
        pts = [mp.mpf(0)] + [p for p in (bp - dl, bp) if 0 < p < tau] + [tau]

        def f(u):
            return G * ((b - 1j * l * kernel_H_delta(u, d, k, dl)) ** c - bc)

        return mp.quad(f, pts)


# -- stable / psi layer -------------------------------------------------------

@lru_cache(maxsize=4096)
def _bessel_moment(n, tau, alpha, x_bound, ell_upper):
    """I_n = int_0^L e^{-tau ell^alpha} int_{-X}^{X} cos(n x) cos(ell x) dx dell."""
    with mp.workdps(DPS):
        tau, alpha = _mpf(tau), _mpf(alpha)
        X, L = _mpf(x_bound), _mpf(ell_upper)
        # beyond this the damping factor is below 1e-40
        top = min(L, (mp.mpf(92) / tau) ** (1 / alpha))

        def f(ell):
            s = X * (mp.sinc((n - ell) * X) + mp.sinc((n + ell) * X))
            return mp.exp(-tau * ell**alpha) * s

        m = max(2, int(mp.ceil(top * X / mp.pi)))
        pts = mp.linspace(0, top, m + 1)
        return mp.quad(f, pts)


def psi_double_integral(l, tau, alpha, zeta, delta, z_t0=0.0, x_bound=30.0, ell_upper=30.0):
    """int_{-X}^{X} psi(l, x) int_0^L Re[e^{-i ell x} phi_Z^tau(ell)] dell dx."""
    with mp.workdps(DPS):
        l, zeta, dl, z0 = _mpf(l), _mpf(zeta), _mpf(delta), _mpf(z_t0)
        # (phi_Z^delta(1) - 1) / log phi_Z(1) is real: 1 - e^{-delta}
        beta = l * zeta * (-mp.expm1(-dl)) / dl
        nmax = int(abs(beta) + 12 * abs(beta) ** (mp.mpf(1) / 3) + 40)
        key = (float(tau), float(alpha), float(x_bound), float(ell_upper))
        acc = mp.besselj(0, beta) * _bessel_moment(0, *key)
        for n in range(1, nmax + 1):
            jn = mp.besselj(n, beta)
            # past n = |beta|, J_n decays faster than geometrically and
            # |I_n| <= 2 L X, so the remaining tail is negligible
            if n > abs(beta) and abs(jn) < mp.mpf(10) ** (-24):
                break
            acc += 2 * (1j) ** n * jn * mp.cos(n * z0) * _bessel_moment(n, *key)
        return mp.expj(l * zeta) * acc


def conditional_cf(l, *, a, b, c, d, kappa, delta, alpha, zeta, spot_I2, r, tau,
                   z_t0=0.0, x_bound=30.0, ell_upper=30.0):
    """Reference value of the computable conditional characteristic function."""
    with mp.workdps(DPS):
        l = _mpf(l)
        xi1 = mean_jump_rate(a, b, c)
        iH = integral_H(tau, d, kappa, delta)
        J = _mpf(spot_I2) - xi1 * iH + _mpf(r)
        lev = integral_log_phiX(l, tau, a, b, c, d, kappa, delta)
        dbl = psi_double_integral(l, tau, alpha, zeta, delta, z_t0, x_bound, ell_upper)
        return mp.exp(1j * l * J + lev) * dbl / mp.pi
