import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roughvix import oracle
from roughvix.errors import DomainError
from roughvix.levy_special import (
    GAMMA_3HALF,
    StableParams,
    SubordinatorParams,
    char_exponent_X,
    char_fn_Z,
    erfc_complex,
    gamma_neg,
    lower_gamma_3half,
    mean_jump_rate,
    upper_gamma_3half,
)

T6 = SubordinatorParams(0.049762, 0.849782, 0.8575)

# 50-digit reference values
EXP_AT_1 = complex(-0.02287038039096026065, 0.32537463862955458696)
XI1 = 0.3343704871190313179
G32_1P1I = complex(0.39650885444141132671, -0.37132408524020273157)
ERFC_HALF = complex(0.35738708514517947168, -0.45788139443519221584)

sub_params = st.builds(
    SubordinatorParams,
    a=st.floats(1e-4, 5.0),
    b=st.floats(1e-4, 5.0),
    c=st.floats(0.05, 0.95),
)
freqs = st.floats(-1e4, 1e4, allow_nan=False)


def test_char_exponent_zero():
    assert char_exponent_X(0.0, T6) == 0


def test_char_exponent_reference_value():
    assert abs(char_exponent_X(1.0, T6) - EXP_AT_1) <= 1e-14


def test_char_exponent_matches_mp_backend_on_grid():
    for l in (1e-6, 0.3, 7.0, 150.0, 9000.0):
        ref = complex(oracle.char_exponent_X(l, T6.a, T6.b, T6.c))
        assert abs(char_exponent_X(l, T6) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_char_exponent_vectorises():
    ls = np.array([-3.0, 0.0, 2.5])
    out = char_exponent_X(ls, T6)
    assert out.shape == (3,)
    assert out[1] == 0
    assert out[0] == pytest.approx(np.conj(char_exponent_X(3.0, T6)))


def test_char_exponent_rejects_bad_params():
    with pytest.raises(DomainError):
        char_exponent_X(1.0, SubordinatorParams(0.0, 1.0, 0.5))
    with pytest.raises(DomainError):
        char_exponent_X(1.0, SubordinatorParams(1.0, 1.0, 1.0))


def test_zero_intensity_probe_without_validation():
    p = SubordinatorParams(0.0, 1.0, 0.5)
    assert char_exponent_X(4.0, p, check=False) == 0
    assert mean_jump_rate(p, check=False) == 0


def test_mean_jump_rate_reference_value():
    assert mean_jump_rate(T6) == pytest.approx(XI1, rel=1e-14)


def test_mean_jump_rate_is_slope_of_exponent():
    h = 1e-6
    slope = (char_exponent_X(h, T6) - char_exponent_X(-h, T6)) / (2j * h)
    assert slope.real == pytest.approx(mean_jump_rate(T6), rel=1e-8)


def test_gamma_neg_reflection():
    for c in (0.01, 0.5, 0.8575, 0.99):
        assert gamma_neg(c) == pytest.approx(float(mp.gamma(-c)), rel=1e-13)


@given(sub_params, freqs)
def test_exponent_real_part_non_positive(p, l):
    assert char_exponent_X(l, p).real <= 1e-12


@given(sub_params, freqs)
def test_exponent_conjugate_symmetry(p, l):
    assert char_exponent_X(-l, p) == pytest.approx(np.conj(char_exponent_X(l, p)), rel=1e-12, abs=1e-15)


@given(sub_params, freqs)
def test_cf_modulus_bounded(p, l):
    assert abs(np.exp(char_exponent_X(l, p))) <= 1 + 1e-12


def test_char_fn_Z_examples():
    assert char_fn_Z(0.0, 1.715) == 1
    for alpha in (1.1, 1.5, 1.715, 1.78, 1.99):
        assert char_fn_Z(1.0, alpha) == pytest.approx(math.exp(-1), rel=1e-15)
    assert char_fn_Z(-2.0, 1.715) == char_fn_Z(2.0, 1.715)


def test_char_fn_Z_rejects_alpha_outside_open_interval():
    for alpha in (1.0, 2.0, 0.5):
        with pytest.raises(DomainError):
            char_fn_Z(1.0, alpha)


def test_stable_params_accept_both_alpha_values():
    StableParams(1.715).validate()
    StableParams(1.78).validate()
    with pytest.raises(DomainError):
        StableParams(1.7, -0.1).validate()


def test_upper_gamma_examples():
    assert upper_gamma_3half(0) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    assert upper_gamma_3half(1 + 1j) == pytest.approx(G32_1P1I, rel=1e-12)
    mags = [abs(upper_gamma_3half(x)) for x in (10.0, 50.0, 200.0, 700.0)]
    assert all(m2 < m1 for m1, m2 in zip(mags, mags[1:]))
    assert mags[-1] < 1e-290


def test_upper_gamma_overflow_is_signalled():
    with pytest.raises(OverflowError):
        upper_gamma_3half(-800.0 + 1j)
    with pytest.raises(OverflowError):
        upper_gamma_3half(complex(math.inf, 0))


def test_upper_gamma_limit_along_rays():
    for k in range(8):
        ray = cmath.exp(1j * (-math.pi + 0.01 + k * (2 * math.pi - 0.02) / 7))
        vals = [upper_gamma_3half(r * ray) for r in (1e-4, 1e-8, 1e-12)]
        errs = [abs(v - GAMMA_3HALF) for v in vals]
        assert errs[-1] < 1e-16 + 1e-15
        assert errs[0] > errs[-1]


def test_upper_gamma_against_mp_backend():
    rng = np.random.default_rng(3)
    zs = rng.uniform(-20, 20, 40) + 1j * rng.uniform(-50, 50, 40)
    for z in zs:
        ref = complex(oracle.upper_gamma_3half(z))
        assert abs(upper_gamma_3half(z) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_lower_gamma_complements_upper():
    for z in (1e-3 + 2e-3j, 0.5 - 0.5j, 3 + 4j, 40j):
        assert lower_gamma_3half(z) + upper_gamma_3half(z) == pytest.approx(GAMMA_3HALF, abs=1e-13)
    small = 1e-6 + 1e-6j
    ref = complex(mp.gammainc(1.5, 0, small))
    assert lower_gamma_3half(small) == pytest.approx(ref, rel=1e-12)


def test_erfc_examples():
    assert erfc_complex(0) == 1
    assert erfc_complex(0.5 + 0.5j) == pytest.approx(ERFC_HALF, rel=1e-13)
    for x in (0.1, 1.0, 3.7):
        assert erfc_complex(-x) == pytest.approx(2 - erfc_complex(x), abs=1e-15)


@given(st.floats(-6, 6), st.floats(-6, 6))
def test_erfc_reflection(x, y):
    z = complex(x, y)
    assert abs(erfc_complex(z) + erfc_complex(-z) - 2) <= 1e-12 * max(1.0, abs(erfc_complex(z)))


def test_erfc_against_mp_backend_on_disc():
    rng = np.random.default_rng(5)
    r = 30 * np.sqrt(rng.uniform(0, 1, 60))
    th = rng.uniform(-math.pi / 4, math.pi / 4, 60)
    for z in r * np.exp(1j * th):
        ref = complex(oracle.erfc(z))
        assert abs(erfc_complex(z) - ref) <= 1e-12 * max(1.0, abs(ref))
