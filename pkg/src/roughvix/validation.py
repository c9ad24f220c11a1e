"""Fast-versus-oracle agreement study for the characteristic function."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .charfn import QuadratureConfig, conditional_cf
from .dataset_gen import ParameterBox, lhs_sample, row_to_params
from .params import STANDARD_MATURITIES
from .pricer import default_market_state

TOLERANCE = 1e-5
L_RANGE = (1e-2, 1e3)


def backend_agreement(n: int = 10_000, seed: int = 0, qc: QuadratureConfig = QuadratureConfig(),
                      per_theta: int = 10, maturities=STANDARD_MATURITIES, tol: float = TOLERANCE) -> dict:
    """Compare Phi_fast and Phi_oracle at ``n`` (theta, T, l) points.

    Parameter vectors come from a Latin hypercube on the default box; each
    is paired with one listed maturity (cycled) and ``per_theta``
    frequencies drawn log-uniformly from ``L_RANGE``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    n_theta = math.ceil(n / per_theta)
    thetas = lhs_sample(n_theta, ParameterBox(), seed)
    rng = np.random.default_rng(seed)
    fast_qc = replace(qc, backend="fast")
    oracle_qc = replace(qc, backend="oracle")
    ms = default_market_state()
    rows, diffs = [], []
    done = 0
    for k, row in enumerate(thetas):
        m = min(per_theta, n - done)
        p = row_to_params(row)
        days = maturities[k % len(maturities)]
        t = ms.t0 + days / 365.0
        ls = np.exp(rng.uniform(math.log(L_RANGE[0]), math.log(L_RANGE[1]), m))
        args = (p.subordinator(), p.kernel(), p.stable(), ms, t, p.remainder(days))
        fast = conditional_cf(ls, *args, fast_qc)
        ref = conditional_cf(ls, *args, oracle_qc)
        d = np.abs(fast - ref)
        diffs.extend(d.tolist())
        rows.extend((p.a, p.b, p.d, p.kappa, p.remainder(days), days, l, e) for l, e in zip(ls, d))
        done += m
    diffs = np.array(diffs)
    return {
        "n": int(len(diffs)),
        "max_abs_diff": float(diffs.max()),
        "mean_abs_diff": float(diffs.mean()),
        "tolerance": tol,
        "out_of_tolerance": int(np.sum(diffs > tol)),
        "fraction_out": float(np.mean(diffs > tol)),
        "rows": rows,
    }
