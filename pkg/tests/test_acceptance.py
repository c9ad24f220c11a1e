"""Acceptance gates. Each test prints one PASS/FAIL line and asserts the gate.

The full module takes roughly 45 minutes on one core, dominated by the
backend agreement study and the desk-scale dataset generation.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest

from roughvix.activity import HighFreqSeries, estimate_beta, simulate_stable_path
from roughvix.calibrate import (
    CalibrationProblem,
    GAConfig,
    MarketQuote,
    SeriesPoint,
    analytic_series_pricer,
    calibrate,
    load_series_quotes,
    timeseries_eval,
)
from roughvix.charfn import conditional_cf
from roughvix.dataset_gen import DEFAULT_STRIKES, ParameterBox, generate_dataset, lhs_sample, row_to_params
from roughvix.errors import NumericalIntegrityError
from roughvix.fixtures import CONVEX_DEFECTS, FILTER_STRIKES, MONO_DEFECTS, PARITY_DEFECT, data_path, filter_panel
from roughvix.kernels import KernelParams, kernel_H_delta, kernel_h
from roughvix.levy_special import erfc_complex, upper_gamma_3half
from roughvix.market_data import apply_filters, parity_bounds_check
from roughvix.params import STANDARD_MATURITIES, REFERENCE_PARAMS
from roughvix.pricer import default_market_state, price_grid
from roughvix.surrogate import TrainConfig, evaluate, fit, split_dataset
from roughvix.validation import backend_agreement
from test_cli import commands
from test_surrogate import flat_grad_check

MATURITIES = STANDARD_MATURITIES


def test_c01_backend_agreement(acceptance_report):
    t0 = time.perf_counter()
    res = backend_agreement(10_000, seed=1)
    elapsed = time.perf_counter() - t0
    ok = res["mean_abs_diff"] <= 1e-5 and res["fraction_out"] <= 1e-3 and elapsed <= 1800
    acceptance_report(1, ok, f"n={res['n']} mean|d|={res['mean_abs_diff']:.3g} max|d|={res['max_abs_diff']:.3g} "
                             f"out={res['out_of_tolerance']} ({100 * res['fraction_out']:.3f}%) time={elapsed:.0f}s")
    assert ok


def test_c02_cf_normalisation(acceptance_report):
    ms = default_market_state()
    worst = 0.0
    for k, row in enumerate(lhs_sample(100, ParameterBox(), seed=2)):
        p = row_to_params(row)
        days = MATURITIES[k % 4]
        phi0 = conditional_cf(0.0, p.subordinator(), p.kernel(), p.stable(), ms, ms.t0 + days / 365, p.remainder(days))
        worst = max(worst, abs(phi0 - 1))
    ok = worst <= 5e-3
    acceptance_report(2, ok, f"max |Phi(0)-1| over 100 draws = {worst:.3g}")
    assert ok


def _brute_average(x, kp):
    bp = kp.breakpoint
    f = lambda u: float(kernel_h(float(x + u), kp)) if x + u > 0 else 0.0
    pts = [0.0] + ([bp - x] if 0 < bp - x < kp.delta else []) + [kp.delta]
    with mp.workdps(20):
        return float(mp.quad(f, pts)) / kp.delta


def test_c03_kernel_average(acceptance_report):
    kp = KernelParams(0.6, 1.0)
    bp, dl = kp.breakpoint, kp.delta
    xs = np.linspace(0.0, 3 * bp, 200)
    branches = [np.sum(xs + dl <= bp), np.sum((xs < bp) & (xs + dl > bp)), np.sum(xs >= bp)]
    err = max(abs(kernel_H_delta(x, kp) - _brute_average(x, kp)) for x in xs)
    jumps = max(abs(kernel_H_delta(b * (1 + 1e-13), kp) - kernel_H_delta(b * (1 - 1e-13), kp)) for b in (bp - dl, bp))
    ok = err <= 1e-7 and jumps <= 1e-9 and min(branches) >= 10
    acceptance_report(3, ok, f"max err={err:.3g} branch jump={jumps:.3g} points per branch={branches}")
    assert ok


def test_c04_pricing_sanity(acceptance_report):
    K = np.asarray(DEFAULT_STRIKES)
    bad = []
    for k, row in enumerate(lhs_sample(100, ParameterBox(), seed=4)):
        p = row_to_params(row)
        days = MATURITIES[k % 4]
        try:
            P = price_grid(p, [days], K)[0]
        except NumericalIntegrityError as exc:
            bad.append((k, str(exc)))
            continue
        chord = P[:-2] + (P[2:] - P[:-2]) * (K[1:-1] - K[:-2]) / (K[2:] - K[:-2])
        if (np.any(P < -1e-4) or np.any(P > K + 1e-4) or np.any(np.diff(P) < -1e-6)
                or np.any(P[1:-1] > chord + 1e-6)):
            bad.append((k, "shape"))
    ok = not bad
    acceptance_report(4, ok, f"{100 - len(bad)}/100 strips bounded, monotone and convex; failures={bad[:3]}")
    assert ok


def test_c05_special_functions(acceptance_report):
    Ks = np.linspace(0.09, 0.28, 20)
    ls = np.logspace(-8, 4, 25)
    worst_g = worst_e = 0.0
    with mp.workdps(50):
        for K in Ks:
            for l in ls:
                z = complex(0.0, K * K * l)
                ref_g = complex(mp.gammainc(mp.mpf(3) / 2, mp.mpc(z)))
                w = complex(mp.sqrt(mp.mpc(z)))
                ref_e = complex(mp.erfc(mp.mpc(w)))
                worst_g = max(worst_g, abs(upper_gamma_3half(z) - ref_g) / max(1.0, abs(ref_g)))
                worst_e = max(worst_e, abs(erfc_complex(w) - ref_e) / max(1.0, abs(ref_e)))
    ok = max(worst_g, worst_e) <= 1e-10
    acceptance_report(5, ok, f"500 points: Gamma(3/2,.) err={worst_g:.3g} erfc err={worst_e:.3g}")
    assert ok


def test_c06_activity_estimator(acceptance_report):
    def median_beta(alpha):
        est = [estimate_beta(HighFreqSeries.regular(simulate_stable_path(50_000, alpha, 0.01, seed)))[0]
               for seed in range(50)]
        return float(np.median(est))

    stable, brownian = median_beta(1.7), median_beta(2.0)
    ok = 1.55 <= stable <= 1.85 and 1.85 <= brownian <= 1.95
    acceptance_report(6, ok, f"median beta: 1.7-stable={stable:.3f} (gate [1.55,1.85]) "
                             f"brownian={brownian:.3f} (gate [1.85,1.95])")
    assert ok


@pytest.fixture(scope="module")
def desk_surrogate():
    t0 = time.perf_counter()
    ds = generate_dataset(lhs_sample(200, ParameterBox(), seed=42))
    gen_time = time.perf_counter() - t0
    cfg = TrainConfig()
    tr, va, te = split_dataset(ds.rows, cfg.fractions, cfg.seed)
    model = fit(tr, va, cfg)
    total = time.perf_counter() - t0
    return model, evaluate(model, te), gen_time, total, len(ds)


def test_c07_surrogate_quality(desk_surrogate, acceptance_report):
    model, test, gen_time, total, rows = desk_surrogate
    grad = max(flat_grad_check(loss) for loss in ("mse", "inv_premium", "log_target"))
    ok = test["abs_rmse"] <= 5e-3 and total <= 1800 and grad <= 1e-5 and rows == 16_000
    acceptance_report(7, ok, f"rows={rows} test abs-RMSE={test['abs_rmse']:.3g} epochs={model.meta['epochs_run']} "
                             f"time={total:.0f}s (generation {gen_time:.0f}s) grad-check rel err={grad:.2g}")
    assert ok


def test_c08_calibration_round_trip(desk_surrogate, acceptance_report):
    model, test, *_ = desk_surrogate
    prices = price_grid(REFERENCE_PARAMS, MATURITIES, DEFAULT_STRIKES)
    quotes = [MarketQuote(d, K, float(prices[i, j])) for i, d in enumerate(MATURITIES)
              for j, K in enumerate(DEFAULT_STRIKES)]
    prob = CalibrationProblem(quotes, model=model)
    at_truth = math.sqrt(prob.objective(prob.from_params(REFERENCE_PARAMS)) / len(quotes))
    res = calibrate(prob, GAConfig(pop_size=60, generations=300, seed=0))
    analytic = CalibrationProblem(quotes, pricer="analytic")
    analytic_rmse = math.sqrt(analytic.objective(res.theta) / len(quotes))
    gate = 2 * test["abs_rmse"]
    ok = res.rmse <= gate
    acceptance_report(8, ok, f"fitted RMSE={res.rmse:.3g} gate={gate:.3g} (surrogate RMSE at true params="
                             f"{at_truth:.3g}; analytic RMSE at fitted params={analytic_rmse:.3g})")
    assert ok


def test_c09_filters(acceptance_report):
    panel = filter_panel()
    rep = apply_filters(panel, ("mono", "convex"))
    got = {(q.maturity_days, q.strike, why) for q, why in rep.dropped}
    want = {(d, FILTER_STRIKES[i], "monotonicity") for d, i in MONO_DEFECTS}
    want |= {(d, FILTER_STRIKES[i], "convexity") for d, i in CONVEX_DEFECTS}
    parity = parity_bounds_check(panel, panel)
    flagged = [(q.maturity_days, q.strike) for q, _ in parity.dropped]
    d, i = PARITY_DEFECT
    ok = got == want and len(rep.kept) == 91 and flagged == [(d, FILTER_STRIKES[i])]
    acceptance_report(9, ok, f"drops={rep.counts} kept={len(rep.kept)} parity flagged={flagged}")
    assert ok


def test_c10_lhs_stratification(acceptance_report):
    box = ParameterBox()
    failures = []
    for n in (2, 10, 100, 5000):
        x = lhs_sample(n, box, seed=n)
        for j, dim in enumerate(box.dims):
            if dim.fixed:
                continue
            idx = np.floor((x[:, j] - dim.lower) / (dim.upper - dim.lower) * n).astype(int)
            if sorted(idx.tolist()) != list(range(n)):
                failures.append((n, dim.name))
    ok = not failures
    acceptance_report(10, ok, f"n in (2, 10, 100, 5000), failures={failures}")
    assert ok


def test_c11_cli_determinism(tmp_path, acceptance_report):
    from roughvix.cli import dispatch

    model = tmp_path / "model.json"
    assert dispatch(["train", "--data", str(data_path("train_small.cols")), "--seed", "7",
                     "--max-epochs", "3", "--out", str(model)]) == 0
    differing = []
    names = None
    for rep in ("one", "two"):
        d = tmp_path / rep
        d.mkdir()
        cmds = commands(d, model)
        names = list(cmds)
        for name, (argv, outputs) in cmds.items():
            assert dispatch([str(a) for a in argv]) == 0, name
    for name in names:
        for o in commands(tmp_path / "one", model)[name][1]:
            if (tmp_path / "one" / o).read_bytes() != (tmp_path / "two" / o).read_bytes():
                differing.append(o)
    ok = not differing
    acceptance_report(11, ok, f"{len(names)} subcommands run twice, differing outputs={differing}")
    assert ok


def test_c12_timeseries_analytic_cases(acceptance_report):
    pricer = analytic_series_pricer()
    series = load_series_quotes(data_path("put_series.csv"))
    strike = 0.17
    model = [pricer(REFERENCE_PARAMS, p.days_to_expiry, strike, p.spot) for p in series]
    # each date has its own days-to-expiry, so it keys the cached prices
    lookup = {p.days_to_expiry: m for p, m in zip(series, model)}
    cached = lambda params, days, K, spot: lookup[days]
    exact = [SeriesPoint(p.date, p.days_to_expiry, p.spot, m) for p, m in zip(series, model)]
    shifted = [SeriesPoint(p.date, p.days_to_expiry, p.spot, m - 0.01) for p, m in zip(series, model)]
    zero = timeseries_eval(REFERENCE_PARAMS, strike, exact, cached)
    bias = timeseries_eval(REFERENCE_PARAMS, strike, shifted, cached)
    mape_ok = zero["mape"] == 0.0 or (math.isnan(zero["mape"]) and zero["mape_excluded"] == zero["n"])
    ok = (zero["mae"] == zero["rmse"] == 0.0 and mape_ok
          and abs(bias["mae"] - 0.01) <= 1e-12 and abs(bias["rmse"] - 0.01) <= 1e-12)
    acceptance_report(12, ok, f"zero case (MAE, RMSE, MAPE)=({zero['mae']}, {zero['rmse']}, {zero['mape']}) "
                              f"bias case MAE={bias['mae']:.12f} RMSE={bias['rmse']:.12f}")
    assert ok
