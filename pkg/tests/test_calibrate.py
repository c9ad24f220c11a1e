import json

import numpy as np
import pytest

from roughvix.calibrate import (
    BoxObjective,
    CalibrationProblem,
    GAConfig,
    MarketQuote,
    RefineConfig,
    SeriesPoint,
    calibrate,
    default_bounds,
    fd_gradient,
    ga_search,
    load_series_quotes,
    local_refine,
    objective,
    objective_details,
    timeseries_eval,
)
from roughvix.errors import DataError, DomainError, NumericalIntegrityError
from roughvix.fixtures import data_path
from roughvix.params import STANDARD_MATURITIES, REFERENCE_PARAMS, nearest_maturity_index
from roughvix.surrogate import MlpSpec, ScalerStats, SurrogateModel, init_params

STRIKES = (0.15, 0.2, 0.25)


@pytest.fixture(scope="module")
def toy_model():
    # A smooth random network stands in for a trained surrogate.
    spec = MlpSpec()
    scaler = ScalerStats((0.5, 0.5, 0.8575, 0.75, 5.0, 0.0, 0.3, 0.2), (0.3, 0.3, 1.0, 0.1, 3.0, 0.1, 0.2, 0.05), 0.05, 0.02)
    return SurrogateModel(spec, init_params(spec, np.random.default_rng(1)), scaler)


def synthetic_problem(model, theta_star, strikes=STRIKES, days=STANDARD_MATURITIES):
    blank = [MarketQuote(d, k, 0.0) for d in days for k in strikes]
    prices = CalibrationProblem(blank, model=model).model_prices(theta_star)
    quotes = [MarketQuote(q.maturity_days, q.strike, float(p)) for q, p in zip(blank, prices)]
    return CalibrationProblem(quotes, model=model)


def reference_theta():
    return np.array([REFERENCE_PARAMS.a, REFERENCE_PARAMS.b, REFERENCE_PARAMS.d, REFERENCE_PARAMS.kappa, *REFERENCE_PARAMS.r])


def test_objective_self_consistency_surrogate(toy_model):
    prob = synthetic_problem(toy_model, reference_theta())
    assert objective(reference_theta(), prob) <= 1e-12
    lo, hi = prob.lower, prob.upper
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert objective(lo + rng.random(len(lo)) * (hi - lo), prob) >= 0


def test_objective_self_consistency_analytic():
    theta = reference_theta()
    blank = [MarketQuote(20, 0.17, 0.0), MarketQuote(20, 0.22, 0.0)]
    prices = CalibrationProblem(blank, pricer="analytic").model_prices(theta)
    quotes = [MarketQuote(20, q.strike, float(p)) for q, p in zip(blank, prices)]
    assert objective(theta, CalibrationProblem(quotes, pricer="analytic")) <= 1e-12


def test_r_perturbation_is_local(toy_model):
    prob = synthetic_problem(toy_model, reference_theta())
    base = prob.residuals(reference_theta())
    for n, days in enumerate(STANDARD_MATURITIES):
        theta = reference_theta()
        theta[4 + n] += 0.01
        changed = prob.residuals(theta) != base
        assert np.array_equal(changed, prob.days == days)
        assert changed.any()


@pytest.mark.parametrize("days,idx", [(1, 0), (20, 0), (34, 0), (35, 1), (74, 1), (75, 2), (179, 2), (180, 3), (900, 3)])
def test_nearest_maturity_ties_go_short(days, idx):
    assert nearest_maturity_index(days) == idx


def test_problem_validation(toy_model):
    q = [MarketQuote(20, 0.2, 0.05)]
    with pytest.raises(DataError):
        CalibrationProblem([], model=toy_model)
    with pytest.raises(DomainError):
        CalibrationProblem(q)
    with pytest.raises(DomainError):
        CalibrationProblem(q, pricer="bogus", model=toy_model)
    lo, hi = default_bounds()
    with pytest.raises(DomainError):
        CalibrationProblem(q, model=toy_model, lower=hi, upper=lo)
    prob = CalibrationProblem(q, model=toy_model)
    with pytest.raises(DomainError):
        objective(hi + 1, prob)
    with pytest.raises(DomainError):
        objective(hi[:3], prob)


def test_pricing_failure_gives_infinite_objective(toy_model, monkeypatch):
    prob = CalibrationProblem([MarketQuote(20, 0.2, 0.05)], model=toy_model)

    def boom(theta):
        raise NumericalIntegrityError("outer integral did not settle")

    monkeypatch.setattr(prob, "model_prices", boom)
    val, ok, msg = objective_details(reference_theta(), prob)
    assert val == np.inf and not ok and "settle" in msg


def test_params_round_trip(toy_model):
    prob = CalibrationProblem([MarketQuote(20, 0.2, 0.05)], model=toy_model)
    p = prob.to_params(reference_theta())
    assert np.array_equal(prob.from_params(p), reference_theta())
    assert p.c == REFERENCE_PARAMS.c and p.alpha == 1.715


def test_ga_sphere_probe():
    box = BoxObjective(lambda x: float((x[0] - 0.3) ** 2), np.array([-1.0]), np.array([1.0]))
    res = ga_search(box, GAConfig(pop_size=50, generations=100, seed=2))
    assert abs(res.theta[0] - 0.3) <= 1e-3


def test_ga_monotone_trace_and_duality():
    box = BoxObjective(lambda x: float(np.sum((x - 0.1) ** 2) + np.sin(5 * x[0]) ** 2), -np.ones(3), np.ones(3))
    res = ga_search(box, GAConfig(pop_size=20, generations=40, seed=5))
    assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.fitness == -box.objective(res.theta)
    assert np.all(res.population >= box.lower) and np.all(res.population <= box.upper)


def test_ga_deterministic():
    box = BoxObjective(lambda x: float(np.sum(x**2)), -np.ones(2), np.ones(2))
    a = ga_search(box, GAConfig(pop_size=10, generations=15, seed=9))
    b = ga_search(box, GAConfig(pop_size=10, generations=15, seed=9))
    assert np.array_equal(a.population, b.population)


def test_ga_fixed_coordinate_stays_put():
    lo, hi = np.array([-1.0, 0.4]), np.array([1.0, 0.4])
    res = ga_search(BoxObjective(lambda x: float(np.sum(x**2)), lo, hi), GAConfig(pop_size=10, generations=10))
    assert np.all(res.population[:, 1] == 0.4)


def test_ga_config_validation():
    for bad in (dict(pop_size=1), dict(generations=0), dict(elitism=60)):
        with pytest.raises(DomainError):
            GAConfig(**bad)
    assert GAConfig.full_scale().pop_size == 600


def test_refine_rosenbrock():
    rosen = lambda x: float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)
    res = local_refine([-1.2, 1.0], BoxObjective(rosen, -2 * np.ones(2), 2 * np.ones(2)))
    assert res.value <= 1e-6
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


def test_refine_bowl_at_optimum_returns_start():
    x0 = np.array([0.2, -0.3])
    res = local_refine(x0, BoxObjective(lambda x: float(np.sum((x - x0) ** 2)), -np.ones(2), np.ones(2)))
    assert np.array_equal(res.theta, x0) and res.value == 0


def test_refine_stays_in_bounds():
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(np.sum((x - 3.0) ** 2))

    lo, hi = np.zeros(2), np.ones(2)
    res = local_refine([0.5, 0.5], BoxObjective(f, lo, hi))
    assert np.allclose(res.theta, 1.0)
    assert all(np.all(x >= lo) and np.all(x <= hi) for x in seen)


def test_fd_gradient_near_bound():
    f = lambda x: float(x[0] ** 3 + 2 * x[1])
    g = fd_gradient(f, np.array([1.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert g[0] == pytest.approx(3.0, rel=1e-5) and g[1] == pytest.approx(2.0, rel=1e-8)


def test_calibrate_single_quote(toy_model, tmp_path):
    prob = CalibrationProblem([MarketQuote(48, 0.2, 0.04)], model=toy_model)
    res = calibrate(prob, GAConfig(pop_size=12, generations=8, seed=1), RefineConfig(maxiter=30))
    assert np.all(res.theta >= prob.lower) and np.all(res.theta <= prob.upper)
    assert res.value <= -res.ga_trace[-1]
    assert res.value == pytest.approx(res.rmse**2, rel=1e-9, abs=1e-15)
    res.save(tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert set(doc) >= {"theta", "vector", "objective", "ga_trace", "refine_trace", "residuals"}
    assert doc["vector"]["r2"] == res.theta[5]


def test_calibrate_recovers_synthetic_prices(toy_model):
    prob = synthetic_problem(toy_model, reference_theta())
    res = calibrate(prob, GAConfig(pop_size=30, generations=40, seed=0))
    start = -res.ga_trace[-1]
    assert res.value <= start
    assert res.rmse < 5e-3


def test_timeseries_zero_and_bias():
    series = [SeriesPoint(f"2025-02-{i + 1:02d}", 30 - i, 0.18, 0.005 + 0.01 * i) for i in range(8)]
    mids = {pt.days_to_expiry: pt.mid for pt in series}
    zero = timeseries_eval(REFERENCE_PARAMS, 0.2, series, price_fn=lambda p, d, k, s: mids[d])
    assert (zero["mae"], zero["rmse"], zero["mape"]) == (0.0, 0.0, 0.0)
    bias = timeseries_eval(REFERENCE_PARAMS, 0.2, series, price_fn=lambda p, d, k, s: mids[d] + 0.01)
    assert bias["mae"] == pytest.approx(0.01, abs=1e-15)
    assert bias["rmse"] == pytest.approx(0.01, abs=1e-15)
    assert bias["mape_excluded"] == 1 and bias["n"] == 8


def test_timeseries_failures_counted():
    series = [SeriesPoint("d1", 20, 0.18, 0.05), SeriesPoint("d2", 19, 0.18, 0.05)]

    def fn(p, d, k, s):
        if d == 19:
            raise NumericalIntegrityError("no")
        return 0.05

    out = timeseries_eval(REFERENCE_PARAMS, 0.2, series, price_fn=fn)
    assert out["failed"] == 1 and out["n"] == 1
    with pytest.raises(DataError):
        timeseries_eval(REFERENCE_PARAMS, 0.2, [])


def test_series_loader(tmp_path):
    pts = load_series_quotes(data_path("put_series.csv"))
    assert pts and all(p.mid >= 0 for p in pts)
    bad = tmp_path / "s.csv"
    bad.write_text("date,days_to_expiry,spot\n")
    with pytest.raises(DataError):
        load_series_quotes(bad)
    bad.write_text("date,days_to_expiry,spot,mid\nx,abc,0.1,0.2\n")
    with pytest.raises(DataError):
        load_series_quotes(bad)
