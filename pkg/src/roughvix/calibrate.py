"""Two-stage calibration (genetic search, then bounded quasi-Newton) and
out-of-sample evaluation of a fixed parameter vector.

The calibrated vector is theta = (a, b, d, kappa, r_1, ..., r_m), one
remainder per listed maturity; c, alpha and zeta are held fixed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .charfn import MarketState, QuadratureConfig
from .errors import DataError, DomainError, NumericalIntegrityError
from .params import FIXED_C, STANDARD_MATURITIES, ModelParams, nearest_maturity_index
from .pricer import default_market_state, price_grid
from .surrogate import SurrogateModel, predict

THETA_CORE = ("a", "b", "d", "kappa")
TICK = 0.01


def theta_names(n_maturities: int = len(STANDARD_MATURITIES)) -> tuple[str, ...]:
    return THETA_CORE + tuple(f"r{i + 1}" for i in range(n_maturities))


def default_bounds(n_maturities: int = len(STANDARD_MATURITIES)):
    lower = [1e-4, 1e-4, 0.5 + 1e-9, 1e-4] + [-0.25] * n_maturities
    upper = [5.0, 5.0, 0.999, 10.0] + [0.25] * n_maturities
    return np.array(lower), np.array(upper)


@dataclass(frozen=True)
class MarketQuote:
    maturity_days: int
    strike: float
    mid: float


@dataclass
class BoxObjective:
    """A plain function on a box, for running the optimizers outside calibration."""

    fn: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray

    def objective(self, theta) -> float:
        return float(self.fn(np.asarray(theta, dtype=float)))


@dataclass
class CalibrationProblem:
    """Quotes, bounds, fixed constants and the pricing route.

    ``pricer`` is ``"surrogate"`` (requires ``model``) or ``"analytic"``.
    """

    quotes: list[MarketQuote]
    pricer: str = "surrogate"
    model: SurrogateModel | None = None
    maturities: tuple[int, ...] = STANDARD_MATURITIES
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    c: float = FIXED_C
    alpha: float = 1.715
    zeta: float = 0.01
    qc: QuadratureConfig = field(default_factory=QuadratureConfig)
    ms: MarketState = field(default_factory=default_market_state)

    def __post_init__(self):
        if not self.quotes:
            raise DataError("calibration needs at least one quote")
        if self.pricer not in ("surrogate", "analytic"):
            raise DomainError("pricer must be 'surrogate' or 'analytic'")
        if self.pricer == "surrogate" and self.model is None:
            raise DomainError("the surrogate pricer needs a model")
        lo, hi = default_bounds(len(self.maturities))
        self.lower = lo if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = hi if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.lower.shape != lo.shape or self.upper.shape != lo.shape or np.any(self.lower > self.upper):
            raise DomainError("bounds must match theta and satisfy lower <= upper")
        self.r_index = np.array([nearest_maturity_index(q.maturity_days, self.maturities) for q in self.quotes])
        self.days = np.array([q.maturity_days for q in self.quotes], dtype=float)
        self.strikes = np.array([q.strike for q in self.quotes], dtype=float)
        self.mids = np.array([q.mid for q in self.quotes], dtype=float)

    @property
    def names(self):
        return theta_names(len(self.maturities))

    def to_params(self, theta) -> ModelParams:
        t = [float(v) for v in theta]
        return ModelParams(a=t[0], b=t[1], d=t[2], kappa=t[3], r=tuple(t[4:]), c=self.c,
                           alpha=self.alpha, zeta=self.zeta, maturities=tuple(self.maturities))

    def from_params(self, p: ModelParams) -> np.ndarray:
        r = p.r if isinstance(p.r, tuple) else (p.r,) * len(self.maturities)
        return np.array([p.a, p.b, p.d, p.kappa, *r], dtype=float)

    def model_prices(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.pricer == "surrogate":
            n = len(self.quotes)
            X = np.empty((n, 8))
            X[:, 0], X[:, 1], X[:, 2], X[:, 3], X[:, 4] = theta[0], theta[1], self.c, theta[2], theta[3]
            X[:, 5] = theta[4 + self.r_index]
            X[:, 6] = self.days / 365.0
            X[:, 7] = self.strikes
            return predict(self.model, X)
        p = self.to_params(theta)
        out = np.empty(len(self.quotes))
        for days in np.unique(self.days):
            rows = np.flatnonzero(self.days == days)
            ks = sorted(set(self.strikes[rows]))
            grid = price_grid(p, [days], ks, self.qc, self.ms)[0]
            lookup = dict(zip(ks, grid))
            out[rows] = [lookup[k] for k in self.strikes[rows]]
        return out

    def residuals(self, theta) -> np.ndarray:
        return self.mids - self.model_prices(theta)

    def check_bounds(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.lower.shape:
            raise DomainError(f"theta must have {len(self.lower)} entries")
        if np.any(theta < self.lower) or np.any(theta > self.upper):
            raise DomainError("theta lies outside the calibration bounds")

    def objective(self, theta) -> float:
        return objective(theta, self)


def objective_details(theta, problem: CalibrationProblem):
    """(value, ok, message): pricing failures give (+inf, False, reason)."""
    problem.check_bounds(theta)
    try:
        r = problem.residuals(theta)
    except (NumericalIntegrityError, DomainError) as exc:
        return math.inf, False, str(exc)
    val = float(np.dot(r, r))
    if not math.isfinite(val):
        return math.inf, False, "non-finite model price"
    return val, True, ""


def objective(theta, problem: CalibrationProblem) -> float:
    """Sum over quotes of (market mid - model price)^2."""
    return objective_details(theta, problem)[0]


# -- global stage --------------------------------------------------------------

@dataclass(frozen=True)
class GAConfig:
    pop_size: int = 60
    generations: int = 300
    tournament: int = 3
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.05  # fraction of each range
    elitism: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2 or self.generations < 1 or self.tournament < 1:
            raise DomainError("pop_size >= 2, generations >= 1 and tournament >= 1 are required")
        if not 0 <= self.elitism < self.pop_size:
            raise DomainError("elitism must lie in [0, pop_size)")

    @classmethod
    def full_scale(cls, seed: int = 0) -> "GAConfig":
        return cls(pop_size=600, generations=3000, seed=seed)


@dataclass
class GAResult:
    theta: np.ndarray
    fitness: float
    trace: list[float]
    population: np.ndarray


def _fitness(problem, genes):
    theta = problem.lower + genes * (problem.upper - problem.lower)
    return -problem.objective(np.clip(theta, problem.lower, problem.upper))


def ga_search(problem, cfg: GAConfig = GAConfig()) -> GAResult:
    """Real-coded genetic search on unit-box genes mapped onto the bounds.

    Fitness is the negated objective. Elites are copied unchanged, so the
    per-generation best fitness in ``trace`` never decreases.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.asarray(problem.lower, float), np.asarray(problem.upper, float)
    dim = len(lo)
    free = hi > lo
    pop = rng.random((cfg.pop_size, dim))
    pop[:, ~free] = 0.0
    fit = np.array([_fitness(problem, g) for g in pop])
    trace = []
    for _ in range(cfg.generations):
        order = np.argsort(-fit, kind="stable")
        trace.append(float(fit[order[0]]))
        children = [pop[i].copy() for i in order[: cfg.elitism]]
        child_fit = [fit[i] for i in order[: cfg.elitism]]
        while len(children) < cfg.pop_size:
            parents = []
            for _ in range(2):
                cand = rng.integers(0, cfg.pop_size, cfg.tournament)
                parents.append(pop[cand[np.argmax(fit[cand])]])
            a, b = parents[0].copy(), parents[1].copy()
            if rng.random() < cfg.crossover_rate:
                swap = rng.random(dim) < 0.5
                a[swap], b[swap] = b[swap], parents[0][swap]
            for g in (a, b):
                mut = (rng.random(dim) < cfg.mutation_rate) & free
                g[mut] += rng.normal(0.0, cfg.mutation_sigma, mut.sum())
                np.clip(g, 0.0, 1.0, out=g)
                if len(children) < cfg.pop_size:
                    children.append(g)
                    child_fit.append(None)
        pop = np.array(children)
        fit = np.array([f if f is not None else _fitness(problem, g) for g, f in zip(pop, child_fit)])
    best = int(np.argmax(fit))
    trace.append(float(fit[best]))
    theta = np.clip(lo + pop[best] * (hi - lo), lo, hi)
    return GAResult(theta, float(fit[best]), trace, lo + pop * (hi - lo))


# -- local stage ---------------------------------------------------------------

@dataclass(frozen=True)
class RefineConfig:
    rel_step: float = 1e-6
    maxiter: int = 500
    ftol: float = 1e-15
    gtol: float = 1e-10


@dataclass
class RefineResult:
    theta: np.ndarray
    value: float
    trace: list[float]
    converged: bool
    message: str


def fd_gradient(f, x, lower, upper, rel_step=1e-6):
    """Central differences with per-coordinate step rel_step*max(|x|, 1), kept inside the box."""
    g = np.zeros_like(x)
    for i in range(len(x)):
        h = rel_step * max(abs(x[i]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[i] = min(x[i] + h, upper[i])
        xm[i] = max(x[i] - h, lower[i])
        if xp[i] == xm[i]:
            continue
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def local_refine(theta0, problem, cfg: RefineConfig = RefineConfig()) -> RefineResult:
    """L-BFGS-B from ``theta0`` inside the problem bounds.

    Returns the best point seen, so the result is never worse than the
    start. ``trace`` holds the objective at each accepted iterate.
    """
    lo, hi = np.asarray(problem.lower, float), np.asarray(problem.upper, float)
    x0 = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    cache: dict[bytes, float] = {}
    best = [problem.objective(x0), x0.copy()]

    def f(x):
        x = np.clip(x, lo, hi)
        key = x.tobytes()
        if key not in cache:
            v = problem.objective(x)
            cache[key] = v
            if v < best[0]:
                best[0], best[1] = v, x.copy()
        return cache[key]

    trace = [best[0]]

    def fg(x):
        x = np.clip(x, lo, hi)
        val = f(x)
        if not math.isfinite(val):
            return 1e300, np.zeros_like(x)
        return val, fd_gradient(f, x, lo, hi, cfg.rel_step)

    res = minimize(
        fg, x0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
        callback=lambda xk: trace.append(f(xk)),
        options={"maxiter": cfg.maxiter, "ftol": cfg.ftol, "gtol": cfg.gtol},
    )
    msg = res.message if isinstance(res.message, str) else res.message.decode()
    return RefineResult(best[1], float(best[0]), trace, bool(res.success), msg)


# -- driver --------------------------------------------------------------------

@dataclass
class CalibrationResult:
    names: tuple[str, ...]
    theta: np.ndarray
    value: float
    ga_trace: list[float]
    refine_trace: list[float]
    residuals: list[dict]
    converged: bool
    params: ModelParams

    @property
    def rmse(self) -> float:
        r = np.array([q["residual"] for q in self.residuals])
        return float(np.sqrt(np.mean(r * r)))

    def to_dict(self) -> dict:
        return {
            "theta": self.params.to_dict(),
            "vector": dict(zip(self.names, map(float, self.theta))),
            "objective": self.value,
            "rmse": self.rmse,
            "converged": self.converged,
            "ga_trace": self.ga_trace,
            "refine_trace": self.refine_trace,
            "residuals": self.residuals,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def calibrate(problem: CalibrationProblem, ga: GAConfig = GAConfig(), refine: RefineConfig = RefineConfig()) -> CalibrationResult:
    g = ga_search(problem, ga)
    loc = local_refine(g.theta, problem, refine)
    theta = loc.theta
    model = problem.model_prices(theta)
    residuals = [
        {"maturity_days": int(q.maturity_days), "strike": q.strike, "market": q.mid,
         "model": float(m), "residual": float(q.mid - m)}
        for q, m in zip(problem.quotes, model)
    ]
    return CalibrationResult(problem.names, theta, loc.value, g.trace, loc.trace, residuals,
                             loc.converged, problem.to_params(theta))


# -- out-of-sample evaluation --------------------------------------------------

@dataclass(frozen=True)
class SeriesPoint:
    date: str
    days_to_expiry: int
    spot: float  # volatility units, e.g. 0.1793
    mid: float


def load_series_quotes(path) -> list[SeriesPoint]:
    """Read ``date,days_to_expiry,spot,mid`` rows."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ("date", "days_to_expiry", "spot", "mid")
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise DataError(f"series header must contain {', '.join(need)}", line=1)
        for row in reader:
            try:
                out.append(SeriesPoint(row["date"], int(row["days_to_expiry"]), float(row["spot"]), float(row["mid"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"bad series row: {exc}", line=reader.line_num) from None
    return out


def analytic_series_pricer(qc: QuadratureConfig = QuadratureConfig()):
    def price(params: ModelParams, days: int, strike: float, spot: float) -> float:
        return float(price_grid(params, [days], [strike], qc, MarketState(spot_I2=spot * spot))[0, 0])

    return price


def timeseries_eval(params: ModelParams, strike: float, series: Sequence[SeriesPoint],
                    price_fn=None, tick: float = TICK) -> dict:
    """MAE, RMSE and MAPE of model prices against a dated quote series.

    Dates whose pricing fails are skipped and counted. MAPE uses only dates
    with a market mid of at least one tick.
    """
    if not series:
        raise DataError("empty quote series")
    price_fn = price_fn or analytic_series_pricer()
    err, rel, failed, excluded = [], [], 0, 0
    rows = []
    for pt in series:
        try:
            model = float(price_fn(params, pt.days_to_expiry, strike, pt.spot))
        except (NumericalIntegrityError, DomainError):
            failed += 1
            continue
        e = model - pt.mid
        err.append(e)
        rows.append({"date": pt.date, "market": pt.mid, "model": model})
        if pt.mid >= tick:
            rel.append(abs(e) / pt.mid)
        else:
            excluded += 1
    e = np.array(err)
    return {
        "mae": float(np.mean(np.abs(e))) if len(e) else float("nan"),
        "rmse": float(np.sqrt(np.mean(e * e))) if len(e) else float("nan"),
        "mape": float(np.mean(rel) * 100) if rel else float("nan"),
        "n": len(e),
        "failed": failed,
        "mape_excluded": excluded,
        "rows": rows,
    }
