"""Deterministic synthetic inputs bundled with the package.

The files under ``roughvix/data`` are produced by :func:`write_all`; tests
check that regenerating them reproduces the shipped bytes.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .activity import simulate_stable_path
from .market_data import Quote, SideQuote, write_quotes
from .params import SPOT_I, STANDARD_MATURITIES, REFERENCE_PARAMS

HALF_SPREAD = 0.005
CALL_HALF_SPREAD = 0.01
FILTER_STRIKES = tuple(round(0.09 + 0.01 * i, 2) for i in range(24))
# (maturity_days, strike index) of each injected defect in the filter panel
MONO_DEFECTS = ((20, 6), (48, 13), (258, 19))
CONVEX_DEFECTS = ((100, 9), (258, 4))
PARITY_DEFECT = (100, 3)


def data_path(name: str) -> Path:
    return Path(str(resources.files("roughvix") / "data" / name))


def _softplus_put(K, F, s=0.02):
    return s * math.log1p(math.exp((K - F) / s))


def filter_panel() -> list[Quote]:
    """96 quotes (4 maturities x 24 strikes) with smooth convex put mids and
    put-call consistent calls, then three monotonicity defects, two convexity
    defects and one parity defect injected at fixed cells."""
    quotes = []
    for m_idx, days in enumerate(STANDARD_MATURITIES):
        F = 0.19 + 0.01 * m_idx
        base = [_softplus_put(K, F) for K in FILTER_STRIKES]
        puts = list(base)
        for d, i in MONO_DEFECTS:
            if d == days:
                puts[i] = base[i - 1] - 0.002
        for d, i in CONVEX_DEFECTS:
            if d == days:
                chord = 0.5 * (base[i - 1] + base[i + 1])
                puts[i] = chord + 0.3 * (base[i + 1] - chord)
        for i, K in enumerate(FILTER_STRIKES):
            call = base[i] + SPOT_I - K
            c_bid, c_ask = call - CALL_HALF_SPREAD, call + CALL_HALF_SPREAD
            if (days, i) == PARITY_DEFECT:
                c_bid, c_ask = call + 0.02, call + 0.03
            p = puts[i]
            quotes.append(Quote(
                strike=K, maturity_days=days, ttm_years=days / 365.0,
                put=SideQuote(p - HALF_SPREAD, p + HALF_SPREAD, p, 100.0, None),
                call=SideQuote(c_bid, c_ask, call, 100.0, None),
                spot=SPOT_I,
            ))
    return quotes


def reference_quotes(prices, strikes, maturities=STANDARD_MATURITIES) -> list[Quote]:
    """Put-only quotes whose mids are the given model prices."""
    out = []
    for i, days in enumerate(maturities):
        for j, K in enumerate(strikes):
            p = float(prices[i][j])
            out.append(Quote(K, days, days / 365.0, put=SideQuote(None, None, p), spot=SPOT_I))
    return out


def activity_series(n: int = 5000, seed: int = 7) -> np.ndarray:
    return simulate_stable_path(n, 1.7, 0.01, seed, start=17.93)


def write_activity_series(path, values) -> None:
    lines = ["timestamp,value"] + [f"{i},{v!r}" for i, v in enumerate(map(float, values))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def option_series(n_dates: int = 6, seed: int = 11):
    """Rows (date, days_to_expiry, spot, mid) for a put expiring 48 days after the first date."""
    rng = np.random.default_rng(seed)
    spot = SPOT_I * np.exp(np.cumsum(rng.normal(0.0, 0.03, n_dates)))
    rows = []
    for k in range(n_dates):
        mid = max(0.0, 0.17 - spot[k]) + 0.01 + 0.002 * k
        rows.append((f"2025-02-{3 + k:02d}", 48 - k, float(spot[k]), float(mid)))
    return rows


def write_option_series(path, rows) -> None:
    lines = ["date,days_to_expiry,spot,mid"] + [f"{d},{t},{s!r},{m!r}" for d, t, s, m in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_all(directory, reference_prices=None, strikes=None, small_dataset=None) -> None:
    """Regenerate the bundled fixtures into ``directory``.

    The pricing-dependent files are only written when their inputs are given.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_quotes(d / "quotes_filter96.csv", filter_panel())
    write_activity_series(d / "vix_minutes.csv", activity_series())
    write_option_series(d / "put_series.csv", option_series())
    (d / "reference_params.json").write_text(json.dumps(REFERENCE_PARAMS.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if reference_prices is not None:
        write_quotes(d / "quotes_reference.csv", reference_quotes(reference_prices, strikes))
    if small_dataset is not None:
        from .dataset_gen import save_dataset

        save_dataset(d / "train_small.cols", small_dataset, meta={"n": 10, "seed": 5})
