"""Quote ingestion and no-arbitrage screens for the calibration panel.

Quote files are UTF-8 comma-separated text whose header names the columns
in :data:`SCHEMA_COLUMNS`. Screens work on put mids per maturity slice and
sort internally, so input row order never matters.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

SCHEMA_COLUMNS = (
    "Strike", "IVM_call", "Volm_call", "TTM_year", "mid_price_call", "IVM_Put",
    "Volm_Put", "mid_price_put", "spot_price", "Bid", "Ask", "Bid_Put", "Ask_Put",
)
REQUIRED_FIELDS = ("Strike", "TTM_year")
REASONS = ("monotonicity", "convexity", "parity")
# price comparisons treat differences below this as equality
PRICE_TOL = 1e-12


@dataclass(frozen=True)
class SideQuote:
    bid: float | None = None
    ask: float | None = None
    mid: float | None = None
    volume: float | None = None
    iv_vendor: float | None = None

    @property
    def price(self) -> float | None:
        """Mid, falling back to (bid + ask)/2 when no mid is quoted."""
        if self.mid is not None:
            return self.mid
        if self.bid is not None and self.ask is not None:
            return 0.5 * (self.bid + self.ask)
        return None


@dataclass(frozen=True)
class Quote:
    strike: float
    maturity_days: int
    ttm_years: float
    put: SideQuote = SideQuote()
    call: SideQuote = SideQuote()
    spot: float | None = None
    line: int | None = None

    @property
    def key(self):
        return (self.maturity_days, self.strike)


@dataclass
class QuoteTable:
    quotes: list[Quote] = field(default_factory=list)
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)


@dataclass
class FilterReport:
    kept: list[Quote]
    dropped: list[tuple[Quote, str]] = field(default_factory=list)
    unmatched: list[Quote] = field(default_factory=list)
    # diagnostic parity flags that were not applied to ``kept``
    flagged: list[tuple[Quote, str]] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(reason for _, reason in self.dropped)
        return {r: c.get(r, 0) for r in REASONS}

    def merge(self, later: "FilterReport") -> "FilterReport":
        """Chain a report computed on ``self.kept``."""
        return FilterReport(later.kept, self.dropped + later.dropped, self.unmatched + later.unmatched,
                            self.flagged + later.flagged)


def _num(raw: str | None, column: str, line: int) -> float | None:
    if raw is None:
        return None
    raw = raw.strip()
    if raw == "" or raw.lower() in ("nan", "na", "null"):
        return None
    try:
        val = float(raw)
    except ValueError:
        raise DataError(f"column {column}: cannot parse {raw!r} as a number", line=line) from None
    return None if math.isnan(val) else val


def load_quotes(path) -> QuoteTable:
    """Parse a quote file.

    Rows lacking a strike or maturity, or quoting bid above ask on either
    side, are rejected and listed in ``QuoteTable.rejected`` with their line
    numbers. Unparseable numbers raise :class:`DataError`.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in SCHEMA_COLUMNS if c not in header]
        if missing:
            raise DataError(f"quote file is missing columns: {', '.join(missing)}", line=1)
        reader.fieldnames = header
        table = QuoteTable()
        for row in reader:
            line = reader.line_num
            v = {c: _num(row.get(c), c, line) for c in SCHEMA_COLUMNS}
            absent = [c for c in REQUIRED_FIELDS if v[c] is None]
            if absent:
                table.rejected.append((line, f"missing {', '.join(absent)}"))
                continue
            if v["Strike"] <= 0 or v["TTM_year"] <= 0:
                table.rejected.append((line, "non-positive strike or maturity"))
                continue
            put = SideQuote(v["Bid_Put"], v["Ask_Put"], v["mid_price_put"], v["Volm_Put"], v["IVM_Put"])
            call = SideQuote(v["Bid"], v["Ask"], v["mid_price_call"], v["Volm_call"], v["IVM_call"])
            bad = [name for name, s in (("put", put), ("call", call))
                   if s.bid is not None and s.ask is not None and s.bid > s.ask]
            if bad:
                table.rejected.append((line, f"bid > ask on {' and '.join(bad)} side"))
                continue
            days = int(round(v["TTM_year"] * 365))
            if days < 1:
                table.rejected.append((line, "maturity under one day"))
                continue
            table.quotes.append(Quote(v["Strike"], days, v["TTM_year"], put, call, v["spot_price"], line))
    return table


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_quotes(path, quotes: Iterable[Quote]) -> None:
    """Write quotes back in the loader's schema, sorted by (maturity, strike)."""
    rows = [",".join(SCHEMA_COLUMNS)]
    for q in sorted(quotes, key=lambda q: q.key):
        c, p = q.call, q.put
        rows.append(",".join([
            _fmt(q.strike), _fmt(c.iv_vendor), _fmt(c.volume), _fmt(q.ttm_years), _fmt(c.mid),
            _fmt(p.iv_vendor), _fmt(p.volume), _fmt(p.mid), _fmt(q.spot),
            _fmt(c.bid), _fmt(c.ask), _fmt(p.bid), _fmt(p.ask),
        ]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def _slices(quotes: Sequence[Quote], side: str):
    """Group priced quotes by maturity, each slice sorted by strike."""
    groups = defaultdict(list)
    unpriced = []
    for q in quotes:
        if getattr(q, side).price is None:
            unpriced.append(q)
        else:
            groups[q.maturity_days].append(q)
    return [sorted(groups[m], key=lambda q: q.strike) for m in sorted(groups)], unpriced


def _monotone_pass(slice_, side):
    bad = set()
    for prev, cur in zip(slice_, slice_[1:]):
        if getattr(cur, side).price < getattr(prev, side).price - PRICE_TOL:
            bad.add(id(cur))
    return bad


def _convex_pass(slice_, side):
    bad = set()
    for lo, mid, hi in zip(slice_, slice_[1:], slice_[2:]):
        span = hi.strike - lo.strike
        if span <= 0:
            continue
        w_lo = (hi.strike - mid.strike) / span
        w_hi = (mid.strike - lo.strike) / span
        chord = w_lo * getattr(lo, side).price + w_hi * getattr(hi, side).price
        if getattr(mid, side).price > chord + PRICE_TOL:
            bad.add(id(mid))
    return bad


def _run_screen(quotes, side, step, reason, fixpoint):
    slices, unpriced = _slices(list(quotes), side)
    kept, dropped = list(unpriced), []
    for s in slices:
        while True:
            bad = step(s, side)
            if not bad:
                break
            dropped.extend((q, reason) for q in s if id(q) in bad)
            s = [q for q in s if id(q) not in bad]
            if not fixpoint:
                break
        kept.extend(s)
    kept.sort(key=lambda q: q.key)
    return FilterReport(kept, dropped)


def filter_monotonic(quotes: Sequence[Quote], *, side: str = "put", fixpoint: bool = True) -> FilterReport:
    """Drop quotes whose price falls below the previous strike's price.

    The higher-strike quote of a violating pair is the one removed. With
    ``fixpoint=False`` only one sweep over adjacent pairs is made; the
    default repeats until the slice is clean, which makes the screen
    idempotent.
    """
    return _run_screen(quotes, side, _monotone_pass, "monotonicity", fixpoint)


def filter_convex(quotes: Sequence[Quote], *, side: str = "put", fixpoint: bool = True) -> FilterReport:
    """Drop interior quotes lying above the chord of their strike neighbours."""
    return _run_screen(quotes, side, _convex_pass, "convexity", fixpoint)


def parity_bounds_check(call_quotes: Sequence[Quote], put_quotes: Sequence[Quote], spot: float | None = None) -> FilterReport:
    """Flag (K, T) pairs outside the bid/ask put-call parity corridor

        bid_C - ask_P <= S0 - K <= ask_C - bid_P.

    Diagnostic only: callers decide whether to act on ``dropped``. Pairs
    without a matching call, or lacking bids/asks, go to ``unmatched``.
    """
    calls = {q.key: q for q in call_quotes}
    kept, dropped, unmatched = [], [], []
    for p in sorted(put_quotes, key=lambda q: q.key):
        c = calls.get(p.key)
        s0 = spot if spot is not None else p.spot
        fields = None if c is None else (c.call.bid, c.call.ask, p.put.bid, p.put.ask)
        if fields is None or s0 is None or any(f is None for f in fields):
            unmatched.append(p)
            continue
        bid_c, ask_c, bid_p, ask_p = fields
        gap = s0 - p.strike
        if bid_c - ask_p <= gap + PRICE_TOL and gap <= ask_c - bid_p + PRICE_TOL:
            kept.append(p)
        else:
            dropped.append((p, "parity"))
    if unmatched:
        warnings.warn(f"{len(unmatched)} put quotes had no usable call counterpart", stacklevel=2)
    return FilterReport(kept, dropped, unmatched)


def apply_filters(quotes: Sequence[Quote], filters: Sequence[str] = ("mono", "convex"), *,
                  fixpoint: bool = True, apply_parity: bool = False) -> FilterReport:
    """Run the selected screens in order: monotonicity, convexity, then parity.

    Parity violations move to ``dropped`` only when ``apply_parity`` is set;
    otherwise they land in ``flagged`` and the kept set is untouched.
    """
    unknown = set(filters) - {"mono", "convex", "parity"}
    if unknown:
        raise DataError(f"unknown filter(s): {', '.join(sorted(unknown))}")
    report = FilterReport(sorted(quotes, key=lambda q: q.key))
    if "mono" in filters:
        report = report.merge(filter_monotonic(report.kept, fixpoint=fixpoint))
    if "convex" in filters:
        report = report.merge(filter_convex(report.kept, fixpoint=fixpoint))
    if "parity" in filters:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            par = parity_bounds_check(report.kept, report.kept)
        if apply_parity:
            report = report.merge(par)
        else:
            report = FilterReport(report.kept, report.dropped, report.unmatched, report.flagged + par.dropped)
    return report
