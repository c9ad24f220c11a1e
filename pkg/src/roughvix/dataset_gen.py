"""Latin-hypercube sampling of the parameter box and offline generation of
the (theta, T, K) -> price training table.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .charfn import MarketState, QuadratureConfig
from .errors import DataError, DomainError, NumericalIntegrityError, SchemaVersionError
from .params import FIXED_C, STANDARD_MATURITIES, ModelParams
from .pricer import default_market_state, price_grid

log = logging.getLogger(__name__)

PARAM_NAMES = ("a", "b", "c", "d", "kappa", "r")
COLUMNS = ("a", "b", "c", "d", "kappa", "r", "t", "K", "price")
DEFAULT_STRIKES = tuple(round(0.09 + 0.01 * i, 2) for i in range(20))
SCHEMA = "roughvix-columns"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    # smallest admissible value; keeps strict-positivity parameters valid
    floor: float | None = None

    @property
    def fixed(self) -> bool:
        return self.lower == self.upper


@dataclass(frozen=True)
class ParameterBox:
    dims: tuple[Dim, ...] = field(
        default_factory=lambda: (
            Dim("a", 0.0, 5.0, floor=1e-4),
            Dim("b", 0.0, 5.0, floor=1e-4),
            Dim("c", FIXED_C, FIXED_C),
            Dim("d", 0.5, 0.999, floor=0.5 + 1e-9),
            Dim("kappa", 0.0, 10.0, floor=1e-4),
            Dim("r", -0.25, 0.25),
        )
    )

    def validate(self) -> None:
        for d in self.dims:
            if d.lower > d.upper:
                raise DomainError(f"box dimension {d.name}: lower > upper")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def sampled(self) -> tuple[Dim, ...]:
        return tuple(d for d in self.dims if not d.fixed)

    def lower(self) -> np.ndarray:
        return np.array([d.lower if d.floor is None else max(d.lower, d.floor) for d in self.dims])

    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims])

    def with_overrides(self, overrides: dict) -> "ParameterBox":
        dims = []
        for d in self.dims:
            if d.name in overrides:
                lo, hi = overrides[d.name]
                dims.append(Dim(d.name, float(lo), float(hi), d.floor))
            else:
                dims.append(d)
        return ParameterBox(tuple(dims))


def lhs_sample(n: int, box: ParameterBox = ParameterBox(), seed: int = 0) -> np.ndarray:
    """Latin-hypercube sample, one column per box dimension.

    Every sampled column has exactly one point in each of the ``n``
    equal-width strata of its range; fixed columns are constant.
    """
    if n < 1:
        raise DomainError("lhs_sample needs n >= 1")
    box.validate()
    sampled = box.sampled
    u = qmc.LatinHypercube(d=max(1, len(sampled)), seed=seed).random(n)
    out = np.empty((n, len(box.dims)))
    k = 0
    for j, d in enumerate(box.dims):
        if d.fixed:
            out[:, j] = d.lower
            continue
        col = d.lower + u[:, k] * (d.upper - d.lower)
        if d.floor is not None:
            col = np.maximum(col, d.floor)
        out[:, j] = col
        k += 1
    return out


def row_to_params(row: Sequence[float], names=PARAM_NAMES) -> ModelParams:
    v = dict(zip(names, map(float, row)))
    return ModelParams(a=v["a"], b=v["b"], c=v["c"], d=v["d"], kappa=v["kappa"], r=v["r"])


@dataclass
class Dataset:
    """Training rows plus the quarantine of cells the pricer rejected."""

    rows: np.ndarray  # shape (n, 9) in COLUMNS order
    quarantine: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


def _price_sample(args):
    idx, row, maturities, strikes, qc, ms = args
    p = row_to_params(row)
    try:
        return idx, price_grid(p, maturities, strikes, qc, ms), None
    except NumericalIntegrityError as exc:
        return idx, None, str(exc)
    except DomainError as exc:
        return idx, None, f"domain: {exc}"


def generate_dataset(
    samples: np.ndarray,
    maturities: Sequence[int] = STANDARD_MATURITIES[::-1],
    strikes: Sequence[float] = DEFAULT_STRIKES,
    qc: QuadratureConfig = QuadratureConfig(),
    ms: MarketState | None = None,
    threads: int = 1,
) -> Dataset:
    """Price every (sample, maturity, strike) tuple.

    ``samples`` columns follow :data:`PARAM_NAMES`. Rows are ordered by
    sample, then maturity, then strike regardless of ``threads``. A sample
    whose strip fails the pricer's integrity check is priced strike by
    strike so only the failing cells land in the quarantine.
    """
    if not len(maturities) or not len(strikes):
        raise DomainError("generate_dataset needs non-empty grids")
    ms = ms or default_market_state()
    jobs = [(i, samples[i], tuple(maturities), tuple(strikes), qc, ms) for i in range(len(samples))]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(threads) as pool:
            results = list(pool.map(_price_sample, jobs, chunksize=4))
    else:
        results = [_price_sample(j) for j in jobs]

    rows, quarantine = [], []
    for idx, grid, err in sorted(results, key=lambda r: r[0]):
        row = samples[idx]
        for i, days in enumerate(maturities):
            for j, K in enumerate(strikes):
                if grid is None:
                    cell = _price_cell(row, days, K, qc, ms)
                    if isinstance(cell, str):
                        quarantine.append({"sample": idx, "maturity_days": days, "strike": K, "error": cell})
                        continue
                    price = cell
                else:
                    price = grid[i, j]
                rows.append([*row, days / 365.0, K, price])
        if err:
            log.warning("sample %d: %s", idx, err)
    arr = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    return Dataset(arr, quarantine)


def _price_cell(row, days, K, qc, ms):
    try:
        return float(price_grid(row_to_params(row), [days], [K], qc, ms)[0, 0])
    except (NumericalIntegrityError, DomainError) as exc:
        return str(exc)


def save_dataset(path, table: np.ndarray, columns: Sequence[str] = COLUMNS, meta: dict | None = None) -> None:
    """Columnar text container: a schema line, a JSON meta line, a header,
    then one line per column with values in shortest round-trip form.
    """
    table = np.asarray(table, dtype=float).reshape(-1, len(columns))
    lines = [
        f"#{SCHEMA} v{SCHEMA_VERSION} rows={len(table)} cols={len(columns)}",
        "#meta " + json.dumps(meta or {}, sort_keys=True),
        ",".join(columns),
    ]
    for j, name in enumerate(columns):
        lines.append(name + ":" + ",".join(repr(float(v)) for v in table[:, j]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> tuple[np.ndarray, tuple[str, ...], dict]:
    """Inverse of :func:`save_dataset`; returns (table, columns, meta)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or not lines[0].startswith(f"#{SCHEMA} "):
        raise DataError("not a roughvix column file", line=1)
    head = lines[0].split()
    version = head[1]
    if version != f"v{SCHEMA_VERSION}":
        raise SchemaVersionError(f"unsupported schema version {version}")
    try:
        n_rows = int(head[2].split("=")[1])
        n_cols = int(head[3].split("=")[1])
        meta = json.loads(lines[1][len("#meta ") :])
    except (IndexError, ValueError) as exc:
        raise DataError(f"corrupt header: {exc}", line=1) from None
    columns = tuple(lines[2].split(",")) if lines[2] else ()
    if len(columns) != n_cols or len(lines) < 3 + n_cols:
        raise DataError("truncated file: missing columns")
    table = np.empty((n_rows, n_cols))
    for j, name in enumerate(columns):
        line = lines[3 + j]
        prefix = name + ":"
        if not line.startswith(prefix):
            raise DataError(f"expected column {name!r}", line=4 + j)
        body = line[len(prefix) :]
        try:
            vals = [float(v) for v in body.split(",")] if body else []
        except ValueError:
            raise DataError(f"column {name!r} holds a non-numeric value", line=4 + j) from None
        if len(vals) != n_rows:
            raise DataError(f"column {name!r} has {len(vals)} values, expected {n_rows}", line=4 + j)
        table[:, j] = vals
    return table, columns, meta
