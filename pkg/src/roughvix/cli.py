"""Command-line entry point: ``roughvix <subcommand> [options]``.

Exit codes: 0 success, 2 usage or argument-domain error, 3 data error,
4 numerical-integrity error. Every subcommand that writes an output file
also writes ``<output>.manifest`` with the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields, replace
from pathlib import Path

from .charfn import MarketState, QuadratureConfig
from .errors import DataError, DomainError, NumericalIntegrityError

MANIFEST_VERSION = 1
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("roughvix")


class UsageError(Exception):
    pass


# -- configuration -------------------------------------------------------------

def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise DataError("config file must hold a JSON object")
    return data


def _resolve(args, cfg: dict, key: str, default):
    """CLI flag, then config file, then built-in default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    return cfg.get(key, default)


def _quadrature(cfg: dict) -> QuadratureConfig:
    over = cfg.get("quadrature", {})
    known = {f.name for f in fields(QuadratureConfig)}
    bad = set(over) - known
    if bad:
        raise UsageError(f"unknown quadrature keys: {', '.join(sorted(bad))}")
    return replace(QuadratureConfig(), **over)


def _write_manifest(out_path, command: str, resolved: dict) -> None:
    lines = [
        f"schema_version: {MANIFEST_VERSION}",
        f"command: {command}",
        f"created: {time.strftime('%Y-%m-%dT%H:%M:%S%z')}",
    ]
    for key in sorted(resolved):
        lines.append(f"config.{key}: {json.dumps(resolved[key], sort_keys=True, default=str)}")
    Path(str(out_path) + ".manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _scan(text: str):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError("--scan expects lo:hi:step") from None
    return lo, hi, step


# -- subcommands ----------------------------------------------------------------

def cmd_price(args, cfg):
    from .params import ModelParams
    from .pricer import price_grid, save_price_table

    params = ModelParams.load(_resolve(args, cfg, "params", None) or _need("--params"))
    strikes = _floats(_resolve(args, cfg, "strike", "0.17"))
    days = [int(d) for d in _floats(_resolve(args, cfg, "maturity_days", "20"))]
    spot = float(_resolve(args, cfg, "spot", 0.1793))
    qc = _quadrature(cfg)
    grid = price_grid(params, days, strikes, qc, MarketState(spot_I2=spot * spot))
    for i, d in enumerate(days):
        for j, K in enumerate(strikes):
            print(f"{d} {K!r} {float(grid[i, j])!r}")
    if args.out:
        save_price_table(args.out, days, strikes, grid)
        _write_manifest(args.out, "price", {"params": params.to_dict(), "strikes": strikes,
                                             "maturity_days": days, "spot": spot, "quadrature": asdict(qc)})
    return 0


def cmd_generate(args, cfg):
    from .dataset_gen import DEFAULT_STRIKES, ParameterBox, generate_dataset, lhs_sample, save_dataset

    n = int(_resolve(args, cfg, "n", 5000))
    seed = int(_resolve(args, cfg, "seed", 0))
    out = _resolve(args, cfg, "out", None) or _need("--out")
    box = ParameterBox().with_overrides(cfg.get("box", {}))
    strikes = [float(k) for k in cfg.get("strikes", DEFAULT_STRIKES)]
    maturities = [int(m) for m in cfg.get("maturities", (258, 100, 48, 20))]
    qc = _quadrature(cfg)
    threads = int(_resolve(args, cfg, "threads", os.cpu_count() or 1))
    samples = lhs_sample(n, box, seed)
    ds = generate_dataset(samples, maturities, strikes, qc, threads=threads)
    resolved = {"n": n, "seed": seed, "box": [asdict(d) for d in box.dims], "strikes": strikes,
                "maturities": maturities, "quadrature": asdict(qc), "threads": threads}
    save_dataset(out, ds.rows, meta={"n": n, "seed": seed})
    qpath = _resolve(args, cfg, "quarantine", None)
    if qpath:
        _dump_json(qpath, ds.quarantine)
    _write_manifest(out, "generate", resolved)
    print(f"{len(ds)} rows, {len(ds.quarantine)} quarantined")
    return 0


def cmd_train(args, cfg):
    from .dataset_gen import load_dataset
    from .surrogate import TrainConfig, evaluate, fit, save_model, split_dataset

    data = _resolve(args, cfg, "data", None) or _need("--data")
    out = _resolve(args, cfg, "out", None) or _need("--out")
    table, _, _ = load_dataset(data)
    tc = TrainConfig(
        loss=_resolve(args, cfg, "loss", "mse"),
        seed=int(_resolve(args, cfg, "seed", 0)),
        max_epochs=int(_resolve(args, cfg, "max_epochs", 2000)),
        batch_size=int(_resolve(args, cfg, "batch_size", 1024)),
        lr=float(_resolve(args, cfg, "lr", 1e-3)),
    )
    train, val, test = split_dataset(table, tc.fractions, tc.seed)
    model = fit(train, val, tc)
    model.meta["test"] = evaluate(model, test) if len(test) else {}
    save_model(out, model)
    curve = Path(str(out) + ".curve")
    rows = ["epoch,train_loss,val_loss,val_rmse,lr"] + [
        f"{c['epoch']},{c['train_loss']!r},{c['val_loss']!r},{c['val_rmse']!r},{c['lr']!r}" for c in model.meta["curve"]
    ]
    curve.write_text("\n".join(rows) + "\n", encoding="utf-8")
    resolved = {k: v for k, v in asdict(tc).items() if k != "spec"} | {"data": str(data), "spec": asdict(tc.spec)}
    _write_manifest(out, "train", resolved)
    print(json.dumps({"epochs": model.meta["epochs_run"], "best_val_rmse": model.meta["best_val_rmse"],
                      "test": model.meta["test"]}, sort_keys=True))
    return 0


def _quotes_for_calibration(path):
    from .calibrate import MarketQuote
    from .market_data import load_quotes

    table = load_quotes(path)
    quotes = [MarketQuote(q.maturity_days, q.strike, q.put.price) for q in table if q.put.price is not None]
    if not quotes:
        raise DataError(f"{path} holds no priced put quotes")
    return quotes


def cmd_calibrate(args, cfg):
    from .calibrate import CalibrationProblem, GAConfig, calibrate
    from .surrogate import load_model

    quotes = _quotes_for_calibration(_resolve(args, cfg, "quotes", None) or _need("--quotes"))
    out = _resolve(args, cfg, "out", None) or _need("--out")
    model_path = _resolve(args, cfg, "model", None)
    pricer = "surrogate" if model_path else "analytic"
    model = load_model(model_path) if model_path else None
    seed = int(_resolve(args, cfg, "seed", 0))
    if args.full_scale:
        ga = GAConfig.full_scale(seed)
    else:
        ga = GAConfig(pop_size=int(_resolve(args, cfg, "pop", 60)),
                      generations=int(_resolve(args, cfg, "gens", 300)), seed=seed)
    alpha = float(_resolve(args, cfg, "alpha", 1.715))
    problem = CalibrationProblem(quotes, pricer=pricer, model=model, alpha=alpha, qc=_quadrature(cfg))
    result = calibrate(problem, ga)
    result.save(out)
    _write_manifest(out, "calibrate", {"quotes": len(quotes), "pricer": pricer, "model": model_path,
                                       "ga": asdict(ga), "alpha": alpha})
    print(json.dumps({"objective": result.value, "rmse": result.rmse, **result.to_dict()["vector"]}, sort_keys=True))
    return 0


def cmd_filter(args, cfg):
    from .market_data import apply_filters, load_quotes, write_quotes

    src = _resolve(args, cfg, "input", None) or _need("--input")
    out = _resolve(args, cfg, "out", None) or _need("--out")
    chosen = [f.strip() for f in str(_resolve(args, cfg, "filters", "mono,convex")).split(",") if f.strip()]
    table = load_quotes(src)
    rep = apply_filters(table.quotes, chosen, fixpoint=not args.single_pass)
    write_quotes(out, rep.kept)
    report = {
        "input": len(table.quotes),
        "rejected_rows": [{"line": ln, "reason": why} for ln, why in table.rejected],
        "kept": len(rep.kept),
        "counts": rep.counts,
        "dropped": [{"line": q.line, "maturity_days": q.maturity_days, "strike": q.strike, "reason": why}
                    for q, why in rep.dropped],
        "parity_flagged": [{"line": q.line, "maturity_days": q.maturity_days, "strike": q.strike}
                           for q, _ in rep.flagged],
        "parity_unmatched": len(rep.unmatched),
    }
    _dump_json(str(out) + ".report.json", report)
    _write_manifest(out, "filter", {"input": str(src), "filters": chosen, "fixpoint": not args.single_pass})
    print(json.dumps({k: report[k] for k in ("input", "kept", "counts")}, sort_keys=True))
    return 0


def cmd_activity(args, cfg):
    from .activity import ActivityConfig, estimate_beta, load_series, truncation_sensitivity

    series = load_series(_resolve(args, cfg, "input", None) or _need("--input"))
    lo, hi, step = _scan(_resolve(args, cfg, "scan", "0.05:1.95:0.05"))
    ac = ActivityConfig(float(_resolve(args, cfg, "L", 0.5)), lo, hi, step)
    beta, method = estimate_beta(series, ac)
    result = {"beta_hat": beta, "method": method, "n_increments": len(series.values) - 1,
              "base_interval_minutes": series.base_interval}
    L_list = _resolve(args, cfg, "L_list", None)
    if L_list:
        result["sensitivity"] = [
            {"L": L, "truncated_share": share, "beta_hat": b, "method": m}
            for L, share, b, m in truncation_sensitivity(series, _floats(L_list), ac)
        ]
    if args.out:
        _dump_json(args.out, result)
        _write_manifest(args.out, "activity", asdict(ac) | {"L_list": L_list})
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_validate_backends(args, cfg):
    from .validation import backend_agreement

    n = int(_resolve(args, cfg, "n", 10000))
    seed = int(_resolve(args, cfg, "seed", 0))
    qc = _quadrature(cfg)
    res = backend_agreement(n, seed, qc)
    summary = {k: v for k, v in res.items() if k != "rows"}
    if args.out:
        _dump_json(args.out, summary)
        rows = ["a,b,d,kappa,r,maturity_days,l,abs_diff"] + [",".join(repr(float(x)) for x in r) for r in res["rows"]]
        Path(str(args.out) + ".rows").write_text("\n".join(rows) + "\n", encoding="utf-8")
        _write_manifest(args.out, "validate-backends", {"n": n, "seed": seed, "quadrature": asdict(qc)})
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval_timeseries(args, cfg):
    from .calibrate import analytic_series_pricer, load_series_quotes, timeseries_eval
    from .params import ModelParams

    params = ModelParams.load(_resolve(args, cfg, "params", None) or _need("--params"))
    series = load_series_quotes(_resolve(args, cfg, "series", None) or _need("--series"))
    strike = float(_resolve(args, cfg, "strike", 0.17))
    qc = _quadrature(cfg)
    res = timeseries_eval(params, strike, series, analytic_series_pricer(qc))
    if args.out:
        _dump_json(args.out, res)
        _write_manifest(args.out, "eval-timeseries", {"params": params.to_dict(), "strike": strike,
                                                     "quadrature": asdict(qc)})
    print(json.dumps({k: res[k] for k in ("mae", "rmse", "mape", "n", "failed", "mape_excluded")}, sort_keys=True))
    return 0


def _need(flag):
    raise UsageError(f"{flag} is required")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughvix", description="Rough-jump VIX option pricing and calibration.")
    p.add_argument("--config", help="JSON file with defaults for any option")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes for parallel maps")
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    s = add("price", help="price puts on a maturity x strike grid")
    s.add_argument("--params")
    s.add_argument("--strike", help="comma-separated strikes")
    s.add_argument("--maturity-days", dest="maturity_days", help="comma-separated maturities in days")
    s.add_argument("--spot", type=float, help="spot volatility level (default 0.1793)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_price)

    s = add("generate", help="build the offline training table")
    s.add_argument("--n", type=int)
    s.add_argument("--out")
    s.add_argument("--quarantine")
    s.set_defaults(func=cmd_generate)

    s = add("train", help="fit the surrogate network")
    s.add_argument("--data")
    s.add_argument("--loss", choices=("mse", "inv_premium", "log_target"))
    s.add_argument("--max-epochs", dest="max_epochs", type=int)
    s.add_argument("--batch-size", dest="batch_size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_train)

    s = add("calibrate", help="two-stage calibration to put quotes")
    s.add_argument("--quotes")
    s.add_argument("--model", help="surrogate model file; omit to price analytically")
    s.add_argument("--pop", type=int)
    s.add_argument("--gens", type=int)
    s.add_argument("--full-scale", dest="full_scale", action="store_true", help="population 600, 3000 generations")
    s.add_argument("--alpha", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_calibrate)

    s = add("filter", help="apply no-arbitrage screens to a quote file")
    s.add_argument("--input")
    s.add_argument("--filters", help="comma list from mono,convex,parity")
    s.add_argument("--single-pass", dest="single_pass", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_filter)

    s = add("activity", help="estimate the jump-activity index")
    s.add_argument("--input")
    s.add_argument("--L", dest="L", type=float)
    s.add_argument("--scan", help="lo:hi:step")
    s.add_argument("--L-list", dest="L_list", help="comma-separated thresholds for a sensitivity table")
    s.add_argument("--out")
    s.set_defaults(func=cmd_activity)

    s = add("validate-backends", help="compare fast and high-precision characteristic functions")
    s.add_argument("--n", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate_backends)

    s = add("eval-timeseries", help="out-of-sample error of fixed parameters")
    s.add_argument("--params")
    s.add_argument("--series")
    s.add_argument("--strike", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval_timeseries)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalIntegrityError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
