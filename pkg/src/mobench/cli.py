"""Command line front end: inspect datasets, fit profiles, forecast, evaluate, benchmark.

Every subcommand is a thin adapter over the library; anything it prints can be
reproduced by calling the corresponding functions directly.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .metrics import EvalReport, evaluate
from .panel import load_dataset, time_slice
from .residual_ar import RegressionConfig, fit_halr, forecast_halr
from .seasonal import (
    DEFAULT_S_FLOOR,
    fit_profile,
    load_profile,
    residualize,
    save_profile,
)

FORECAST_META_FILENAME = "forecast.json"


def _parse_steps(arg: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in arg.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {arg!r}") from exc


def _horizons_from_args(args, granularity_s: int) -> tuple[int, ...]:
    if args.minutes is not None:
        steps = []
        for m in args.minutes:
            seconds = m * 60
            if seconds % granularity_s != 0:
                raise ValueError(
                    f"{m} minutes is not a whole number of {granularity_s}s steps"
                )
            steps.append(seconds // granularity_s)
        return tuple(steps)
    return args.horizons


def _cmd_inspect(args) -> int:
    ds = load_dataset(args.dataset)
    meta = ds.meta
    tz = timezone(timedelta(seconds=meta.timezone_offset_s))
    start = datetime.fromtimestamp(meta.start_time, tz=tz).isoformat()
    print(f"name:          {meta.name}")
    print(f"T={meta.num_timesteps}  N={meta.num_locations}  C={meta.num_channels}")
    print(f"start:         {start}")
    print(f"granularity:   {meta.granularity_s}s ({meta.slots_per_day} slots/day)")
    print(f"channels:      {', '.join(meta.channel_names)}")
    print(f"sentinel:      {meta.missing_sentinel}")
    print(f"holidays:      {len(meta.holidays)}")
    total = ds.values.size
    observed = int(ds.mask.sum())
    pct = 100.0 * observed / total if total else 100.0
    print(f"observed:      {observed}/{total} cells ({pct:.2f}%)")
    for c, name in enumerate(meta.channel_names):
        ch = ds.mask[:, :, c]
        print(f"  channel {name!r}: {100.0 * ch.mean():.2f}% observed")
    return 0


def _cmd_fit_ha(args) -> int:
    ds = load_dataset(args.dataset)
    stop = int(len(ds) * args.fit_frac + 1e-9)
    profile = fit_profile(time_slice(ds, 0, stop))
    save_profile(profile, args.out)
    covered = 100.0 * profile.defined.mean()
    print(f"profile: {profile.slots_per_week} weekly slots, {covered:.1f}% cells covered")
    print(f"wrote {Path(args.out) / 'profile.f32'}")
    return 0


def _cmd_forecast(args) -> int:
    ds = load_dataset(args.dataset)
    horizons = _horizons_from_args(args, ds.meta.granularity_s)
    fit_stop = int(len(ds) * args.fit_frac + 1e-9)
    if args.profile:
        profile = load_profile(args.profile)
    else:
        profile = fit_profile(time_slice(ds, 0, fit_stop))

    config = RegressionConfig(
        h=args.h,
        horizons=horizons,
        strategy=args.strategy,
        scope=args.scope,
        ridge=args.ridge,
        include_intercept=not args.no_intercept,
    )
    residuals = residualize(time_slice(ds, 0, fit_stop), profile, args.normalized, args.s_floor)
    model = fit_halr(residuals, config)
    forecasts = forecast_halr(
        ds,
        profile,
        model,
        (fit_stop, len(ds)),
        normalized=args.normalized,
        s_floor=args.s_floor,
        seq2seq_window=args.seq2seq_window,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spans = {}
    for k, fc in sorted(forecasts.items()):
        # float64 so evaluating the files reproduces the in-process numbers exactly
        fc.values.astype("<f8").tofile(out / f"h{k}.f64")
        fc.mask.astype(np.uint8).tofile(out / f"h{k}.mask.u8")
        spans[str(k)] = {"t_start": fc.t_start, "n_targets": int(fc.values.shape[0])}
    (out / FORECAST_META_FILENAME).write_text(
        json.dumps(
            {
                "dataset": ds.meta.name,
                "granularity_s": ds.meta.granularity_s,
                "num_locations": ds.meta.num_locations,
                "num_channels": ds.meta.num_channels,
                "horizons": sorted(forecasts),
                "spans": spans,
            },
            indent=2,
        )
        + "\n",
        "utf-8",
    )
    (out / "model.json").write_text(model.to_json() + "\n", "utf-8")
    print(f"wrote forecasts for horizons {sorted(forecasts)} to {out}")
    return 0


def _cmd_eval(args) -> int:
    ds = load_dataset(args.truth)
    out = Path(args.pred)
    meta = json.loads((out / FORECAST_META_FILENAME).read_text("utf-8"))
    shape_nc = (meta["num_locations"], meta["num_channels"])
    if shape_nc != (ds.meta.num_locations, ds.meta.num_channels):
        raise ValueError(
            f"prediction grid {shape_nc} does not match dataset "
            f"({ds.meta.num_locations}, {ds.meta.num_channels})"
        )
    per_horizon = {}
    for k in meta["horizons"]:
        span = meta["spans"][str(k)]
        n, t_start = span["n_targets"], span["t_start"]
        shape = (n, *shape_nc)
        values = np.fromfile(out / f"h{k}.f64", dtype="<f8").reshape(shape)
        mask = np.fromfile(out / f"h{k}.mask.u8", dtype=np.uint8).reshape(shape).astype(bool)
        sl = slice(t_start, t_start + n)
        per_horizon[k] = evaluate(
            ds.values[sl], ds.mask[sl], values, mask, mape_floor=args.mape_floor
        )
    report = EvalReport.from_horizons(per_horizon, mode=args.aggregate)
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", "utf-8")
    return 0


def _cmd_bench_list(args) -> int:
    for spec in bench_mod.registry():
        mode = f"seq2seq x{spec.seq2seq_window}" if spec.seq2seq else "per-horizon"
        horizons = ",".join(str(k) for k in spec.horizons)
        print(
            f"{spec.id:<24} granularity={spec.granularity_s:<5} "
            f"split={spec.split.kind}({spec.split.train}/{spec.split.val}/{spec.split.test}) "
            f"horizons=[{horizons}] {mode}"
        )
    return 0


def _cmd_bench_run(args) -> int:
    if args.all:
        specs = bench_mod.registry()
    elif args.id:
        specs = [bench_mod.get_spec(i) for i in args.id]
    else:
        raise ValueError("select benchmarks with --id <name> (repeatable) or --all")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    config = bench_mod.load_config(args.config) if args.config else {}
    for key in ("strategy", "scope", "ridge", "normalized", "fit_on"):
        value = getattr(args, key)
        if value is not None:
            config.setdefault("*", {})[key] = value
    if args.no_intercept:
        config.setdefault("*", {})["include_intercept"] = False

    results = bench_mod.run_many(
        specs, methods=methods, config=config, data_dir=args.data_dir, jobs=args.jobs
    )
    for fmt in ("text", "csv", "json"):
        bench_mod.emit_results(results, fmt, args.out)
    for bench_id in sorted(results):
        for method in sorted(results[bench_id]):
            result = results[bench_id][method]
            avg = result.report.averaged
            print(f"[{bench_id}] {method}: MAE {avg.mae:.4f}  RMSE {avg.rmse:.4f}", end="")
            if not np.isnan(avg.mape_pct):
                print(f"  MAPE {avg.mape_pct:.2f}%", end="")
            print()
            for t in result.targets:
                where = "avg" if t.horizon is None else f"h={t.horizon}"
                print(
                    f"    {t.status:<4} {t.metric} {where}: target {t.target:g} "
                    f"actual {t.actual:.4f} ({t.rel_err:+.2%})"
                )
    print(f"results written to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobench",
        description="Weekly historical-average baselines and benchmarks for panel time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print dataset metadata and mask statistics")
    p.add_argument("dataset", help="canonical dataset directory")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("fit-ha", help="fit a weekly profile and write it to a directory")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="output directory for profile.f32/profile.json")
    p.add_argument("--fit-frac", type=float, default=1.0, help="leading fraction to fit on")
    p.set_defaults(func=_cmd_fit_ha)

    p = sub.add_parser("forecast", help="fit and run HA+LR over the tail of a dataset")
    p.add_argument("dataset")
    p.add_argument("--profile", help="profile directory (default: fit on the fit range)")
    p.add_argument("--h", type=int, default=12, help="lag order")
    p.add_argument("--horizons", type=_parse_steps, default=(1,), help="steps, e.g. 3,6,9")
    p.add_argument("--minutes", type=_parse_steps, help="horizons in minutes (converted)")
    p.add_argument("--strategy", choices=["direct", "recursive"], default="direct")
    p.add_argument("--scope", choices=["pooled", "per_location"], default="pooled")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--normalized", action="store_true", help="divide residuals by slot std")
    p.add_argument("--s-floor", type=float, default=DEFAULT_S_FLOOR)
    p.add_argument("--seq2seq-window", type=int, default=None)
    p.add_argument("--fit-frac", type=float, default=0.8, help="leading fraction to fit on")
    p.add_argument("--out", required=True, help="output directory for forecasts")
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("eval", help="evaluate a forecast directory against truth")
    p.add_argument("--true", dest="truth", required=True, help="canonical dataset directory")
    p.add_argument("--pred", required=True, help="forecast directory from `mobench forecast`")
    p.add_argument("--mape-floor", type=float, default=0.0)
    p.add_argument("--aggregate", choices=["pool_cells", "mean_of_metrics"], default="pool_cells")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="benchmark registry operations")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    b = bench_sub.add_parser("list", help="list the registered benchmarks")
    b.set_defaults(func=_cmd_bench_list)

    b = bench_sub.add_parser("run", help="run benchmarks and write result files")
    b.add_argument("--id", action="append", help="benchmark id (repeatable)")
    b.add_argument("--all", action="store_true", help="run every registered benchmark")
    b.add_argument("--methods", default="HA,HA+LR")
    b.add_argument("--config", help="JSON file overriding benchmark fields per id (or '*')")
    b.add_argument("--data-dir", help=f"dataset root (default ${bench_mod.DATA_DIR_ENV} or ./data)")
    b.add_argument("--out", default="results", help="results directory")
    b.add_argument("--jobs", type=int, default=1, help="benchmarks to run in parallel")
    b.add_argument("--strategy", choices=["direct", "recursive"], default=None)
    b.add_argument("--scope", choices=["pooled", "per_location"], default=None)
    b.add_argument("--ridge", type=float, default=None)
    b.add_argument("--normalized", action="store_const", const=True, default=None)
    b.add_argument("--no-intercept", action="store_true")
    b.add_argument("--fit-on", choices=["train+val", "train"], default=None)
    b.set_defaults(func=_cmd_bench_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
