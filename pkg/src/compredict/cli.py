"""Command-line interface.

Subcommands:

  synth       generate a synthetic validation dataset (CSV files + manifest)
  preprocess  run only the GRF chain and write per-trial acceleration CSVs
  predict     run horizon sweeps and write per-horizon summaries
  metrics     compute per-subject metric rows only
  analyze     run the statistics layer on an existing metrics.csv
  run         everything end to end: load, sweep, metrics, statistics, export
  report      re-export the tables from a saved bundle.json

Exit codes: 0 on success, 1 for input errors (files, manifest, config),
2 for pipeline failures.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

from . import __version__
from .io import (
    DEFAULTS,
    InputError,
    RunConfig,
    load_config,
    load_manifest,
    load_trial,
    write_dataset,
)
from .metrics import MetricSummary
from .pipeline import (
    ResultBundle,
    compute_statistics,
    export_results,
    load_all_trials,
    load_bundle,
    run_pipeline,
)
from .prediction import TrialTooShortError, sweep
from .profiles import HorizonSpec, ProfileKind
from .synth import protocol_items


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compredict",
        description="Predict center-of-mass trajectories and evaluate them across horizons.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True):
        p.add_argument("--config", help="run configuration file (key = value lines)")
        p.add_argument("--out", required=True, help="output directory")
        if manifest:
            p.add_argument("--manifest", required=True, help="trial manifest (JSON)")
        p.add_argument("--profiles", help="comma-separated profile names")
        p.add_argument("--horizons", help="comma-separated horizon lengths in ms")
        p.add_argument("--stride", type=int, help="samples between horizon starts")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--format", choices=("csv", "json"), help="output format")

    p = sub.add_parser("synth", help="generate a synthetic validation dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--activities", type=int, default=14)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--dt", type=float, default=0.005)

    add_common(sub.add_parser("preprocess", help="run the GRF chain only"))
    add_common(sub.add_parser("predict", help="write per-horizon sweep summaries"))
    add_common(sub.add_parser("metrics", help="write per-subject metric rows"))
    add_common(sub.add_parser("run", help="full pipeline with all outputs"))

    p = sub.add_parser("analyze", help="statistics from an existing metrics.csv")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--metrics-csv", required=True, dest="metrics_csv")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("report", help="re-export tables from a saved bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    return parser


def _load_effective_config(args) -> RunConfig:
    config = load_config(args.config) if getattr(args, "config", None) else DEFAULTS
    updates = {}
    if getattr(args, "profiles", None):
        updates["profiles"] = tuple(s.strip() for s in args.profiles.split(",") if s.strip())
    if getattr(args, "horizons", None):
        updates["horizons_ms"] = tuple(float(s) for s in args.horizons.split(","))
    if getattr(args, "stride", None):
        updates["stride"] = args.stride
    if getattr(args, "threads", None):
        updates["threads"] = args.threads
    if getattr(args, "format", None):
        updates["out_format"] = args.format
    if updates:
        config = replace(config, **updates)
    return config


def _cmd_synth(args) -> int:
    items = protocol_items(
        n_subjects=args.subjects,
        n_activities=args.activities,
        n_repeats=args.repeats,
        dt=args.dt,
    )
    manifest_path = write_dataset(args.out, items)
    print(f"wrote {len(items)} trials and {manifest_path}")
    return 0


def _cmd_preprocess(args) -> int:
    config = _load_effective_config(args)
    entries = load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    count = 0
    for entry in entries:
        trials, _ = load_trial(entry, config)
        for trial in trials:
            path = os.path.join(
                args.out,
                f"{trial.subject_id}_{trial.activity_id}_{trial.repeat_index}_accel.csv",
            )
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write("time_s,ax,ay,az\n")
                for i, row in enumerate(trial.accel_inputs):
                    cells = [repr(i * trial.dt)] + [repr(float(v)) for v in row]
                    fh.write(",".join(cells) + "\n")
            count += 1
    print(f"wrote {count} acceleration files to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    config = _load_effective_config(args)
    entries = load_manifest(args.manifest)
    trials, _ = load_all_trials(entries, config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "horizons.csv")
    specs = [(t, HorizonSpec.from_duration(t, config.dt)) for t in config.horizons_ms]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "subject_id,activity_id,repeat_index,profile,horizon_ms,start_index,"
            "mean_error_m,max_error_m,direction_score\n"
        )
        for trial in trials:
            for name in config.profiles:
                kind = ProfileKind.parse(name)
                for t_ms, spec in specs:
                    try:
                        results = sweep(trial, spec, kind, stride=config.stride)
                    except TrialTooShortError:
                        continue
                    for res in results:
                        fh.write(
                            ",".join(
                                [
                                    trial.subject_id,
                                    trial.activity_id,
                                    str(trial.repeat_index),
                                    kind.value,
                                    repr(float(t_ms)),
                                    str(res.start_index),
                                    repr(float(res.error_series.mean())),
                                    repr(float(res.error_series.max())),
                                    str(res.direction_score),
                                ]
                            )
                            + "\n"
                        )
    print(f"wrote {path}")
    return 0


def _run_bundle(args) -> ResultBundle:
    config = _load_effective_config(args)
    entries = load_manifest(args.manifest)
    if not entries:
        raise InputError(f"manifest {args.manifest} lists no trials")
    trials, notes = load_all_trials(entries, config)
    bundle = run_pipeline(config, trials)
    bundle.notes = notes + bundle.notes
    return bundle


def _cmd_metrics(args) -> int:
    bundle = _run_bundle(args)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "metrics.csv")
    from .pipeline import METRICS_HEADER, _cell

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(METRICS_HEADER + "\n")
        for r in bundle.metric_rows:
            cells = [r.subject_id, r.profile, r.horizon_ms, r.ae, r.me, r.ada, r.mda]
            fh.write(",".join(_cell(c) for c in cells) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_run(args) -> int:
    bundle = _run_bundle(args)
    config = _load_effective_config(args)
    written = export_results(bundle, args.out, out_format=config.out_format)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _read_metrics_csv(path: str) -> list[MetricSummary]:
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["subject_id", "profile", "horizon_ms", "ae_m", "me_m", "ada", "mda"]
            if reader.fieldnames != expected:
                raise InputError(
                    f"{path}: header {reader.fieldnames} does not match {expected}"
                )
            for row in reader:
                rows.append(
                    MetricSummary(
                        subject_id=row["subject_id"],
                        profile=row["profile"],
                        horizon_ms=float(row["horizon_ms"]),
                        ae=float(row["ae_m"]),
                        me=float(row["me_m"]),
                        ada=float(row["ada"]) if row["ada"] else None,
                        mda=float(row["mda"]) if row["mda"] else None,
                    )
                )
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return rows


def _cmd_analyze(args) -> int:
    config = _load_effective_config(args)
    metric_rows = _read_metrics_csv(args.metrics_csv)
    if not metric_rows:
        raise InputError(f"{args.metrics_csv}: no metric rows")
    horizons = tuple(sorted({r.horizon_ms for r in metric_rows}))
    profiles = tuple(dict.fromkeys(r.profile for r in metric_rows))
    config = replace(config, horizons_ms=horizons, profiles=profiles)
    fit_rows, level_rows, stat_rows, notes = compute_statistics(metric_rows, config)
    bundle = ResultBundle(
        version=__version__,
        config=config.to_dict(),
        metric_rows=metric_rows,
        fit_rows=fit_rows,
        level_rows=level_rows,
        stat_rows=stat_rows,
        notes=notes,
    )
    written = export_results(bundle, args.out, out_format=config.out_format)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _cmd_report(args) -> int:
    try:
        bundle = load_bundle(args.bundle)
    except OSError as exc:
        raise InputError(f"cannot read bundle {args.bundle}: {exc}") from exc
    written = export_results(bundle, args.out, out_format=args.format or "csv")
    print(f"wrote {len(written)} files to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "predict": _cmd_predict,
    "metrics": _cmd_metrics,
    "run": _cmd_run,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # single exit path for pipeline failures
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
