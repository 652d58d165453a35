"""Command-line runner: ``uclab run | sweep | validate``.

Exit codes: 0 success, 1 validation error, 2 experiment inapplicable,
3 internal failure.  The output directory is ``--out``, else ``$UCLAB_OUT``,
else ``./uclab-out``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import experiments
from .config import ConfigError, ExperimentConfig, load
from .report import ExperimentReport, atomic_write_many, csv_text, dumps, to_jsonable

EXIT_OK, EXIT_INVALID, EXIT_INAPPLICABLE, EXIT_INTERNAL = 0, 1, 2, 3


class SweepError(ValueError):
    """A sweep request that cannot be expanded into configs."""


def execute(config: ExperimentConfig) -> tuple[ExperimentReport, dict, float | None]:
    """Run one experiment in memory; returns (report, side texts by suffix, headline)."""
    t0 = time.perf_counter()
    try:
        out = experiments.RUNNERS[config.kind](config)
    except experiments.Inapplicable as exc:
        rep = ExperimentReport(config.as_dict(), {"reason": exc.reason, "details": to_jsonable(exc.details)},
                               status="inapplicable", wall_clock=time.perf_counter() - t0)
        return rep, {}, None
    rep = ExperimentReport(config.as_dict(), out.results, out.constants, out.findings,
                           wall_clock=time.perf_counter() - t0)
    rep.results["headline"] = out.headline
    return rep, out.sides, out.headline


def _stem(config: ExperimentConfig) -> str:
    return config.output.get("name", config.kind)


def _files(out_dir: Path, stem: str, rep: ExperimentReport, sides: dict) -> dict:
    files = {out_dir / f"{stem}.json": rep.dumps(),
             out_dir / f"{stem}.timing.json": dumps(rep.timing())}
    for suffix, text in sides.items():
        files[out_dir / f"{stem}.{suffix}"] = text
    return files


def output_dir(config: ExperimentConfig, out: str | None = None) -> Path:
    return Path(out or config.output.get("dir") or os.environ.get("UCLAB_OUT") or "uclab-out")


def run(config: ExperimentConfig, out: str | None = None) -> ExperimentReport:
    """Run, then write the report, timing sidecar and side outputs atomically."""
    rep, sides, _ = execute(config)
    atomic_write_many(_files(output_dir(config, out), _stem(config), rep, sides))
    return rep


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def sweep_configs(config: ExperimentConfig, axis: str, values: list) -> list[ExperimentConfig]:
    if not values:
        raise SweepError("sweep needs at least one value")
    try:
        current = config.get(axis)
    except KeyError:
        current = None
    if current is not None and (isinstance(current, bool) or not isinstance(current, (int, float))):
        raise SweepError(f"axis {axis!r} is not a numeric field")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SweepError(f"sweep value {v!r} is not numeric")
    return [config.with_value(axis, v) for v in values]


def sweep(config: ExperimentConfig, axis: str, values: list, workers: int = 1,
          out: str | None = None) -> list[ExperimentReport]:
    """One report per value plus ``<name>.sweep.csv`` of (value, headline) rows.

    Items run concurrently on up to ``workers`` processes; every file of the
    sweep is written in one atomic batch after all items finish.
    """
    configs = sweep_configs(config, axis, values)
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(execute, configs))
    else:
        done = [execute(c) for c in configs]
    out_dir = output_dir(config, out)
    stem = _stem(config)
    files = {}
    rows = []
    for i, (v, (rep, sides, headline)) in enumerate(zip(values, done)):
        files.update(_files(out_dir, f"{stem}.{i:03d}", rep, sides))
        rows.append([v, headline if headline is not None else "", rep.status])
    files[out_dir / f"{stem}.sweep.csv"] = csv_text([axis, "headline", "status"], rows)
    atomic_write_many(files)
    return [rep for rep, _, _ in done]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uclab", description=__doc__.splitlines()[0])
    p.add_argument("--out", help="output directory (default $UCLAB_OUT)")
    p.add_argument("--workers", type=int, default=1, help="concurrent sweep items")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("config")
    s = sub.add_parser("sweep", help="run a template over values of one numeric field")
    s.add_argument("config")
    s.add_argument("--axis", required=True, help="dotted field path, e.g. thresholds.a")
    s.add_argument("--values", required=True, help="comma-separated values")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    for sp in (r, s):
        sp.add_argument("--out", default=argparse.SUPPRESS)
        sp.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({config.kind})")
            return EXIT_OK
        if args.command == "run":
            reports = [run(config, args.out)]
        else:
            values = [_parse_value(t) for t in args.values.split(",") if t.strip()]
            reports = sweep(config, args.axis, values, args.workers, args.out)
    except (ConfigError, SweepError) as exc:
        problems = getattr(exc, "problems", [("sweep", str(exc))])
        for field_path, msg in problems:
            print(f"invalid {field_path}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"invalid config path: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    for rep in reports:
        if rep.status == "inapplicable":
            print(f"inapplicable: {rep.results['reason']}", file=sys.stderr)
        for f in rep.failures:
            print(f"finding: {json.dumps(to_jsonable(f), sort_keys=True)}", file=sys.stderr)
    if all(rep.status == "inapplicable" for rep in reports):
        return EXIT_INAPPLICABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
