"""Command-line front end: ``run``, ``verify`` and ``sweep``.

Every subcommand is a thin wrapper around a library function of the same
name (:func:`cmd_run`, :func:`cmd_verify`, :func:`cmd_sweep`) so that all
behavior is reachable without the shell.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .config import ConfigError, ConfigFileError, ConfigSchemaError, RunConfig, config_from_dict, parse_config
from .driver import CSV_COLUMNS, RunResult, TrajectoryRow, run
from .instances import DEFAULT_SIZES
from .verify import VerifySuiteReport, run_verify

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "LITESPAWN_OUTPUT_DIR"
FAILURE_MARKER = "#failure"
EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
SWEEP_COLUMNS = ("point", "status", "final_exact_deviation", "final_bound_integral", "total_spawns")


def format_float(x: float | None) -> str:
    """17 significant digits, enough for an exact binary64 round trip; ``None`` becomes empty."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _row_fields(row: TrajectoryRow) -> list[str]:
    return [
        format_float(row.t), format_float(row.norm), format_float(row.energy), format_float(row.lite_sq),
        format_float(row.residual_norm_sq), format_float(row.energy_variance), format_float(row.gauge_velocity_sq),
        format_float(row.bound_integral), format_float(row.exact_deviation),
        ";".join(str(m) for m in row.m_dims), format_float(row.min_natpop),
    ]


def read_trajectory(path) -> tuple[list[TrajectoryRow], str | None]:
    """Parse a trajectory CSV back into rows plus the failure message, if any."""
    rows: list[TrajectoryRow] = []
    failure = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected trajectory header {header}")
        for rec in reader:
            if rec and rec[0] == FAILURE_MARKER:
                failure = rec[1] if len(rec) > 1 else ""
                continue
            f = [float(x) if x else None for x in rec[:9]]
            rows.append(TrajectoryRow(
                t=f[0], norm=f[1], energy=f[2], lite_sq=f[3], residual_norm_sq=f[4], energy_variance=f[5],
                gauge_velocity_sq=f[6], bound_integral=f[7], exact_deviation=f[8],
                m_dims=tuple(int(m) for m in rec[9].split(";")), min_natpop=float(rec[10]),
            ))
    return rows, failure


def summarize(result: RunResult, cfg: RunConfig) -> dict[str, Any]:
    last = result.rows[-1] if result.rows else None
    return {
        "status": "failed" if result.failure else "ok",
        "failure": result.failure,
        "final_time": last.t if last else None,
        "final_exact_deviation": result.final_exact_deviation,
        "final_bound_integral": result.final_bound,
        "final_lite_sq": last.lite_sq if last else None,
        "max_bound_violation": result.ledger.max_violation if cfg.oracle_compare else None,
        "bound_holds": result.ledger.bound_holds() if cfg.oracle_compare else None,
        "pruning_jumps": result.ledger.jumps,
        "event_count": len(result.events),
        "final_m_dims": list(last.m_dims) if last else None,
        "steps": len(result.rows) - 1,
        "config": cfg.to_dict(),
    }


@dataclass
class RunOutcome:
    result: RunResult
    summary: dict[str, Any]
    output_dir: Path
    wall_time: float

    @property
    def exit_code(self) -> int:
        return EXIT_NUMERICAL if self.result.failure else EXIT_OK


def resolve_output_dir(cfg: RunConfig, override=None) -> Path:
    """Explicit override, then the environment variable, then the config's own ``output.dir``."""
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else Path(cfg.output.dir)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def cmd_run(config: RunConfig | str | os.PathLike, output_dir=None, record_wall_time: bool = False) -> RunOutcome:
    """Run one propagation and write the trajectory CSV, events JSON and summary JSON.

    Rows are streamed to the CSV as they are produced, so a failing run
    leaves everything up to the failure plus a marker row. Wall time is
    returned but only written to the summary when `record_wall_time` is set,
    keeping the default outputs byte-reproducible.
    """
    cfg = config if isinstance(config, RunConfig) else parse_config(config)
    out = resolve_output_dir(cfg, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with open(out / cfg.output.trajectory, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        result = run(cfg, on_row=lambda row: writer.writerow(_row_fields(row)))
        if result.failure:
            writer.writerow([FAILURE_MARKER, result.failure])
    wall = time.perf_counter() - start
    _json_dump([e.to_dict() for e in result.events], out / cfg.output.events)
    summary = summarize(result, cfg)
    if record_wall_time:
        summary["wall_time_s"] = wall
    _json_dump(summary, out / cfg.output.summary)
    return RunOutcome(result, summary, out, wall)


def cmd_verify(seed: int = 0, sizes: Sequence[int] = DEFAULT_SIZES, count: int = 12) -> VerifySuiteReport:
    return run_verify(seed=seed, sizes=sizes, count=count)


def _set_dotted(data: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigSchemaError(f"grid key {dotted!r} descends into a non-object")
    node[parts[-1]] = value


def expand_grid(grid: dict[str, list]) -> list[dict[str, Any]]:
    """Cartesian product of the grid, keys in file order, last key varying fastest."""
    if not grid or any(not isinstance(v, list) or not v for v in grid.values()):
        raise ConfigSchemaError("grid must map each parameter to a nonempty list of values")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_child(args) -> dict[str, Any]:
    index, template, point, out = args
    data = copy.deepcopy(template)
    try:
        for key, value in point.items():
            _set_dotted(data, key, value)
        cfg = config_from_dict(data)
        outcome = cmd_run(cfg, output_dir=out)
    except ConfigError as exc:
        return {"point": index, "status": f"config error: {exc}"}
    except Exception as exc:  # a crashed child marks its row; the sweep continues
        return {"point": index, "status": f"error: {type(exc).__name__}: {exc}"}
    s = outcome.summary
    return {
        "point": index,
        "status": "ok" if s["status"] == "ok" else f"failed: {s['failure']}",
        "final_exact_deviation": s["final_exact_deviation"],
        "final_bound_integral": s["final_bound_integral"],
        "total_spawns": s["event_count"],
    }


def cmd_sweep(template: dict | str | os.PathLike, grid: dict | str | os.PathLike, output_dir=None,
              jobs: int | None = None, aggregate_name: str = "sweep.csv") -> list[dict[str, Any]]:
    """One run per grid point (concurrently), then a deterministic aggregate CSV ordered by grid index."""
    template = _load_json(template, "template")
    grid = _load_json(grid, "grid")
    points = expand_grid(grid)
    base = Path(output_dir) if output_dir is not None else Path(os.environ.get(OUTPUT_DIR_ENV) or
                                                                  template.get("output", {}).get("dir", "."))
    base.mkdir(parents=True, exist_ok=True)
    tasks = [(i, template, p, base / f"point_{i:03d}") for i, p in enumerate(points)]
    if jobs == 1 or len(tasks) == 1:
        rows = [_sweep_child(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_child, tasks))
    rows.sort(key=lambda r: r["point"])
    keys = list(grid)
    with open(base / aggregate_name, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["point", *keys, *SWEEP_COLUMNS[1:]])
        for row, point in zip(rows, points):
            writer.writerow([
                row["point"], *(json.dumps(point[k]) for k in keys), row["status"],
                format_float(row.get("final_exact_deviation")), format_float(row.get("final_bound_integral")),
                "" if row.get("total_spawns") is None else row["total_spawns"],
            ])
    for row, point in zip(rows, points):
        row["parameters"] = point
    return rows


def _load_json(source, what: str) -> dict:
    if isinstance(source, dict):
        return source
    path = Path(source)
    if not path.is_file():
        raise ConfigFileError(f"{what} file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigSchemaError(f"{what} must be a JSON object")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="litespawn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log spawn events and step rejections")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="propagate one configuration")
    p_run.add_argument("config", help="JSON run configuration")
    p_run.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_DIR_ENV} or output.dir)")
    p_run.add_argument("--record-wall-time", action="store_true", help="add wall time to summary.json")

    p_ver = sub.add_parser("verify", help="run the seeded identity suite")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES),
                       help="primitive basis sizes to draw from")
    p_ver.add_argument("--count", type=int, default=12, help="number of random instances")
    p_ver.add_argument("--json", action="store_true", help="print the report as JSON instead of a table")

    p_sw = sub.add_parser("sweep", help="run a configuration template over a parameter grid")
    p_sw.add_argument("template", help="JSON run configuration used as the base of every point")
    p_sw.add_argument("grid", help='JSON object mapping dotted keys to value lists, e.g. {"model.coupling": [0, 0.1]}')
    p_sw.add_argument("--output-dir")
    p_sw.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            outcome = cmd_run(args.config, args.output_dir, args.record_wall_time)
            s = outcome.summary
            print(f"wrote {outcome.output_dir}: {s['steps']} steps, {s['event_count']} spawn events, "
                  f"final deviation {format_float(s['final_exact_deviation']) or 'n/a'}, "
                  f"bound {format_float(s['final_bound_integral'])}, wall time {outcome.wall_time:.2f} s")
            if outcome.result.failure:
                print(f"propagation failed: {outcome.result.failure}", file=sys.stderr)
            return outcome.exit_code
        if args.command == "verify":
            report = cmd_verify(args.seed, args.sizes, args.count)
            print(json.dumps(report.to_dict(), indent=2) if args.json else report.table())
            return EXIT_OK if report.passed else EXIT_VERIFY_FAILED
        rows = cmd_sweep(args.template, args.grid, args.output_dir, args.jobs)
        failed = [r for r in rows if r["status"] != "ok"]
        print(f"sweep: {len(rows)} points, {len(failed)} failed")
        return EXIT_NUMERICAL if failed else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
