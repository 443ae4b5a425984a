"""Command-line entry point.

Every subcommand writes its CSV tables, a ``summary.json`` and a
``manifest.json`` into the output directory.  The exit status is 0 when all
checked invariants hold, 1 when one fails, and 2 on configuration or solver
errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as config_mod
from .errors import ConfigError, SolverError, VortexSheetError
from .evolution import solve_nonlinear
from .experiments import (
    ExperimentConfig,
    epsilon_prime_table,
    run_continuous_dependence,
    run_equivalence_check,
    run_illposed_probe,
    run_resolution_study,
    run_triangulation,
    solve_family,
)
from .inequalities import HARD, SAMPLERS, run_campaign

log = logging.getLogger("vortexsheet")


# -- output helpers ----------------------------------------------------------------

def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def rows_to_csv(rows, columns=None) -> str:
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of every setting that can change a result; the output location is left out."""
    settings = cfg.to_dict()
    settings.pop("output_dir", None)
    text = json.dumps(_jsonable(settings), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Output:
    """Collects files and invariant results for one subcommand."""

    def __init__(self, directory: Path, command: str, cfg: ExperimentConfig):
        self.dir = directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.files: list[str] = []
        self.invariants: dict[str, bool] = {}
        self.summary: dict = {}

    def write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text, encoding="utf-8")
        self.files.append(name)

    def check(self, name: str, ok) -> None:
        self.invariants[name] = bool(ok)
        if not ok:
            log.warning("invariant failed: %s", name)

    @property
    def passed(self) -> bool:
        return all(self.invariants.values())

    def finish(self, elapsed: float, error: str | None = None) -> None:
        summary = {"command": self.command, "passed": self.passed and error is None,
                   "invariants": self.invariants, "error": error,
                   "elapsed_seconds": elapsed, **self.summary}
        self.write("summary.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
        manifest = {
            "command": self.command,
            "config": self.cfg.to_dict(),
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "versions": {"artifact": _version(), "numpy": np.__version__,
                         "python": platform.python_version()},
            "files": sorted(self.files + ["manifest.json"]),
        }
        (self.dir / "manifest.json").write_text(
            json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- subcommands ------------------------------------------------------------------------

def cmd_solve(cfg: ExperimentConfig, out: Output, args) -> None:
    d0, d1 = cfg.base_data()
    try:
        traj = solve_nonlinear(cfg.base, d0, d1)
    except SolverError as exc:
        if exc.trajectory is not None:
            out.write("trajectory.csv", exc.trajectory.csv_text())
        out.summary["status"] = type(exc).__name__
        out.check("run_completed", False)
        return
    out.write("trajectory.csv", traj.csv_text())
    out.summary.update(traj.summary())
    out.check("run_completed", traj.status == "ok")
    out.check("mean_conserved", np.max(np.abs(traj.column("mean_phi"))) <= 1e-12)
    out.check("margin_above_delta", np.min(traj.column("margin_min")) >= cfg.base.delta)


def cmd_equiv(cfg: ExperimentConfig, out: Output, args) -> None:
    rows = run_equivalence_check(cfg.equiv_samples, cfg.base.K, cfg.seed, cfg.base.mu)
    out.write("equivalence.csv", rows_to_csv(rows))
    worst = max(max(r["dev_AB"], r["dev_AC"]) for r in rows)
    out.summary["max_relative_deviation"] = worst
    out.check("forms_agree", worst <= 1e-10)


def cmd_ineq(cfg: ExperimentConfig, out: Output, args) -> None:
    names = args.inequality or list(cfg.inequalities) or list(SAMPLERS)
    for name in names:
        if name not in SAMPLERS:
            raise ConfigError(f"unknown inequality {name!r}")
    reports = {}
    for name in names:
        rep = run_campaign(name, cfg.samples, cfg.K_levels, cfg.seed)
        out.write(f"{name}_samples.csv", rep.csv_text())
        out.write(f"{name}_report.json", rep.to_json() + "\n")
        reports[name] = {"verdict": rep.verdict, "growth": rep.growth,
                         "max_ratio": rep.max_ratio, "degenerate": rep.degenerate}
        if name in HARD:
            out.check(f"{name}_ratio_le_1", rep.max_ratio <= 1.0 + 1e-12)
        else:
            out.check(f"{name}_bounded", rep.verdict == "bounded")
    out.summary["campaigns"] = reports


def cmd_contdep(cfg: ExperimentConfig, out: Output, args) -> None:
    family = solve_family(cfg)
    out.write("run_base.csv", family.base.csv_text())
    for n, traj in family.runs.items():
        out.write(f"run_n{n}.csv", traj.csv_text())
    records = run_continuous_dependence(cfg, family)
    rows = [{**asdict(r), "weak_le_strong": r.weak_le_strong} for r in records]
    out.write("dependence.csv", rows_to_csv(rows))
    out.summary["horizon"] = family.config.T
    out.summary["dt"] = family.config.dt
    out.summary["records"] = rows
    out.check("distances_finite", all(math.isfinite(r.strong_distance) and math.isfinite(r.weak_distance)
                                      for r in records))
    out.check("weak_le_strong", all(r.weak_le_strong for r in records))


def cmd_triangulate(cfg: ExperimentConfig, out: Output, args) -> None:
    n = args.n or cfg.triangulate_n or cfg.n_list[0]
    eps_list = args.epsilon or cfg.epsilon_list
    n_list = tuple(sorted(set(cfg.n_list) | {n}))
    family = solve_family(cfg, n_list=n_list)
    records = run_continuous_dependence(cfg, family)
    reports = [run_triangulation(cfg, n, eps, family) for eps in eps_list]
    out.write("triangulation.csv", rows_to_csv([r.to_dict() for r in reports]))
    C3 = max(r.C3_fitted for r in reports)
    table = epsilon_prime_table(cfg, family, records, C3)
    out.write("epsilon_prime.csv", rows_to_csv(table))
    out.summary.update({"n": n, "C3_fitted": C3, "horizon": family.config.T,
                        "reports": [r.to_dict() for r in reports], "epsilon_prime": table})
    out.check("triangle_consistent", all(r.triangle_ok for r in reports))


def cmd_illposed(cfg: ExperimentConfig, out: Output, args) -> None:
    rows = run_illposed_probe(cfg.base.mu, cfg.illposed_a, cfg.illposed_k_list, cfg.illposed_T_short)
    out.write("illposed.csv", rows_to_csv([{"k": k, "rate": lam} for k, lam in rows]))
    out.summary["rates"] = dict(rows)
    out.check("rates_finite", all(math.isfinite(lam) for _, lam in rows))


def cmd_resolution(cfg: ExperimentConfig, out: Output, args) -> None:
    rows = run_resolution_study(cfg)
    out.write("resolution.csv", rows_to_csv(rows))
    out.summary["rows"] = rows
    out.check("distances_finite", all(math.isfinite(r["distance"]) for r in rows))


COMMANDS = {
    "solve": (cmd_solve, "integrate the nonlinear problem from the configured data"),
    "equiv-check": (cmd_equiv, "compare the three acceleration forms on random data"),
    "ineq-lab": (cmd_ineq, "run inequality campaigns"),
    "cont-dep": (cmd_contdep, "continuous-dependence experiment"),
    "triangulate": (cmd_triangulate, "triangulation through the regularized linear problem"),
    "illposed": (cmd_illposed, "growth rates on a non-hyperbolic frozen background"),
    "resolution": (cmd_resolution, "spectral convergence study in K"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vortexsheet", description=__doc__.splitlines()[0])
    parser.add_argument("--config", "-c", help="INI configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    parser.add_argument("--out", "-o", help="output directory (overrides output_dir)")
    parser.add_argument("--print-config", action="store_true",
                        help="print the documented default configuration and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        if name == "ineq-lab":
            p.add_argument("--inequality", action="append", help="campaign id (repeatable)")
        if name == "triangulate":
            p.add_argument("--n", type=int, help="perturbation index")
            p.add_argument("--epsilon", type=float, action="append", help="regularization level")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.print_config:
        sys.stdout.write(config_mod.default_text())
        return 0
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    try:
        overrides = dict(config_mod.parse_override(item) for item in args.set)
        if args.out:
            overrides["output_dir"] = args.out
        cfg = config_mod.load(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Output(Path(cfg.output_dir), args.command, cfg)
    func = COMMANDS[args.command][0]
    start = time.perf_counter()
    try:
        func(cfg, out, args)
    except VortexSheetError as exc:
        out.finish(time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out.finish(time.perf_counter() - start)
    for name, ok in out.invariants.items():
        log.info("%s: %s", name, "ok" if ok else "FAILED")
    return 0 if out.passed else 1


if __name__ == "__main__":
    sys.exit(main())
