"""Command-line entry point.

    onlinefwer run CONFIG [--seed S] [--replications R] [--out PATH] [--workers K]
    onlinefwer audit CONFIG [--seed S] [--replications R] [--out PATH] [--workers K]

CONFIG is a YAML (or JSON) file; a run manifest written by ``run`` is also
accepted and reproduces the original CSV.  The worker count defaults to the
``ONLINEFWER_WORKERS`` environment variable, then to the number of cores.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, build_procedures, build_scenario, load_config, sweep_points
from .kernels import BACKEND
from .metrics import aggregate
from .sim import run_audit, run_study

log = logging.getLogger("onlinefwer")

AUDIT_TOL = 1e-9

SCENARIO_COLUMNS = {
    "autocorr": ["scenario", "N", "n", "pi1", "rho", "effect", "lam", "m"],
    "platform": ["scenario", "N", "n", "pi1", "sigma", "rate", "entry_spacing", "effect", "lam", "m"],
}
RESULT_COLUMNS = ["procedure", "fwer_hat", "se_fwer", "power_hat", "se_power", "R", "seed"]
AUDIT_COLUMNS = ["procedure", "alpha", "max_partial_sum", "exceed_fraction", "flagged", "R", "seed"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _scenario_values(scenario) -> dict:
    vals = {"scenario": scenario.kind, "m": scenario.plan(scenario.n)}
    for col in SCENARIO_COLUMNS[scenario.kind][1:]:
        if col == "effect":
            vals[col] = float(getattr(scenario, "alt_mean", scenario.effect))
        elif col != "m":
            vals[col] = getattr(scenario, col)
    return vals


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in header])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _apply_overrides(cfg, args):
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.replications is not None:
        updates["replications"] = args.replications
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["audit_output" if args.command == "audit" else "output"] = args.out
    if updates:
        cfg = cfg.model_validate({**cfg.model_dump(), **updates})
    return cfg


def cmd_run(cfg) -> Path:
    header = SCENARIO_COLUMNS[cfg.scenario.kind] + RESULT_COLUMNS
    rows = []
    for point in sweep_points(cfg):
        scenario = build_scenario(cfg, point)
        procs = build_procedures(cfg, scenario)
        log.info("running %s %s: %d replications x %d procedures", scenario.kind, point, cfg.replications, len(procs))
        outcomes = run_study(scenario, procs, cfg.replications, seed=cfg.seed, workers=cfg.workers)
        base = _scenario_values(scenario)
        for label, outs in outcomes.items():
            rows.append({**base, "procedure": label, **aggregate(outs).as_row(), "seed": cfg.seed})
    out = Path(cfg.output)
    _write_csv(out, header, rows)
    manifest = {
        "library": "onlinefwer",
        "library_version": __version__,
        "backend": BACKEND,
        "command": "run",
        "config": cfg.model_dump(mode="json"),
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def cmd_audit(cfg) -> Path:
    header = SCENARIO_COLUMNS[cfg.scenario.kind] + AUDIT_COLUMNS
    rows = []
    for point in sweep_points(cfg):
        scenario = build_scenario(cfg, point)
        procs = build_procedures(cfg, scenario)
        sums = run_audit(scenario, procs, cfg.replications, seed=cfg.seed, workers=cfg.workers)
        base = _scenario_values(scenario)
        for label, vals in sums.items():
            alpha = procs[label].alpha
            exceed = float((vals > alpha + AUDIT_TOL).mean())
            if exceed > 0:
                log.warning("%s: budget partial sum exceeds alpha in %.1f%% of replications", label, 100 * exceed)
            rows.append({
                **base,
                "procedure": label,
                "alpha": alpha,
                "max_partial_sum": float(vals.max()),
                "exceed_fraction": exceed,
                "flagged": exceed > 0,
                "R": cfg.replications,
                "seed": cfg.seed,
            })
    out = Path(cfg.audit_output or Path(cfg.output).with_suffix("").as_posix() + "_audit.csv")
    _write_csv(out, header, rows)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinefwer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "simulate FWER and power"), ("audit", "check the budget rule along simulated streams")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML/JSON configuration or run manifest")
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--workers", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # pydantic errors from overrides
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = cmd_run(cfg) if args.command == "run" else cmd_audit(cfg)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
