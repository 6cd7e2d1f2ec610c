"""Command-line front end.

    laserclock run <experiment> [--config FILE] [--seed N] [--out DIR] [--format csv,json] [--<key> VALUE ...]
    laserclock report DIR

Configuration is a plain ``key = value`` file; command-line ``--key value``
pairs override it.  Exit codes: 0 pass, 2 configuration error, 3 tolerance
failure, 4 lock-loss budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import EXPERIMENTS, ExperimentResult, Status

log = logging.getLogger("laserclock")

OUTPUT_ENV = "LASERCLOCK_OUTPUT_DIR"
CONFIG_ERROR = 2
RESERVED = {"experiment", "seed", "out", "format"}


class ConfigError(ValueError):
    pass


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    return text


def read_config_file(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = _parse_value(value)
    return cfg


def _parse_overrides(tokens: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for {tok}")
            value = tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = _parse_value(value)
    return out


def resolve_config(experiment: str, file_cfg: dict, overrides: dict, seed=None, out=None, formats=None) -> dict:
    """Merge defaults < config file < command line, rejecting unknown keys."""
    merged = dict(file_cfg)
    merged.update(overrides)
    name = merged.pop("experiment", experiment)
    if experiment and name != experiment:
        raise ConfigError(f"config file is for experiment {name!r}, not {experiment!r}")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    defaults = EXPERIMENTS[name].defaults
    params = dict(defaults)
    for key, value in merged.items():
        if key in RESERVED:
            continue
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} for experiment {name!r}")
        params[key] = value
    for key in ("gain",):
        if key in params and params[key] not in ("hl", "standard", "both"):
            raise ConfigError(f"gain must be hl, standard or both, got {params[key]!r}")
    for key, value in params.items():
        for v in value if isinstance(value, list) else [value]:
            if isinstance(v, float) and not np.isfinite(v):
                raise ConfigError(f"{key} must be finite")

    seed = merged.get("seed", 0) if seed is None else seed
    fmt = formats if formats is not None else merged.get("format", ["csv", "json"])
    fmt = [fmt] if isinstance(fmt, str) else list(fmt)
    if not set(fmt) <= {"csv", "json"} or not fmt:
        raise ConfigError(f"formats must be a subset of csv,json, got {fmt}")
    out = out if out is not None else merged.get("out") or os.environ.get(OUTPUT_ENV, "runs")
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return {"experiment": name, "params": params, "seed": seed, "out": str(out), "format": fmt}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return str(v)


def _write_csv(path: Path, records: list[dict]) -> None:
    if not records:
        path.write_text("")
        return
    keys = list(records[0])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for rec in records:
            w.writerow([_fmt(rec.get(k, "")) for k in keys])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def run_directory(config: dict) -> Path:
    key = json.dumps({"params": config["params"], "seed": config["seed"]}, sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:10]
    return Path(config["out"]) / f"{config['experiment']}-seed{config['seed']}-{digest}"


def summary_text(config: dict, result: ExperimentResult) -> str:
    lines = [f"experiment: {config['experiment']}  seed: {config['seed']}", ""]
    width = max([len(r.quantity) for r in result.rows] + [8])
    lines.append(f"{'quantity':<{width}}  {'equation':<26} {'theory':>14} {'measured':>14}  tolerance        result")
    for r in result.rows:
        lines.append(
            f"{r.quantity:<{width}}  {r.equation:<26} {r.theory:>14.6g} {r.measured:>14.6g}  "
            f"{r.tolerance:<16} {'PASS' if r.passed else 'FAIL'}"
        )
    if result.lock_loss:
        lines.append("lock-loss budget exceeded")
    lines += ["", f"overall: {'PASS' if result.passed else 'FAIL'}"]
    return "\n".join(lines) + "\n"


def write_artifacts(config: dict, result: ExperimentResult) -> Path:
    rundir = run_directory(config)
    rundir.mkdir(parents=True, exist_ok=True)
    rows = [r.as_dict() for r in result.rows]
    if "csv" in config["format"]:
        _write_csv(rundir / "results.csv", rows)
        for name, records in result.tables.items():
            _write_csv(rundir / f"{name}.csv", records)
    if "json" in config["format"]:
        # the output location lives in the manifest so result files stay relocatable
        echoed = {k: v for k, v in config.items() if k != "out"}
        payload = {"config": echoed, "results": rows, "tables": result.tables, "pass": result.passed,
                   "status": int(result.status)}
        (rundir / "results.json").write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    for name, (xlabel, ylabel, points) in result.plots.items():
        body = [f"# {xlabel} {ylabel}"] + [f"{_fmt(x)} {_fmt(y)}" for x, y in points]
        (rundir / f"{name}.dat").write_text("\n".join(body) + "\n")
    (rundir / "summary.txt").write_text(summary_text(config, result))
    manifest = {
        "config": config, "tool": "laserclock", "version": __version__,
        "python": platform.python_version(), "numpy": np.__version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "pass": result.passed, "status": int(result.status),
        "criteria": [{"quantity": r.quantity, "equation": r.equation, "pass": r.passed} for r in result.rows],
    }
    (rundir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return rundir


def run(config: dict) -> tuple[Status, Path, ExperimentResult]:
    exp = EXPERIMENTS[config["experiment"]]
    result = exp.run(config["params"], config["seed"])
    rundir = write_artifacts(config, result)
    return result.status, rundir, result


def report(directory) -> tuple[int, dict]:
    """Aggregate PASS/FAIL over every run directory found under ``directory``."""
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    candidates = sorted({p.parent for p in root.rglob("*") if p.name in ("manifest.json", "results.json")})
    runs = []
    for d in candidates:
        mpath = d / "manifest.json"
        if not mpath.exists():
            log.warning("skipping %s: no manifest", d)
            continue
        manifest = json.loads(mpath.read_text())
        runs.append({"run": str(d.relative_to(root)), "experiment": manifest["config"]["experiment"],
                     "pass": bool(manifest["pass"]), "status": manifest.get("status", 0),
                     "criteria": manifest.get("criteria", [])})
    if not runs:
        raise ConfigError("no runs found")
    failing = [
        {"run": r["run"], "quantity": c["quantity"], "equation": c["equation"]}
        for r in runs for c in r["criteria"] if not c["pass"]
    ]
    summary = {
        "runs": runs,
        "pass_count": sum(r["pass"] for r in runs),
        "fail_count": sum(not r["pass"] for r in runs),
        "failing_criteria": failing,
        "pass": all(r["pass"] for r in runs),
    }
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    lines = [f"runs: {len(runs)}  PASS: {summary['pass_count']}  FAIL: {summary['fail_count']}"]
    for r in runs:
        lines.append(f"  {'PASS' if r['pass'] else 'FAIL'}  {r['run']}")
    if failing:
        lines.append("failing criteria:")
        lines += [f"  {f['run']}: {f['quantity']} [{f['equation']}]" for f in failing]
    (root / "summary.txt").write_text("\n".join(lines) + "\n")
    if summary["pass"]:
        code = 0
    else:
        code = max(r["status"] for r in runs) or int(Status.TOLERANCE)
    return code, summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laserclock", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p_run.add_argument("--config", help="key = value configuration file")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./runs)")
    p_run.add_argument("--format", help="comma-separated subset of csv,json")
    p_rep = sub.add_parser("report", help="summarise all runs in a directory")
    p_rep.add_argument("directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "report":
            if extra:
                raise ConfigError(f"unexpected arguments {extra}")
            code, summary = report(args.directory)
            print((Path(args.directory) / "summary.txt").read_text(), end="")
            return code
        file_cfg = read_config_file(args.config) if args.config else {}
        formats = args.format.split(",") if args.format else None
        config = resolve_config(args.experiment, file_cfg, _parse_overrides(extra), args.seed, args.out, formats)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    try:
        status, rundir, result = run(config)
    except ValueError as exc:
        # numerical preconditions (truncation, N too small, ...) are configuration problems
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    print(summary_text(config, result), end="")
    print(f"artifacts: {rundir}")
    return int(status)


if __name__ == "__main__":
    sys.exit(main())
