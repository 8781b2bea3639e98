"""Command-line interface.

Subcommands: ``run <config>``, ``sweep <config-dir>``, ``report <logs...>``
and ``theory <inputs-file>``.  Exit codes: 0 success, 1 configuration
error, 2 runtime failure.  The output directory comes from --out or the
BYZSIM_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .logio import LogFormatError, read_log, write_comparison_table, write_log
from .simulation import run_experiment, sweep
from .theory import TheoryInputs, theorem2_bound, theorem2_eta, theory_report
from .validation import ConfigError, SimulationError

logger = logging.getLogger("byzsim")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads per round")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", type=Path)
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run every *.json config in a directory")
    p_sweep.add_argument("config_dir", type=Path)
    _add_common(p_sweep)

    p_report = sub.add_parser("report", help="summarize existing run logs")
    p_report.add_argument("logs", type=Path, nargs="+")
    _add_common(p_report)

    p_theory = sub.add_parser("theory", help="evaluate the convergence formulas")
    p_theory.add_argument("inputs", type=Path)
    _add_common(p_theory)
    return parser


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get("BYZSIM_OUT", "runs"))


def _emit(args, message: str) -> None:
    if not args.quiet:
        print(message)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    log = run_experiment(cfg, threads=max(1, args.threads))
    out = _out_dir(args) / f"{cfg.name}_seed{cfg.seed}.jsonl"
    write_log(log, out)
    _emit(args, f"wrote {out}")
    s = log.summary
    _emit(args, f"A_ini={s['a_ini']:.4f}  A_att={s['a_att']:.4f}  "
                f"negative_impact={s['negative_impact']:.4f}")
    _emit(args, s["theory_report"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    paths = sorted(args.config_dir.glob("*.json"))
    if not paths:
        raise ConfigError(str(args.config_dir), "no *.json configs found")
    configs = []
    for path in paths:
        cfg = load_config(path)
        if args.seed is not None:
            cfg.seed = args.seed
        configs.append(cfg)
    logs, table = sweep(configs, threads=max(1, args.threads))
    out_dir = _out_dir(args)
    for cfg, log in zip(configs, logs):
        if log is not None:
            write_log(log, out_dir / f"{cfg.name}_seed{cfg.seed}.jsonl")
    table_path = out_dir / "comparison.csv"
    write_comparison_table(table, table_path)
    _emit(args, f"wrote {table_path} ({len(configs)} configs)")
    failures = sum(log is None for log in logs)
    if failures:
        _emit(args, f"{failures} config(s) failed; see log output")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for path in args.logs:
        log = read_log(path)
        cfg_doc = log.config
        rows.append({
            "name": cfg_doc.get("name", path.stem),
            "defense": cfg_doc.get("defense", {}).get("mode", ""),
            "attack": cfg_doc.get("attack", {}).get("kind") or "none",
            "malicious_fraction": cfg_doc.get("malicious_fraction", ""),
            "seed": cfg_doc.get("seed", ""),
            "a_ini": log.summary.get("a_ini", ""),
            "a_att": log.summary.get("a_att", ""),
            "negative_impact": log.summary.get("negative_impact", ""),
        })
    out = _out_dir(args) / "report.csv"
    write_comparison_table(rows, out)
    _emit(args, f"wrote {out}")
    for row in rows:
        _emit(args, f"{row['name']}: I={row['negative_impact']}")
    return EXIT_OK


def cmd_theory(args) -> int:
    try:
        doc = json.loads(args.inputs.read_text())
    except FileNotFoundError:
        raise ConfigError(str(args.inputs), "inputs file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(args.inputs), f"invalid JSON: {exc}") from None
    try:
        inputs = TheoryInputs(**doc)
    except TypeError as exc:
        raise ConfigError(str(args.inputs), str(exc)) from None
    rate = theorem2_eta(inputs)
    _emit(args, theory_report(inputs))
    print(json.dumps({
        "eta": rate.eta, "beta": rate.beta, "bound": theorem2_bound(inputs),
    }, sort_keys=True))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report, "theory": cmd_theory}
    try:
        return handlers[args.command](args)
    except (ConfigError, LogFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
