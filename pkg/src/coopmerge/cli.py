"""Command-line entry point: ``simulate``, ``grid`` and ``export``.

Exit codes are 0 on success, 1 for configuration errors (bad flags or
config file contents) and 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import zipfile
from pathlib import Path

from .errors import ConfigError
from .reporting.export import FORMATS, export_trajectories
from .reporting.grid import PAPER_MAINLINE, PAPER_RAMP, run_grid
from .reporting.metrics import compute_metrics, safety_summary
from .sim.config import ErrorInjection, ScenarioConfig
from .sim.engine import run
from .sim.trace import TraceLog

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
TRACE_FILE = "trace.npz"


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as configuration errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_seeds(text: str) -> list[int]:
    """Parse ``"1..10"``, ``"1,4,7"`` or a mix such as ``"1..3,9"``."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ValueError(part)
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return sorted(set(seeds))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopmerge", description="On-ramp merging simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run one scenario and save its trace")
    sim.add_argument("--config", type=Path, help="JSON file mirroring ScenarioConfig")
    sim.add_argument("--mainline-flow", type=float)
    sim.add_argument("--ramp-flow", type=float)
    sim.add_argument("--strategy", choices=["uncontrolled", "preemptive"])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--duration", type=float)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--cat-share", type=float)
    sim.add_argument("--inject-errors", action="store_true", default=None)
    sim.add_argument("--out", type=Path, required=True, help="output directory")

    grid = sub.add_parser("grid", help="paired uncontrolled/preemptive runs over a flow grid")
    grid.add_argument("--config", type=Path, help="JSON file mirroring ScenarioConfig")
    grid.add_argument("--mainline", type=_float_list, default=list(PAPER_MAINLINE))
    grid.add_argument("--ramp", type=_float_list, default=list(PAPER_RAMP))
    grid.add_argument("--seeds", type=parse_seeds, default=[1, 2, 3])
    grid.add_argument("--duration", type=float)
    grid.add_argument("--inject-errors", action="store_true", default=None)
    grid.add_argument("--workers", type=int, default=1)
    grid.add_argument("--out", type=Path, required=True, help="output directory")

    exp = sub.add_parser("export", help="convert a saved trace to CSV, NDJSON or SVG")
    exp.add_argument("--trace", type=Path, required=True)
    exp.add_argument("--format", choices=FORMATS, required=True)
    exp.add_argument("--out", type=Path, help="destination file (default: next to the trace)")
    exp.add_argument("--lanes", help="comma-separated lane names to keep")
    return parser


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    """Config file values (if any) overridden by the flags that were given."""
    data = {}
    if getattr(args, "config", None) is not None:
        text = args.config.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "mainline_flow": getattr(args, "mainline_flow", None),
        "ramp_flow": getattr(args, "ramp_flow", None),
        "strategy": getattr(args, "strategy", None),
        "seed": getattr(args, "seed", None),
        "duration": getattr(args, "duration", None),
        "dt": getattr(args, "dt", None),
        "cat_share": getattr(args, "cat_share", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ScenarioConfig.from_dict(data)
    if getattr(args, "inject_errors", None):
        cfg = cfg.replace(error_injection=ErrorInjection(True, cfg.error_injection.pos_bound, cfg.error_injection.trk_bound))
    return cfg


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    trace = run(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    trace.save(args.out / TRACE_FILE)
    _write(args.out / "config.json", cfg.to_json() + "\n")
    metrics = compute_metrics(trace)
    summary = {"metrics": metrics.to_dict(), "safety": safety_summary(trace), "digest": trace.digest()}
    _write(args.out / "metrics.json", json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    m = metrics
    print(
        f"{cfg.strategy.value} {cfg.mainline_flow:g}/{cfg.ramp_flow:g} seed {cfg.seed}: "
        f"mainline delay {m.avg_delay_mainline:.2f} s, ramp delay {m.avg_delay_ramp:.2f} s, "
        f"collisions {m.collision_count}"
    )
    return EXIT_OK


def cmd_grid(args) -> int:
    base = load_config(args)
    report = run_grid(base, args.mainline, args.ramp, seeds=args.seeds, workers=max(1, args.workers))
    args.out.mkdir(parents=True, exist_ok=True)
    text = report.to_text()
    _write(args.out / "grid.txt", text)
    _write(args.out / "grid.json", report.to_json() + "\n")
    print(text, end="" if text.endswith("\n") else "\n")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        trace = TraceLog.load(args.trace)
    except (ValueError, KeyError, zipfile.BadZipFile) as exc:
        raise OSError(f"cannot read trace {args.trace}: {exc}") from exc
    out = args.out or args.trace.with_suffix("." + args.format)
    lanes = [s.strip() for s in args.lanes.split(",")] if args.lanes else None
    try:
        export_trajectories(trace, args.format, out, lanes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(out)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "grid": cmd_grid, "export": cmd_export}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
