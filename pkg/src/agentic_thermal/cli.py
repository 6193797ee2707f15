"""Command-line entry point: ``agentic-thermal <command> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ConfigInvalid, Environment, ExperimentConfig, Mode, load_config
from .harness import (REPORT_NAME, compare, format_comparison, format_report, read_report,
                      run_repeats)
from .supervisor import SupervisorConfig, recommend_alpha
from .supervisor.loop import RECOMMENDATION_COLUMNS, replay_summaries
from .telemetry import WindowMetrics, read_summaries

PROG = "agentic-thermal"


def _cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_overrides(seed=args.seed, mode=args.mode, environment=args.env,
                             output_dir=args.out)
    if args.repeats is not None:
        cfg = cfg.with_overrides(repeats=args.repeats)
    report, results = run_repeats(cfg.resolved())
    print(format_report(report), end="")
    if cfg.output_dir:
        print(f"# written to {cfg.output_dir}", file=sys.stderr)
    return 0


def _report_of(path: str) -> Path:
    p = Path(path)
    return p / REPORT_NAME if p.is_dir() else p


def _cmd_compare(args) -> int:
    baseline = read_report(_report_of(args.baseline))
    agentic = read_report(_report_of(args.agentic))
    print(format_comparison(compare(baseline, agentic)))
    return 0


def _cmd_rules_eval(args) -> int:
    cfg = SupervisorConfig()
    m = WindowMetrics(window_id=0, n_episodes=1, avg_duration=args.duration,
                      avg_gradient=args.gradient, avg_danger_pct=args.danger,
                      current_alpha=args.alpha)
    call = recommend_alpha(m, args.alpha, cfg)
    print(f"{call.tool.value} {call.resolve(args.alpha):g}")
    print(f"# {call.rationale}")
    return 0


def _cmd_replay(args) -> int:
    summaries = read_summaries(args.summaries)
    cfg = SupervisorConfig(window_duration=args.window)
    recs = replay_summaries(summaries, cfg, initial_alpha=args.alpha)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(RECOMMENDATION_COLUMNS)
    for r in recs:
        out.writerow([r.window_id, repr(r.issued_at), repr(r.latency), r.tool.value,
                      repr(r.alpha), r.source.value, int(r.parse_ok)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment (or several seeds)")
    run.add_argument("--config", help="TOML experiment file; defaults apply when omitted")
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=[m.value for m in Mode])
    run.add_argument("--env", choices=[e.value for e in Environment])
    run.add_argument("--out", help="output directory for logs and report")
    run.add_argument("--repeats", type=int, help="number of consecutive seeds")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="percent changes between two run reports")
    cmp_.add_argument("baseline", help="baseline run directory or report file")
    cmp_.add_argument("agentic", help="agentic run directory or report file")
    cmp_.set_defaults(func=_cmd_compare)

    ev = sub.add_parser("rules-eval", help="evaluate the rule engine on window metrics")
    ev.add_argument("--duration", type=float, required=True, help="average episode length, steps")
    ev.add_argument("--danger", type=float, required=True, help="average danger-zone share, %%")
    ev.add_argument("--alpha", type=float, required=True, help="current entropy coefficient")
    ev.add_argument("--gradient", type=float, default=0.0, help="average gradient, °C/step")
    ev.set_defaults(func=_cmd_rules_eval)

    rp = sub.add_parser("replay", help="re-run supervision over recorded episode summaries")
    rp.add_argument("--summaries", required=True, help="episodes.csv from a previous run")
    rp.add_argument("--window", type=float, default=3600.0, help="window length, simulated s")
    rp.add_argument("--alpha", type=float, default=1.0, help="alpha before the first window")
    rp.set_defaults(func=_cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename or str(exc)
        print(f"{PROG}: error: file not found: {name}", file=sys.stderr)
    except ConfigInvalid as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
    except (ValueError, KeyError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
