"""Command-line entry point: validate and run scenario files.

Exit codes: 0 success, 2 parse/validation failure, 3 simulation hit its
horizon without reaching quiescence (partial outputs are still written).
Bundled templates can be passed to ``run``/``validate`` by name.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .netsim import load_scenario_text, run

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_QUIESCENCE = 3

TEMPLATES = {
    "double_incentive_line3": "honest 3-forwarder relay line with per-hop secrets and one cracker",
    "double_incentive_withholding": "3-forwarder line where forwarder 2 withholds its backward secret",
    "all_or_nothing_broadcast": "anonymous-forwarder broadcast; one chunk faces a scripted drop",
    "contract_pull": "receiver contracts the sender, which delivers over an incentivized segment",
    "competing_multicast": "coded packets race over two paths; innovative deliveries earn blocks",
    "cache_repeat": "repeated content request served faster by an edge cache the second time",
    "isp_vs_edge": "wired backhaul route vs speed-of-light multihop edge route, same endpoints",
    "cracker_race_sweep": "single forwarder racing a brute-force cracker near the win boundary",
}


def template_text(name: str) -> str:
    ref = resources.files("relayrace.templates").joinpath(f"{name}.toml")
    return ref.read_text(encoding="utf-8")


def _read_scenario_arg(arg: str) -> tuple[str, str]:
    """Return (source label, TOML text); templates resolve by name."""
    path = Path(arg)
    if path.exists():
        return str(path), path.read_text(encoding="utf-8")
    if arg in TEMPLATES:
        return f"template:{arg}", template_text(arg)
    raise FileNotFoundError(f"no scenario file or bundled template named {arg!r}")


def _load(arg: str, seed: int | None, horizon: float | None):
    source, text = _read_scenario_arg(arg)
    scenario, diags = load_scenario_text(text)
    if diags or scenario is None:
        return source, None, diags or ["empty scenario"]
    if seed is not None:
        scenario.seed = seed
    if horizon is not None:
        scenario.horizon_ns = round(horizon * 1e9)
    return source, scenario, []


def _run_one(arg: str, seed: int | None, horizon: float | None, out_dir: str,
             figures: bool) -> int:
    source, scenario, diags = _load(arg, seed, horizon)
    if diags:
        for d in diags:
            print(f"{source}: {d}", file=sys.stderr)
        return EXIT_INVALID
    report = run(scenario)
    written = report.write_outputs(out_dir, figures=figures)
    print(f"{scenario.name}: seed={scenario.seed} events={report.events_processed} "
          f"final_time={report.final_time_ns / 1e9:.6f}s "
          f"claims={len(report.accepted_claims())} -> {out_dir} ({', '.join(written)})")
    if not report.quiescent:
        print(f"{scenario.name}: horizon exceeded before quiescence", file=sys.stderr)
        return EXIT_NO_QUIESCENCE
    return EXIT_OK


def _seed_worker(args) -> int:
    arg, seed, horizon, out_dir, figures = args
    return _run_one(arg, seed, horizon, out_dir, figures)


def cmd_run(args) -> int:
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
        jobs = [
            (args.scenario, s, args.horizon, str(Path(args.out) / f"seed-{s}"), not args.no_figures)
            for s in seeds
        ]
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_seed_worker, jobs))
        return max(results)
    return _run_one(args.scenario, args.seed, args.horizon, args.out, not args.no_figures)


def cmd_validate(args) -> int:
    try:
        source, text = _read_scenario_arg(args.scenario)
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    _, diags = load_scenario_text(text)
    for d in diags:
        print(f"{source}: {d}")
    if diags:
        print(f"{source}: {len(diags)} problem(s) found")
        return EXIT_INVALID
    print(f"{source}: ok")
    return EXIT_OK


def cmd_list_templates(_args) -> int:
    for name, description in TEMPLATES.items():
        print(f"{name:30s} {description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayrace",
        description="Run incentive-forwarding scenarios and write CSV/figure reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or bundled template")
    p_run.add_argument("scenario", help="scenario TOML path, or a bundled template name")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--horizon", type=float, default=None,
                       help="override the horizon, in seconds")
    p_run.add_argument("--out", default="out", help="output directory (default: ./out)")
    p_run.add_argument("--seeds", default=None,
                       help="comma-separated seeds to run concurrently, one subdir each")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip rendering PNG figures next to the CSVs")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="structurally validate without running")
    p_val.add_argument("scenario", help="scenario TOML path, or a bundled template name")
    p_val.set_defaults(func=cmd_validate)

    p_list = sub.add_parser("list-templates", help="list bundled scenario templates")
    p_list.set_defaults(func=cmd_list_templates)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
