"""
Command line: ``python -m vanetsim {run,validate,sweep,report,grid} ...``

Exit status 0 when all requested work completed, 1 on a reported error
or a failed sweep run, 2 on a usage error.
"""
import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

from vanetsim.config import load_config, parse_config, with_vehicles, worker_count
from vanetsim.constants import SEEDS, VEHICLE_COUNTS
from vanetsim.errors import VanetSimError
from vanetsim.grid import write_grid_scenario
from vanetsim.metrics import read_runs, read_summary, run_csv, summarize_sweep, summary_csv
from vanetsim.report import write_report
from vanetsim.sim_engine import run, validate_scenario

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s [%(name)s]: %(message)s"
SUMMARY_FILE = "summary.csv"
RUNS_FILE = "runs.csv"


def int_list(text):
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a list of integers") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")

    return values


def _absolute(path):
    return None if path is None else str(Path(path).absolute())


def _overrides(args, seed=True):
    overrides = {
        "scenario.net": _absolute(args.net),
        "scenario.routes": _absolute(args.routes),
        "scenario.turns": _absolute(args.turns),
    }
    if seed and args.seed is not None:
        overrides["scenario.seed"] = str(args.seed)

    return overrides


def _scenario(args, parser):
    overrides = _overrides(args)
    if args.config is not None:
        scenario = load_config(args.config, overrides)
    else:
        scenario = parse_config("", overrides=overrides)
    if scenario.net is None:
        parser.error("--net is required when the config does not set scenario.net")
    if scenario.routes is None:
        parser.error("--routes is required when the config does not set scenario.routes")

    return scenario


#
# Subcommands
#
def cmd_run(args, parser):
    scenario = _scenario(args, parser)
    bundle = run(scenario)
    bundle.write(args.out)
    c = bundle.counters
    print(f"{args.out}: ps={c.ps} pr={c.pr} rd={c.rd} pl={c.pl}")

    return 0


def cmd_validate(args, parser):
    scenario = _scenario(args, parser)
    inputs = validate_scenario(scenario)
    print(f"ok: {len(inputs.network.nodes)} nodes, {len(inputs.network.edges)} edges, "
          f"{len(inputs.network.signals)} signal programs, "
          f"{len(inputs.routes.vehicles)} vehicles")

    return 0


def run_directory(out, n, seed):
    return Path(out) / f"n{n}" / f"seed{seed}"


def sweep_job(config, overrides, n, seed, out):
    """One sweep cell; module level so a process pool can pickle it."""
    scenario = with_vehicles(load_config(config, overrides), n, seed)
    bundle = run(scenario)
    bundle.write(run_directory(out, n, seed))

    return bundle.result


def _completed(out, n, seed):
    path = run_directory(out, n, seed) / "counters.csv"
    if not path.is_file():
        return None
    try:
        return read_runs(path.read_text(encoding="utf-8"))[0]
    except (VanetSimError, IndexError):
        LOG.warning("ignoring unreadable %s", path)
        return None


def cmd_sweep(args, parser):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = _overrides(args, seed=False)
    jobs = [(n, seed) for n in args.counts for seed in args.seeds]
    results, failed = {}, []

    pending = []
    for n, seed in jobs:
        done = _completed(out, n, seed) if args.resume else None
        if done is not None:
            LOG.info("n=%d seed=%d already done, skipping", n, seed)
            results.setdefault(n, []).append(done)
        else:
            pending.append((n, seed))

    workers = worker_count(args.workers)
    LOG.info("sweep: %d runs (%d resumed) on %d workers", len(jobs), len(jobs) - len(pending),
             workers)
    if workers == 1:
        for n, seed in pending:
            try:
                results.setdefault(n, []).append(
                    sweep_job(args.config, overrides, n, seed, out))
            except Exception as exc:
                LOG.error("n=%d seed=%d failed: %s", n, seed, exc)
                failed.append((n, seed))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(sweep_job, args.config, overrides, n, seed, out): (n, seed)
                       for n, seed in pending}
            for future in as_completed(futures):
                n, seed = futures[future]
                try:
                    results.setdefault(n, []).append(future.result())
                except Exception as exc:
                    LOG.error("n=%d seed=%d failed: %s", n, seed, exc)
                    failed.append((n, seed))

    for n in args.counts:
        results.setdefault(n, [])
    rows = summarize_sweep(results, args.seeds)
    runs = sorted((r for cell in results.values() for r in cell),
                  key=lambda r: (r.n_vehicles, r.seed))
    (out / RUNS_FILE).write_text(run_csv(runs), encoding="utf-8")
    (out / SUMMARY_FILE).write_text(summary_csv(rows), encoding="utf-8")
    print(f"{out / SUMMARY_FILE}: {len(rows)} rows, {len(failed)} failed runs")

    return 1 if failed else 0


def cmd_report(args, parser):
    rows = read_summary(Path(args.summary).read_text(encoding="utf-8"))
    for path in write_report(rows, args.out):
        print(path)

    return 0


def cmd_grid(args, parser):
    path = write_grid_scenario(args.out, args.counts, args.seed, args.block_length)
    print(path)

    return 0


#
# Parser
#
def _scenario_flags(sub):
    sub.add_argument("--config", help="scenario config file (key = value)")
    sub.add_argument("--net", help="network directory")
    sub.add_argument("--routes", help="route file")
    sub.add_argument("--turns", help="turn probability table")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="vanetsim", description="Vehicular ad hoc network "
                                     "simulator: AODV over 802.11 DCF on a road network.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("run", parents=[common], help="simulate one scenario")
    _scenario_flags(sub)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=cmd_run)

    sub = subs.add_parser("validate", parents=[common], help="check scenario inputs")
    _scenario_flags(sub)
    sub.add_argument("--seed", type=int)
    sub.set_defaults(func=cmd_validate)

    sub = subs.add_parser("sweep", parents=[common], help="vehicle count x seed sweep")
    _scenario_flags(sub)
    sub.add_argument("--counts", type=int_list, default=list(VEHICLE_COUNTS))
    sub.add_argument("--seeds", type=int_list, default=list(SEEDS))
    sub.add_argument("--workers", type=int)
    sub.add_argument("--resume", action="store_true", help="skip runs already on disk")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("report", parents=[common], help="charts from a sweep summary")
    sub.add_argument("--summary", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_report)

    sub = subs.add_parser("grid", parents=[common], help="write the synthetic grid scenario")
    sub.add_argument("--counts", type=int_list, default=list(VEHICLE_COUNTS))
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--block-length", type=float, default=200.0,
                     help="metres between intersections")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_grid)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    if args.command == "sweep" and args.config is None:
        parser.error("sweep needs --config")
    try:
        return args.func(args, parser)
    except (VanetSimError, OSError) as exc:
        LOG.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
