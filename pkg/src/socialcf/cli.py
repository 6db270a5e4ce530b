"""Command-line entry point: ``socialcf <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure
(including any Monte Carlo run that recorded an error).
"""

import argparse
import dataclasses
import sys

import numpy as np

from . import harness
from .channel import ChannelFormatError, export_channels, load_external_channels
from .config import ConfigError, SimulationConfig, load_config, parse_overrides
from .matching import Matching, export_matching
from .social import InstanceTooLarge, UtilityOracle, pareto_front_bruteforce

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _csv_list(text, cast=str):
    return [cast(t.strip()) for t in text.split(",") if t.strip()]


def _nmse_value(text):
    return None if text.lower() in ("perfect", "none") else float(text)


def _build_config(args):
    config = load_config(args.config) if args.config else SimulationConfig()
    config = parse_overrides(args.set or [], config)
    if args.full_scale:
        config = config.full_scale()
    return config


def _failures(aggregates):
    return [e for agg in aggregates for e in agg.errors]


def _emit(args, tables, config):
    harness.emit_results(tables, args.format, args.output, config)


def cmd_run(args, config):
    algorithms = _csv_list(args.algorithms) if args.algorithms else [config.algorithm]
    result = harness.monte_carlo(config, algorithms, args.workers)
    rows = [{"algorithm": name, **harness.metric_row(agg)} for name, agg in result.items()]
    _emit(args, {"run": rows}, config)
    if args.export_matching:
        first = harness.run_once(config, algorithms[0], 0, 0)
        if first.ok:
            mt = Matching.from_matrix(first.clustering, config.k_max, config.m_max)
            with open(args.export_matching, "w") as fh:
                fh.write(export_matching(mt, first.trace))
    return _failures(result.values())


def cmd_sweep_social(args, config):
    alphas = _csv_list(args.alphas)
    betas = _csv_list(args.betas) if args.betas else alphas
    rows = harness.sweep_social(config, alphas, betas, args.workers)
    _emit(args, {"social": rows}, config)
    return [r for r in rows if r["n_errors"]]


def cmd_sweep_load(args, config):
    rows = harness.sweep_load(
        config, _csv_list(args.n_ues, int), _csv_list(args.algorithms), args.workers
    )
    _emit(args, {"load": rows}, config)
    return [r for r in rows if r["n_errors"]]


def cmd_sweep_nmse(args, config):
    n_ues = _csv_list(args.n_ues, int) if args.n_ues else None
    rows = harness.sweep_nmse(config, _csv_list(args.nmse, _nmse_value), n_ues,
                              workers=args.workers)
    _emit(args, {"nmse": rows}, config)
    return [r for r in rows if r["n_errors"]]


def cmd_shutdown(args, config):
    rows = harness.shutdown_analysis(config, _csv_list(args.n_ues, int), workers=args.workers)
    _emit(args, {"shutdown": rows}, config)
    return [r for r in rows if r["n_errors"]]


def cmd_pareto(args, config):
    channels, requests = harness.realize(config, args.deployment, args.run)
    oracle = UtilityOracle(
        channels, requests, config.radio_config(), config.power_params(), config.sociality()
    )
    front = pareto_front_bruteforce(oracle, config.k_max, config.m_max)
    rows = [
        {
            "index": i,
            "clustering": ";".join("".join(str(int(v)) for v in row) for row in p.clustering),
            "gamma_sum": float(np.sum(p.utility.gamma)),
            "cluster_util_sum": float(np.sum(p.utility.cluster_util)),
        }
        for i, p in enumerate(front)
    ]
    _emit(args, {"pareto": rows}, config)
    return []


def cmd_export_channels(args, config):
    channels, _ = harness.realize(config, args.deployment, args.run)
    export_channels(channels, args.path, which=args.which)
    return []


def cmd_import_channels(args, config):
    channels = load_external_channels(args.path, n_antennas=config.n_antennas)
    K, M, _ = channels.shape
    config = dataclasses.replace(config, channel_file=args.path, n_ues=K, n_aps=M)
    return cmd_run(args, config)


def _add_common(p):
    p.add_argument("-c", "--config", help="key = value configuration file")
    p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                   help="override one configuration field (repeatable)")
    p.add_argument("--full-scale", action="store_true",
                   help="use 100 deployments x 100 runs")
    p.add_argument("-w", "--workers", type=int, default=None,
                   help=f"worker processes (default: ${harness.WORKERS_ENV} or 1)")
    p.add_argument("-f", "--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", default="-", help="output path ('-' for stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="socialcf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo run of one configuration")
    _add_common(p)
    p.add_argument("-a", "--algorithms", help="comma list, e.g. EA,DA (default: config)")
    p.add_argument("--export-matching", metavar="PATH",
                   help="write the first run's matching as 'k: m1 m2 ...' lines")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-social", help="EA over a grid of social factors")
    _add_common(p)
    p.add_argument("--alphas", default="altruistic,egalitarian,selfish")
    p.add_argument("--betas", default=None, help="defaults to the alpha grid")
    p.set_defaults(func=cmd_sweep_social)

    p = sub.add_parser("sweep-load", help="algorithms versus number of UEs")
    _add_common(p)
    p.add_argument("--n-ues", default="15,25,35")
    p.add_argument("-a", "--algorithms", default="EA,DA,BC,CS,MD")
    p.set_defaults(func=cmd_sweep_load)

    p = sub.add_parser("sweep-nmse", help="EA versus channel estimation error")
    _add_common(p)
    p.add_argument("--nmse", default="-20,-10,0,perfect", help="dB values or 'perfect'")
    p.add_argument("--n-ues", default=None)
    p.set_defaults(func=cmd_sweep_nmse)

    p = sub.add_parser("shutdown", help="total versus effective power under symbol shutdown")
    _add_common(p)
    p.add_argument("--n-ues", default="15,25,35")
    p.set_defaults(func=cmd_shutdown)

    p = sub.add_parser("pareto", help="brute-force Pareto front of a tiny instance")
    _add_common(p)
    p.add_argument("--deployment", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("export-channels", help="write one channel realization to a file")
    _add_common(p)
    p.add_argument("path")
    p.add_argument("--deployment", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--which", choices=("true", "csi"), default="true")
    p.set_defaults(func=cmd_export_channels)

    p = sub.add_parser("import-channels", help="cluster over channels read from a file")
    _add_common(p)
    p.add_argument("path")
    p.add_argument("-a", "--algorithms", default=None)
    p.add_argument("--export-matching", metavar="PATH")
    p.set_defaults(func=cmd_import_channels)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _build_config(args)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        failures = args.func(args, config)
    except (ConfigError, ChannelFormatError, InstanceTooLarge, FileNotFoundError) as exc:
        print(f"socialcf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"socialcf: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if failures:
        print(f"socialcf: {len(failures)} failed run(s); first: {failures[0]}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
