"""Command line entry point: ``posterior-ts {toy,riverswim,glucose} ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical or convergence
error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys

from .errors import ConfigError, DomainError, NumericalError
from .experiments import emit_outputs, make_config, run_experiment

log = logging.getLogger("posterior_ts")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="posterior-ts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True, parser_class=_Parser)

    def common(p, agents, default_agent):
        p.add_argument("--agent", nargs="+", choices=agents, default=[default_agent])
        p.add_argument("--horizon", type=int)
        p.add_argument("--runs", type=int, dest="n_runs")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--delta", nargs="+", help="const:<c> | inv_t | pow:<p> (ets only)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--paper-scale", action="store_true")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--stride", type=int, default=1, help="keep every n-th step in series files")
        p.add_argument("-v", "--verbose", action="store_true")

    finite = ("ets", "dspsrl", "tsmdp", "tsde", "uniform")
    toy = sub.add_parser("toy", help="two-state toy MDP")
    common(toy, finite, "ets")
    toy.add_argument("--theta0", nargs=2, type=float)
    toy.add_argument("--start-state", type=int)
    toy.add_argument("--grid-points", type=int)

    river = sub.add_parser("riverswim", help="six-state RiverSwim chain")
    common(river, finite, "ets")
    river.add_argument("--theta0", nargs="+", type=float)
    river.add_argument("--start-state", nargs="+", type=int)
    river.add_argument("--grid-points", type=int)

    glu = sub.add_parser("glucose", help="glucose AR(2) cohort")
    common(glu, ("ets", "dspsrl", "uniform", "gold", "naive_fqi"), "ets")
    glu.add_argument("--patients", type=int, dest="n_patients")
    glu.add_argument("--fqi-iters", type=int)
    glu.add_argument("--fqi-tuples", type=int)
    glu.add_argument("--fqi-gamma", type=float)
    glu.add_argument("--regressor", choices=("trees", "knn"), dest="fqi_regressor")
    glu.add_argument("--checkpoints", nargs="+", type=int)
    return parser


def configs_from_args(args) -> list:
    base = dict(seed=args.seed, horizon=args.horizon, n_runs=args.n_runs, workers=args.workers)
    if args.scenario == "toy":
        base.update(theta0=args.theta0, start_state=args.start_state, grid_points=args.grid_points)
        cells = [{}]
    elif args.scenario == "riverswim":
        base.update(grid_points=args.grid_points)
        starts = args.start_state or [None]
        thetas = args.theta0 or [None]
        cells = [dict(start_state=s, theta0=None if th is None else (th,))
                 for s, th in itertools.product(starts, thetas)]
    else:
        base.update(n_patients=args.n_patients, fqi_iters=args.fqi_iters, fqi_tuples=args.fqi_tuples,
                    fqi_gamma=args.fqi_gamma, fqi_regressor=args.fqi_regressor,
                    checkpoints=args.checkpoints)
        cells = [{}]
    out = []
    for cell in cells:
        for agent in args.agent:
            for delta in (args.delta or [None]) if agent == "ets" else [None]:
                kw = {**base, **cell, "delta": delta}
                out.append(make_config(args.scenario, agent, paper_scale=args.paper_scale, **kw))
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out_dir = args.out or f"results/{args.scenario}"
    try:
        if args.stride < 1:
            raise ConfigError("stride must be >= 1")
        configs = configs_from_args(args)
        groups = []
        for cfg in configs:
            log.info("running %s/%s %s x%d", cfg.scenario, cfg.agent, cfg.variant, cfg.n_runs)
            groups.append((cfg, run_experiment(cfg)))
        paths = emit_outputs(groups, out_dir, stride=args.stride)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    with open(paths["summary"]) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
