#!/usr/bin/env python
# coding: utf-8

import argparse
import logging
import sys

from mergesim import commands
from mergesim.config import ScenarioError
from mergesim.highd import SchemaError

# Set up the command line
# ------------------------------------------------------------------------------
TITLE = "Forced merging simulator with social value orientation drivers"


def _common(parser):
    parser.add_argument("--config", default=None, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="random seed, the scenario seed or 0 when not given")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--format", choices=commands.FORMATS, default="csv",
                        help="format of the output tables")


def build_parser():
    parser = argparse.ArgumentParser(prog="mergesim", description=TITLE)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="run a scenario file")
    simulate.add_argument("scenario", help="scenario JSON file")
    _common(simulate)
    simulate.set_defaults(func=lambda a: commands.simulate(
        a.scenario, a.out, a.seed, a.config, a.format))

    replay = subparsers.add_parser("replay-eval",
                                   help="merge the virtual ego in every episode of recordings")
    replay.add_argument("datasets", nargs="+", help="High-D shaped CSV files")
    _common(replay)
    replay.set_defaults(func=lambda a: commands.replay_eval(
        a.datasets, a.out, a.seed or 0, a.config, a.format))

    infer = subparsers.add_parser("infer", help="belief trace on a recorded vehicle")
    infer.add_argument("trajectory", help="High-D shaped CSV file")
    infer.add_argument("vehicle_id", type=int)
    _common(infer)
    infer.set_defaults(func=lambda a: commands.infer(
        a.trajectory, a.vehicle_id, a.out, a.config, a.format))

    reproduce = subparsers.add_parser("reproduce",
                                      help="drive a recorded vehicle with a given intent")
    reproduce.add_argument("trajectory", help="High-D shaped CSV file")
    reproduce.add_argument("vehicle_id", type=int)
    reproduce.add_argument("--sigma", required=True,
                           help="altruistic, prosocial, egoistic or competitive")
    reproduce.add_argument("--w", required=True, help='weights of h, tau and e, e.g. "0,2/3,1/3"')
    _common(reproduce)
    reproduce.set_defaults(func=lambda a: commands.reproduce(
        a.trajectory, a.vehicle_id, a.sigma, a.w, a.out, a.config, a.format))

    generate = subparsers.add_parser("gen-scenarios",
                                     help="write the bundled scenarios and synthetic recordings")
    generate.add_argument("--episodes", type=int, default=10)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", default="scenarios", help="output directory")
    generate.set_defaults(func=lambda a: commands.gen_scenarios(a.out, a.episodes, a.seed))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, SchemaError, KeyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return commands.EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
