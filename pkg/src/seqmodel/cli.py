"""Command-line front end.

Three subcommands: `experiment` runs the repeated-game benchmark and
writes per-iteration records, cross-opponent averages, and a replayable
manifest; `props` reruns the two sampling-pathology checks and prints
PASS/FAIL with the measured quantities; `dump-game` writes a game's
constraint matrices, payoff matrix, and observability table as CSV.

Progress goes to standard error (level picked by SEQMODEL_LOG), data to
files and standard output.  Exit codes: 0 success, 1 configuration
error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .baselines import hull_distance_series, takeover_series
from .games import PLAYER_1, PLAYER_2
from .posterior import uniform_prior
from .sequence_form import derive
from .simulator import (
    ALL_ALGORITHMS,
    GAME_BUILDERS,
    MatchConfig,
    config_from_manifest,
    run_experiment,
    write_aggregate_csv,
    write_manifest,
    write_records_csv,
)

log = logging.getLogger("seqmodel")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}
_ALGO_NAMES = tuple(k.value for k in ALL_ALGORITHMS)
_CONFIG_FLAGS = ("game", "algos", "opponents", "iterations", "samples",
                 "alpha", "seed", "jobs")


class UsageError(Exception):
    """Bad flags, bad values, or a broken manifest; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _setup_logging() -> None:
    name = os.environ.get("SEQMODEL_LOG", "info").lower()
    if name not in _LOG_LEVELS:
        raise UsageError("SEQMODEL_LOG must be one of error, info, debug "
                         f"(got {name!r})")
    logging.basicConfig(stream=sys.stderr, level=_LOG_LEVELS[name],
                        format="%(levelname)s %(message)s", force=True)


def _build_parser() -> _Parser:
    parser = _Parser(prog="seqmodel",
                     description="Opponent-modeling benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{experiment,props,dump-game}")

    exp = sub.add_parser("experiment",
                         help="run algorithms against prior-drawn opponents")
    exp.add_argument("--game", choices=sorted(GAME_BUILDERS))
    exp.add_argument("--algos",
                     help="comma-separated subset of " + ",".join(_ALGO_NAMES))
    exp.add_argument("--opponents", type=int)
    exp.add_argument("--iterations", type=int)
    exp.add_argument("--samples", type=int)
    exp.add_argument("--alpha", type=float)
    exp.add_argument("--seed", type=int)
    exp.add_argument("--jobs", type=int,
                     help="parallel opponent matches (default: CPU count)")
    exp.add_argument("--out", default="results",
                     help="output directory (default: results)")
    exp.add_argument("--manifest",
                     help="replay a recorded run from its manifest JSON")
    exp.add_argument("--figure",
                     help="also render the averaged curves to this image "
                          "(needs the seqmodel-figures package)")
    exp.add_argument("--smoothing", type=int, default=1,
                     help="moving-average window for --figure (default: 1, "
                          "off; 50 is a good display value)")
    exp.set_defaults(func=_cmd_experiment)

    props = sub.add_parser("props",
                           help="rerun the sampling-pathology checks")
    props.set_defaults(func=_cmd_props)

    dump = sub.add_parser("dump-game",
                          help="write game matrices and observability as CSV")
    dump.add_argument("--game", choices=sorted(GAME_BUILDERS), default="kuhn")
    dump.add_argument("--out", default=".",
                      help="output directory (default: current)")
    dump.set_defaults(func=_cmd_dump_game)
    return parser


def _build_config(args: argparse.Namespace) -> MatchConfig:
    if args.manifest:
        given = [f"--{name}" for name in _CONFIG_FLAGS
                 if getattr(args, name) is not None]
        if given:
            raise UsageError("--manifest replays the recorded configuration; "
                             "drop " + ", ".join(given))
        return config_from_manifest(args.manifest)
    if args.algos is None:
        algorithms = ALL_ALGORITHMS
    else:
        algorithms = tuple(a.strip() for a in args.algos.split(",") if a.strip())
        for name in algorithms:
            if name not in _ALGO_NAMES:
                raise UsageError(f"unknown algorithm {name!r} "
                                 "(choose from " + ", ".join(_ALGO_NAMES) + ")")
    return MatchConfig(
        game=args.game if args.game is not None else "kuhn",
        iterations=args.iterations if args.iterations is not None else 3000,
        opponents=args.opponents if args.opponents is not None else 100,
        samples=args.samples if args.samples is not None else 10,
        alpha=args.alpha if args.alpha is not None else 2.0,
        seed=args.seed if args.seed is not None else 0,
        algorithms=algorithms,
        jobs=args.jobs if args.jobs is not None else (os.cpu_count() or 1),
    )


def _cmd_experiment(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("%s: %d algorithms x %d opponents x %d iterations (seed %d, "
             "%d job%s)", config.game, len(config.algorithms),
             config.opponents, config.iterations, config.seed, config.jobs,
             "" if config.jobs == 1 else "s")
    started = time.perf_counter()

    def report(done: int) -> None:
        log.debug("opponent %d/%d finished (%.1fs elapsed)", done,
                  config.opponents, time.perf_counter() - started)

    series = run_experiment(config, progress=report)
    write_records_csv(out / "records.csv", series)
    write_aggregate_csv(out / "aggregate.csv", series)
    write_manifest(out / "manifest.json", config)
    log.info("wrote %s, %s, %s in %.1fs", out / "records.csv",
             out / "aggregate.csv", out / "manifest.json",
             time.perf_counter() - started)
    if args.figure:
        return _render_figure(out / "aggregate.csv", args.figure,
                              args.smoothing)
    return 0


def _render_figure(aggregate_csv: Path, figure_path: str,
                   smoothing: int) -> int:
    try:
        from seqmodel_figures.plotting import plot
    except ImportError:
        log.error("--figure needs the seqmodel-figures package "
                  "(pip install figures/)")
        return 1
    plot(str(aggregate_csv), figure_path, smoothing_window=smoothing)
    log.info("wrote %s", figure_path)
    return 0


def _cmd_props(args: argparse.Namespace) -> int:
    tree, _ = GAME_BUILDERS["rps"]()
    game = derive(tree)
    prior = uniform_prior(game, PLAYER_2, 2.0)

    dists = hull_distance_series(game, prior, iterations=10_000)
    floor = float(dists.min())
    hull_ok = floor >= 0.2
    print(f"hull-gap: {'PASS' if hull_ok else 'FAIL'} "
          f"(min model distance {floor:.4f} over {len(dists)} iterations, "
          "bound 0.2)")

    weights = takeover_series(game, prior, iterations=300)
    tail = weights[249:, 0]
    tail_ok = bool(np.all(tail > 0.99))
    boundaries = weights[2::3]
    ratio_err = 0.0
    for m, row in enumerate(boundaries, start=1):
        for rival, per_block in ((1, 0.032 / 0.018), (2, 0.032 / 0.030)):
            want = per_block ** m
            got = row[0] / row[rival]
            ratio_err = max(ratio_err, abs(got - want) / want)
    law_ok = ratio_err < 1e-9
    print(f"takeover: {'PASS' if tail_ok and law_ok else 'FAIL'} "
          f"(leading weight {float(tail.min()):.6f} from iteration 250 on, "
          f"bound 0.99; ratio-law max relative error {ratio_err:.2e}, "
          "bound 1e-09)")
    return 0 if hull_ok and tail_ok and law_ok else 2


def _cmd_dump_game(args: argparse.Namespace) -> int:
    tree, obs = GAME_BUILDERS[args.game]()
    game = derive(tree)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def write_constraints(path: Path, player: int) -> None:
        matrix, _ = game.constraints(player)
        labels = game.seq_labels[player]
        rows = ["unit"] + [i.label for i in game.infosets[player]]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", *labels])
            for name, row in zip(rows, matrix):
                writer.writerow([name, *(str(int(v)) for v in row)])

    write_constraints(out / "E.csv", PLAYER_1)
    write_constraints(out / "F.csv", PLAYER_2)

    n1, n2 = game.dims()
    with open(out / "A.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", *game.seq_labels[PLAYER_2]])
        for i in range(n1):
            cells = [str(game.A_exact.get((i, j), Fraction(0)))
                     for j in range(n2)]
            writer.writerow([game.seq_labels[PLAYER_1][i], *cells])

    with open(out / "observability.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["leaf", "label", "p1_candidates", "p2_candidates"])
        for leaf in tree.leaves:
            row = [leaf.index, leaf.label]
            for player in (PLAYER_1, PLAYER_2):
                members = obs.sets[player][leaf.index]
                row.append("|".join(tree.leaves[i].label for i in members))
            writer.writerow(row)

    log.info("wrote E.csv, F.csv, A.csv, observability.csv to %s", out)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
