"""Repeated-game harness: modeling algorithms against fixed opponents.

One match is one algorithm against one opponent for T hands.  Each hand:
build the model from everything observed so far, best-respond to it,
record the response's expected payoff against the true strategy and the
model's distance from it, play the hand out, and feed the observed
candidate set back into the algorithm's state.

Variance reduction: within one opponent, every algorithm sees the same
chance outcomes and the same per-decision thresholds, and the three
sampling algorithms share one set of prior draws.  Randomness comes from
dedicated per-(opponent, purpose) streams, so adding or removing an
algorithm never shifts another's draws.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from . import __version__
from .baselines import (
    SAMPLING_KINDS,
    ResponseKind,
    SampledPosterior,
    best_nash_kuhn,
    best_response,
    model,
    update_weights,
)
from .games import CHANCE, PLAYER_1, build_kuhn, build_rps
from .posterior import (
    ObservationLog,
    PackedTerms,
    append_observation,
    observation_term,
    sample_opponent,
    uniform_prior,
)
from .sequence_form import (
    SequenceFormGame,
    behavioral_to_realization,
    derive,
    expected_payoff,
    realization_to_behavioral,
    uniform_plan,
)
from .solver import estimate

GAME_BUILDERS = {"kuhn": build_kuhn, "rps": build_rps}

# dedicated randomness streams hanging off (master seed, opponent index)
_STREAM_OPPONENT = 0
_STREAM_SAMPLES = 1
_STREAM_CHANCE = 2
_STREAM_THRESHOLDS = 3
_STREAM_THOMPSON = 4

ALL_ALGORITHMS = (
    ResponseKind.FMAP,
    ResponseKind.BBR,
    ResponseKind.MAP,
    ResponseKind.THOMPSON,
    ResponseKind.BEST_NASH,
    ResponseKind.BEST_RESPONSE,
)


@dataclass(frozen=True)
class MatchConfig:
    """Everything a run needs; defaults are the benchmark settings."""

    game: str = "kuhn"
    iterations: int = 3000
    opponents: int = 100
    samples: int = 10
    alpha: float = 2.0
    seed: int = 0
    algorithms: tuple[ResponseKind, ...] = ALL_ALGORITHMS
    jobs: int = 1

    def __post_init__(self):
        if self.game not in GAME_BUILDERS:
            raise ValueError(f"unknown game {self.game!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.opponents < 1:
            raise ValueError("opponent count must be at least 1")
        if self.samples < 1:
            raise ValueError("sample count must be at least 1")
        if self.alpha < 1.0:
            raise ValueError("prior parameter must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        kinds = []
        for a in self.algorithms:
            kind = ResponseKind(a)
            if kind == ResponseKind.BEST_NASH and self.game != "kuhn":
                raise ValueError(
                    "the equilibrium-family benchmark is defined for kuhn only")
            kinds.append(kind)
        object.__setattr__(self, "algorithms", tuple(kinds))


class IterationRecord(NamedTuple):
    algorithm: str
    opponent: int
    iteration: int
    expected_payoff: float
    model_l2: float


@dataclass
class MatchSeries:
    """Per-iteration results of one (algorithm, opponent) match."""

    algorithm: ResponseKind
    opponent: int
    payoff: np.ndarray
    model_l2: np.ndarray

    def records(self) -> Iterator[IterationRecord]:
        for t in range(len(self.payoff)):
            yield IterationRecord(self.algorithm.value, self.opponent, t + 1,
                                  float(self.payoff[t]),
                                  float(self.model_l2[t]))


@dataclass(frozen=True)
class SharedRandomness:
    """Per-iteration chance draw and one threshold per decision point."""

    chance: np.ndarray       # (T,) uniforms
    thresholds: np.ndarray   # (T, player-1 infosets + player-2 infosets)


def _stream(config: MatchConfig, opponent: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((config.seed, opponent, purpose)))


def shared_randomness(game: SequenceFormGame, config: MatchConfig,
                      opponent: int) -> SharedRandomness:
    n_sets = len(game.infosets[1]) + len(game.infosets[2])
    chance = _stream(config, opponent, _STREAM_CHANCE).random(config.iterations)
    thresholds = _stream(config, opponent, _STREAM_THRESHOLDS).random(
        (config.iterations, n_sets))
    return SharedRandomness(chance, thresholds)


def draw_opponent(game: SequenceFormGame, config: MatchConfig,
                  opponent: int) -> list[np.ndarray]:
    prior = uniform_prior(game, 2, config.alpha)
    return sample_opponent(prior, _stream(config, opponent, _STREAM_OPPONENT))


def draw_samples(game: SequenceFormGame, config: MatchConfig,
                 opponent: int) -> SampledPosterior:
    prior = uniform_prior(game, 2, config.alpha)
    return SampledPosterior.from_prior(
        game, prior, config.samples, _stream(config, opponent, _STREAM_SAMPLES))


def _pick(dist, u: float) -> int:
    acc = 0.0
    for k, p in enumerate(dist):
        acc += float(p)
        if acc > u:
            return k
    return len(dist) - 1


def _mode_polish(game: SequenceFormGame, prior, log: ObservationLog,
                 start: np.ndarray, sweeps: int = 60,
                 tol: float = 1e-12) -> np.ndarray:
    """Move a feasible plan close to the posterior mode, cheaply.

    Majorize-maximize sweeps: split each ambiguous observation across its
    candidates in proportion to their current likelihood share, then
    renormalize each decision point's pseudo-counts.  Every sweep raises
    the posterior, so this is a better feasible starting point for the
    gradient solver, which still owns convergence and certification.
    Falls back to `start` untouched for games this shape cannot handle.
    """
    blocks = []
    for iset in game.infosets[prior.player]:
        if iset.parent_seq != 0:
            return start
        blocks.append(np.array(iset.action_seqs))
    packed = PackedTerms(log)
    extra = prior.seq_alpha - 1.0
    y = np.array(start, dtype=float)
    y[0] = 1.0
    for _ in range(sweeps):
        w = extra.copy()
        if len(packed.counts):
            share = ((packed.counts / packed.sums(y))[packed.spread]
                     * packed.q * y[packed.idx])
            w += np.bincount(packed.idx, weights=share, minlength=len(y))
        prev = y
        y = y.copy()
        for b in blocks:
            total = w[b].sum()
            y[b] = w[b] / total if total > 0 else 1.0 / len(b)
        if np.abs(y - prev).max() < tol:
            break
    # keep strictly inside the solver's floor; renormalizing after the
    # clip can undershoot it only by an order epsilon^2 sliver
    clipped = np.maximum(y, 1e-6)
    for b in blocks:
        clipped[b] /= clipped[b].sum()
    clipped[0] = 1.0
    return clipped


def _play_hand(game: SequenceFormGame, leaf_of_node: dict[int, int],
               x_beh: list[np.ndarray], y_beh: list[np.ndarray],
               chance_u: float, thresholds: np.ndarray, offset2: int) -> int:
    """Walk the tree with fixed thresholds; returns the leaf index."""
    tree = game.tree
    nid = tree.root
    while True:
        node = tree.nodes[nid]
        if not node.children:
            return leaf_of_node[nid]
        if node.player == CHANCE:
            k = _pick(node.probs, chance_u)
        elif node.player == PLAYER_1:
            k = _pick(x_beh[node.infoset], thresholds[node.infoset])
        else:
            k = _pick(y_beh[node.infoset], thresholds[offset2 + node.infoset])
        nid = node.children[k]


def run_match(game: SequenceFormGame, opponent_strategy: list[np.ndarray],
              algorithm: ResponseKind, config: MatchConfig, opponent: int,
              obs=None, shared: SharedRandomness | None = None,
              samples: SampledPosterior | None = None) -> MatchSeries:
    """One algorithm against one fixed opponent for T hands."""
    kind = ResponseKind(algorithm)
    T = config.iterations
    y_star = behavioral_to_realization(game, 2, opponent_strategy)

    if kind == ResponseKind.BEST_RESPONSE:
        _, value = best_response(game, y_star)
        return MatchSeries(kind, opponent, np.full(T, value), np.full(T, np.nan))
    if kind == ResponseKind.BEST_NASH:
        _, value = best_nash_kuhn(game, y_star)
        return MatchSeries(kind, opponent, np.full(T, value), np.full(T, np.nan))

    if obs is None:
        raise ValueError("modeling algorithms need the observability function")
    if shared is None:
        shared = shared_randomness(game, config, opponent)
    leaf_of_node = {leaf.node_id: leaf.index for leaf in game.tree.leaves}
    prior = uniform_prior(game, 2, config.alpha)
    offset2 = len(game.infosets[1])
    uniform = uniform_plan(game, 2)

    log = ObservationLog(game)
    posterior = None
    thompson_rng = None
    if kind in SAMPLING_KINDS:
        if samples is None:
            samples = draw_samples(game, config, opponent)
        posterior = SampledPosterior(samples.behavioral, samples.plans,
                                     np.zeros(len(samples.log_weights)))
        if kind == ResponseKind.THOMPSON:
            thompson_rng = _stream(config, opponent, _STREAM_THOMPSON)

    payoff = np.empty(T)
    dist = np.empty(T)
    warm = None
    for t in range(T):
        if t == 0:
            current = uniform          # nothing observed yet: the prior mode
        elif kind == ResponseKind.FMAP:
            guess = _mode_polish(game, prior, log,
                                 warm if warm is not None else uniform)
            current = estimate(game, prior, log, warm_start=guess).estimate
            warm = current
        else:
            current = model(posterior, kind, thompson_rng)
        response, _ = best_response(game, current)
        payoff[t] = expected_payoff(game, response, y_star)
        dist[t] = np.linalg.norm(current - y_star)

        x_beh = realization_to_behavioral(game, 1, response)
        leaf = _play_hand(game, leaf_of_node, x_beh, opponent_strategy,
                          shared.chance[t], shared.thresholds[t], offset2)
        if kind == ResponseKind.FMAP:
            log = append_observation(log, obs, leaf)
        else:
            posterior = update_weights(
                posterior, observation_term(game, obs, leaf))
    return MatchSeries(kind, opponent, payoff, dist)


def run_opponent(config: MatchConfig, opponent: int) -> list[MatchSeries]:
    """All configured algorithms against one drawn opponent."""
    tree, obs = GAME_BUILDERS[config.game]()
    game = derive(tree)
    sigma = draw_opponent(game, config, opponent)
    shared = shared_randomness(game, config, opponent)
    samples = None
    if any(k in SAMPLING_KINDS for k in config.algorithms):
        samples = draw_samples(game, config, opponent)
    return [run_match(game, sigma, kind, config, opponent,
                      obs=obs, shared=shared, samples=samples)
            for kind in config.algorithms]


def run_experiment(config: MatchConfig, progress=None) -> list[MatchSeries]:
    """Every algorithm against every opponent; order is deterministic.

    `progress`, if given, is called with the number of finished opponents
    after each one completes (for status output; never touches results).
    """
    out: list[MatchSeries] = []
    done = 0
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for series in pool.map(run_opponent, [config] * config.opponents,
                                   range(config.opponents), chunksize=1):
                out.extend(series)
                done += 1
                if progress is not None:
                    progress(done)
    else:
        for opponent in range(config.opponents):
            out.extend(run_opponent(config, opponent))
            done += 1
            if progress is not None:
                progress(done)
    return out


def aggregate(series: list[MatchSeries]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Mean payoff and mean model distance per algorithm per iteration."""
    by_algo: dict[str, list[MatchSeries]] = {}
    for s in series:
        by_algo.setdefault(s.algorithm.value, []).append(s)
    out = {}
    for name, group in by_algo.items():
        out[name] = (np.stack([s.payoff for s in group]).mean(axis=0),
                     np.stack([s.model_l2 for s in group]).mean(axis=0))
    return out


def write_records_csv(path: str | Path, series: list[MatchSeries]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "opponent", "iter", "expected_payoff", "model_l2"])
        for s in series:
            for rec in s.records():
                writer.writerow([rec.algorithm, rec.opponent, rec.iteration,
                                 repr(rec.expected_payoff), repr(rec.model_l2)])


def write_aggregate_csv(path: str | Path, series: list[MatchSeries]) -> None:
    table = aggregate(series)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "iter", "mean_payoff", "mean_model_l2"])
        for name, (pay, l2) in table.items():
            for t in range(len(pay)):
                writer.writerow([name, t + 1, repr(float(pay[t])),
                                 repr(float(l2[t]))])


def write_manifest(path: str | Path, config: MatchConfig) -> None:
    body = {
        "version": __version__,
        "game": config.game,
        "iterations": config.iterations,
        "opponents": config.opponents,
        "samples": config.samples,
        "alpha": config.alpha,
        "seed": config.seed,
        "algorithms": [k.value for k in config.algorithms],
        "jobs": config.jobs,
    }
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2)
        fh.write("\n")


def config_from_manifest(path: str | Path) -> MatchConfig:
    with open(path) as fh:
        body = json.load(fh)
    return MatchConfig(
        game=body["game"],
        iterations=body["iterations"],
        opponents=body["opponents"],
        samples=body["samples"],
        alpha=body["alpha"],
        seed=body["seed"],
        algorithms=tuple(ResponseKind(a) for a in body["algorithms"]),
        jobs=body.get("jobs", 1),
    )
