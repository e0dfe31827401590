"""Sampling-based opponent models, best responses, and benchmark strategies.

The sampling models keep k prior draws and reweight them by the
likelihood of each observed candidate set; they differ only in how a
play is picked from the weighted bag (average, argmax, or a draw).  The
best response is exact backward induction over the responder's own
decision structure against a fixed opponent plan.  For the poker game
the one-parameter equilibrium family gives the strongest
opponent-agnostic benchmark; every member is re-certified against the
best-response oracle before use.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .posterior import DirichletPrior, LikelihoodTerm, sample_opponent
from .sequence_form import (
    SequenceFormGame,
    behavioral_to_realization,
    expected_payoff,
)


class ResponseKind(str, Enum):
    """Which decision rule turns history into a strategy."""

    FMAP = "fmap"
    BBR = "bbr"
    MAP = "map"
    THOMPSON = "thompson"
    BEST_NASH = "bestnash"
    BEST_RESPONSE = "bestresponse"


SAMPLING_KINDS = (ResponseKind.BBR, ResponseKind.MAP, ResponseKind.THOMPSON)


@dataclass
class SampledPosterior:
    """k fixed prior draws with running log-likelihood weights."""

    behavioral: list[list[np.ndarray]]
    plans: np.ndarray                  # (k, n_sequences)
    log_weights: np.ndarray            # (k,)

    @classmethod
    def from_prior(cls, game: SequenceFormGame, prior: DirichletPrior,
                   k: int, rng: np.random.Generator) -> "SampledPosterior":
        if k < 1:
            raise ValueError("need at least one sample")
        behavioral = [sample_opponent(prior, rng) for _ in range(k)]
        plans = np.stack([behavioral_to_realization(game, prior.player, b)
                          for b in behavioral])
        return cls(behavioral, plans, np.zeros(k))

    def weights(self) -> np.ndarray:
        """Normalized posterior weights, stabilized by max-log subtraction."""
        top = self.log_weights.max()
        if not np.isfinite(top):
            raise ValueError("every sample has been eliminated")
        w = np.exp(self.log_weights - top)
        return w / w.sum()


def update_weights(posterior: SampledPosterior,
                   term: LikelihoodTerm) -> SampledPosterior:
    """One observed candidate set folded into every sample's weight."""
    idx, q = term.arrays()
    like = posterior.plans[:, idx] @ q
    with np.errstate(divide="ignore"):
        bump = np.log(like) * term.count
    return SampledPosterior(posterior.behavioral, posterior.plans,
                            posterior.log_weights + bump)


def model(posterior: SampledPosterior, kind: ResponseKind,
          rng: np.random.Generator | None = None) -> np.ndarray:
    """Collapse the weighted samples into one plan to respond to."""
    w = posterior.weights()
    if kind == ResponseKind.BBR:
        return w @ posterior.plans
    if kind == ResponseKind.MAP:
        return posterior.plans[int(np.argmax(posterior.log_weights))]
    if kind == ResponseKind.THOMPSON:
        if rng is None:
            raise ValueError("a random draw needs a generator")
        pick = int(np.searchsorted(np.cumsum(w), rng.random()))
        return posterior.plans[min(pick, len(w) - 1)]
    raise ValueError(f"{kind.value} does not define a sampled model")


def best_response(game: SequenceFormGame, opponent_plan: np.ndarray,
                  player: int = 1) -> tuple[np.ndarray, float]:
    """Exact pure best response to a fixed opponent plan.

    Backward induction over the responder's sequences: the value of a
    sequence is its direct chance-weighted payoff plus, for every
    decision point it feeds, the best child value.  Ties take the first
    action in table order.  Returns the pure plan and its value.
    """
    other = 2 if player == 1 else 1
    F, f = game.constraints(other)
    opponent_plan = np.asarray(opponent_plan, dtype=float)
    if (np.abs(F @ opponent_plan - f).max() > 1e-8
            or (opponent_plan < -1e-9).any()):
        raise ValueError("opponent plan is not feasible")

    if player == 1:
        gains = game.A @ opponent_plan
    else:
        gains = game.B.T @ opponent_plan

    isets = game.infosets[player]
    d = len(game.seq_labels[player])
    children: dict[int, list[int]] = {}
    for k, iset in enumerate(isets):
        children.setdefault(iset.parent_seq, []).append(k)

    value = np.full(d, np.nan)
    choice: dict[int, int] = {}

    def seq_value(s: int) -> float:
        if not np.isnan(value[s]):
            return value[s]
        v = gains[s]
        for k in children.get(s, []):
            vals = [seq_value(a) for a in isets[k].action_seqs]
            best = int(np.argmax(vals))
            choice[k] = isets[k].action_seqs[best]
            v += vals[best]
        value[s] = v
        return v

    total = seq_value(0)
    plan = np.zeros(d)
    plan[0] = 1.0
    for k, iset in enumerate(isets):
        if plan[iset.parent_seq] > 0:
            plan[choice[k]] = plan[iset.parent_seq]
    return plan, float(total)


def kuhn_p1_equilibrium(game: SequenceFormGame, alpha: float) -> np.ndarray:
    """One member of player 1's equilibrium family for the poker game.

    Bet the high card three times as often as the low card, never the
    middle one; facing a bet after checking, always call high, call
    middle with probability alpha + 1/3, fold low.
    """
    if not (0.0 <= alpha <= 1 / 3 + 1e-12):
        raise ValueError("family parameter must lie in [0, 1/3]")
    by_label = {
        "K": [3 * alpha, 1 - 3 * alpha],
        "Kcb": [1.0, 0.0],
        "Q": [0.0, 1.0],
        "Qcb": [alpha + 1 / 3, 2 / 3 - alpha],
        "J": [alpha, 1 - alpha],
        "Jcb": [0.0, 1.0],
    }
    beh = [np.array(by_label[i.label]) for i in game.infosets[1]]
    return behavioral_to_realization(game, 1, beh)


KUHN_GAME_VALUE = -1 / 18
_FAMILY_GRID = [Fraction(k, 60) for k in range(21)]   # 0, 1/60, ..., 1/3


def best_nash_kuhn(game: SequenceFormGame,
                   y_star: np.ndarray) -> tuple[np.ndarray, float]:
    """The family member that earns the most against a fixed opponent.

    Every candidate is first certified: the opponent's exact best
    response against it must hold player 1 to the game value, nothing
    lower.  The payoff is affine in the family parameter, so the grid
    maximum sits at an endpoint; the interior points double as a check.
    """
    best_plan = None
    best_value = -np.inf
    for a in _FAMILY_GRID:
        x = kuhn_p1_equilibrium(game, float(a))
        _, reply_value = best_response(game, x, player=2)
        guaranteed = -reply_value
        if abs(guaranteed - KUHN_GAME_VALUE) > 1e-9:
            raise RuntimeError(
                f"family member {a} only guarantees {guaranteed:.12f}")
        value = expected_payoff(game, x, y_star)
        if value > best_value:
            best_plan, best_value = x, value
    return best_plan, float(best_value)


def hull_distance_series(game: SequenceFormGame, prior: DirichletPrior,
                         iterations: int = 10_000) -> np.ndarray:
    """Model distance over time when the truth lies outside the sample hull.

    Three fixed samples, truth (0.8, 0.1, 0.1): no reweighting can push
    the averaged model's first component past 0.5, so the distance stays
    bounded away from zero however long the match runs.  The observation
    log is deterministic: each action is fed at exactly its truth
    frequency (largest-deficit order), so every run reports the same
    series.
    """
    truth = np.array([0.8, 0.1, 0.1])
    samples = [np.array([0.5, 0.3, 0.2]),
               np.array([0.3, 0.5, 0.2]),
               np.array([0.2, 0.3, 0.5])]
    behavioral = [[s] for s in samples]
    plans = np.stack([behavioral_to_realization(game, prior.player, b)
                      for b in behavioral])
    posterior = SampledPosterior(behavioral, plans, np.zeros(3))
    truth_plan = behavioral_to_realization(game, prior.player, [truth])

    seqs = game.infosets[prior.player][0].action_seqs
    counts = np.zeros(3)
    out = np.empty(iterations)
    for t in range(iterations):
        a = int(np.argmax((t + 1) * truth - counts))
        counts[a] += 1
        term = LikelihoodTerm((seqs[a],), (1.0,), 1)
        posterior = update_weights(posterior, term)
        m = model(posterior, ResponseKind.BBR)
        out[t] = np.linalg.norm(m - truth_plan)
    return out


def takeover_series(game: SequenceFormGame, prior: DirichletPrior,
                    iterations: int = 300) -> np.ndarray:
    """Normalized sample weights under exactly balanced observations.

    Truth is uniform; the three samples all miss it, and the ratio of
    their weights after each balanced block of three observations is a
    fixed power law, so the sample whose action product is largest takes
    all the weight even though it is not the closest in every direction.
    """
    samples = [np.array([0.2, 0.4, 0.4]),
               np.array([0.6, 0.3, 0.1]),
               np.array([0.2, 0.3, 0.5])]
    behavioral = [[s] for s in samples]
    plans = np.stack([behavioral_to_realization(game, prior.player, b)
                      for b in behavioral])
    posterior = SampledPosterior(behavioral, plans, np.zeros(3))

    seqs = game.infosets[prior.player][0].action_seqs
    out = np.empty((iterations, 3))
    for t in range(iterations):
        term = LikelihoodTerm((seqs[t % 3],), (1.0,), 1)
        posterior = update_weights(posterior, term)
        out[t] = posterior.weights()
    return out
