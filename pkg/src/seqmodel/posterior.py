"""Posterior over the opponent's realization plan.

The prior is an independent Dirichlet at each of the opponent's information
sets; its exponents transfer to sequence space by attaching each action's
parameter to the sequence that ends with that action.  A hand's evidence is
the candidate set the observing player is left with: the opponent sequences
that could have produced what was seen, weighted by the normalized chance
probability of each candidate path.  The log posterior (up to a constant) is

    sum_i (alpha_i - 1) log y_i  +  sum_terms count * log(sum_j q_j y_j)

and the solver minimizes its negation, so the objective here is convex on
the positive orthant whenever every alpha_i >= 1.

Observations compress into a multiset keyed by candidate-set identity, so
cost per evaluation grows with the number of distinct candidate sets, not
with hands played.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .games import ObservabilityFunction, observe
from .sequence_form import SequenceFormGame


@dataclass
class DirichletPrior:
    """Per-infoset Dirichlet parameters for one player's behavior."""

    player: int
    alphas: list[np.ndarray]        # one vector per information set
    seq_alpha: np.ndarray = field(init=False)   # per-sequence exponent; [0] unused

    game: SequenceFormGame | None = None

    def __post_init__(self):
        if self.game is None:
            raise ValueError("prior needs its game for sequence bookkeeping")
        isets = self.game.infosets[self.player]
        if len(self.alphas) != len(isets):
            raise ValueError(
                f"expected {len(isets)} alpha vectors, got {len(self.alphas)}")
        d = len(self.game.seq_labels[self.player])
        seq_alpha = np.ones(d)
        for iset, a in zip(isets, self.alphas):
            a = np.asarray(a, dtype=float)
            if a.shape != (len(iset.action_seqs),):
                raise ValueError(f"infoset {iset.label}: wrong alpha length")
            if (a <= 0).any():
                raise ValueError(f"infoset {iset.label}: alphas must be positive")
            seq_alpha[list(iset.action_seqs)] = a
        self.seq_alpha = seq_alpha


def uniform_prior(game: SequenceFormGame, player: int,
                  alpha: float = 2.0) -> DirichletPrior:
    """Same parameter for every action everywhere (symmetric prior)."""
    alphas = [np.full(len(i.action_seqs), float(alpha))
              for i in game.infosets[player]]
    return DirichletPrior(player, alphas, game=game)


def sample_opponent(prior: DirichletPrior, rng: np.random.Generator) -> list[np.ndarray]:
    """Draw a behavioral strategy, one Dirichlet draw per information set."""
    return [rng.dirichlet(a) for a in prior.alphas]


@dataclass(frozen=True)
class LikelihoodTerm:
    """One distinct candidate set: opponent sequences with chance weights."""

    seqs: tuple[int, ...]
    weights: tuple[float, ...]
    count: int
    idx: np.ndarray = field(init=False, repr=False, compare=False)
    q: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "idx", np.array(self.seqs, dtype=np.intp))
        object.__setattr__(self, "q", np.array(self.weights))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.idx, self.q


class ObservationLog:
    """Compressed multiset of per-hand candidate sets for the modeled player."""

    def __init__(self, game: SequenceFormGame, player: int = 2, observer: int = 1):
        self.game = game
        self.player = player
        self.observer = observer
        self.terms: dict[tuple, LikelihoodTerm] = {}
        self.total = 0

    def copy(self) -> "ObservationLog":
        out = ObservationLog(self.game, self.player, self.observer)
        out.terms = dict(self.terms)
        out.total = self.total
        return out

    def term_list(self) -> list[LikelihoodTerm]:
        return list(self.terms.values())


def observation_term(game: SequenceFormGame, obs: ObservabilityFunction,
                     leaf: str | int, player: int = 2,
                     observer: int = 1) -> LikelihoodTerm:
    """Candidate set produced by one observed hand, as a count-1 term.

    Candidates sharing the modeled player's sequence merge; weights are the
    chance-path probabilities normalized over the set, computed in exact
    arithmetic so identical candidate sets always hash identically.
    """
    members = observe(obs, observer, leaf)
    weight_by_seq: dict[int, Fraction] = {}
    for member in members:
        i, j, prob = game.leaf_seqs[member.index]
        seq = i if player == 1 else j
        weight_by_seq[seq] = weight_by_seq.get(seq, Fraction(0)) + prob
    total = sum(weight_by_seq.values())
    pairs = tuple(sorted((seq, float(w / total))
                         for seq, w in weight_by_seq.items()))
    return LikelihoodTerm(tuple(p[0] for p in pairs),
                          tuple(p[1] for p in pairs), 1)


def append_observation(log: ObservationLog, obs: ObservabilityFunction,
                       leaf: str | int) -> ObservationLog:
    """Return a log extended with the candidate set produced by `leaf`."""
    term = observation_term(log.game, obs, leaf, log.player, log.observer)
    key = tuple(zip(term.seqs, term.weights))
    out = log.copy()
    prev = out.terms.get(key)
    count = (prev.count if prev else 0) + 1
    out.terms[key] = LikelihoodTerm(term.seqs, term.weights, count)
    out.total += 1
    return out


class PackedTerms:
    """All of a log's terms flattened for vectorized evaluation."""

    __slots__ = ("idx", "q", "counts", "starts", "spread")

    def __init__(self, log: ObservationLog):
        terms = log.term_list()
        if terms:
            self.idx = np.concatenate([t.arrays()[0] for t in terms])
            self.q = np.concatenate([t.arrays()[1] for t in terms])
            self.counts = np.array([float(t.count) for t in terms])
            lengths = [len(t.seqs) for t in terms]
            self.starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
            self.spread = np.repeat(np.arange(len(terms)), lengths)
        else:
            self.idx = np.empty(0, dtype=np.intp)
            self.q = np.empty(0)
            self.counts = np.empty(0)
            self.starts = np.empty(0, dtype=np.intp)
            self.spread = np.empty(0, dtype=np.intp)

    def sums(self, y: np.ndarray) -> np.ndarray:
        """Per-term candidate mass q . y."""
        if len(self.counts) == 0:
            return self.counts
        return np.add.reduceat(self.q * y[self.idx], self.starts)


def neg_log_posterior(y: np.ndarray, prior: DirichletPrior,
                      log: ObservationLog) -> float:
    """Objective the solver minimizes (negated log posterior, no constant)."""
    y = np.asarray(y, dtype=float)
    alpha = prior.seq_alpha
    mask = alpha != 1.0
    if (y[mask] <= 0).any():
        raise ValueError("non-positive plan weight where the prior needs log y")
    value = float(((alpha[mask] - 1.0) * np.log(y[mask])).sum())
    for term in log.terms.values():
        idx, q = term.arrays()
        s = float(q @ y[idx])
        if s <= 0:
            raise ValueError("candidate set has non-positive total weight")
        value += term.count * np.log(s)
    return -value


def gradient(y: np.ndarray, prior: DirichletPrior,
             log: ObservationLog) -> np.ndarray:
    """Gradient of neg_log_posterior; component 0 (empty sequence) is zero."""
    y = np.asarray(y, dtype=float)
    alpha = prior.seq_alpha
    mask = alpha != 1.0
    if (y[mask] <= 0).any():
        raise ValueError("non-positive plan weight where the prior needs log y")
    g = np.zeros_like(y)
    g[mask] = (1.0 - alpha[mask]) / y[mask]
    for term in log.terms.values():
        idx, q = term.arrays()
        s = float(q @ y[idx])
        if s <= 0:
            raise ValueError("candidate set has non-positive total weight")
        g[idx] -= term.count * q / s
    return g
