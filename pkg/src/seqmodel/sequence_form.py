"""Sequence-form translation of a two-player tree game.

Each player's pure decision points collapse into *sequences*: the empty
sequence plus one sequence per (information set, action) pair, ordered so
that every information set's block follows its parent sequence.  A mixed
strategy becomes a realization plan y with E y = e (player 1) or F y = f
(player 2), y >= 0, where each constraint matrix has one row per
information set plus a normalization row.  Expected payoff to player 1 is
the bilinear form x^T A y with the chance weights folded into A.

Matrix entries are accumulated as exact fractions; the ndarray views are
the only float boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .games import PLAYER_1, PLAYER_2, GameTree, validate_tree

EMPTY_LABEL = "∅"


@dataclass
class InfosetSeqs:
    """Column bookkeeping for one information set."""

    label: str
    parent_seq: int
    action_seqs: tuple[int, ...]


@dataclass
class SequenceFormGame:
    name: str
    tree: GameTree
    seq_labels: dict[int, list[str]]               # per player, [0] is empty
    infosets: dict[int, list[InfosetSeqs]]
    E: np.ndarray                                   # player 1 constraints
    e: np.ndarray
    F: np.ndarray                                   # player 2 constraints
    f: np.ndarray
    A: np.ndarray                                   # payoff to player 1
    B: np.ndarray                                   # payoff to player 2 (= -A)
    A_exact: dict[tuple[int, int], Fraction]
    leaf_seqs: list[tuple[int, int, Fraction]]      # per leaf: (i, j, chance prob)

    def dims(self) -> tuple[int, int]:
        return len(self.seq_labels[PLAYER_1]), len(self.seq_labels[PLAYER_2])

    def constraints(self, player: int) -> tuple[np.ndarray, np.ndarray]:
        if player == PLAYER_1:
            return self.E, self.e
        if player == PLAYER_2:
            return self.F, self.f
        raise ValueError(f"no constraint system for player {player}")


def derive(tree: GameTree) -> SequenceFormGame:
    """Build constraint and payoff matrices from a validated tree."""
    validate_tree(tree)

    seq_labels: dict[int, list[str]] = {}
    infosets: dict[int, list[InfosetSeqs]] = {}
    seq_of_chain: dict[int, dict[tuple, int]] = {}
    for player in (PLAYER_1, PLAYER_2):
        labels = [EMPTY_LABEL]
        chain_map: dict[tuple, int] = {(): 0}
        cols: list[InfosetSeqs] = []
        for iset in tree.infosets[player]:
            parent_chain = tree.own_chain[iset.nodes[0]]
            if parent_chain not in chain_map:
                raise ValueError(
                    f"infoset {iset.label}: parent sequence not yet defined; "
                    "information sets must be declared parent-first")
            parent = chain_map[parent_chain]
            parent_label = labels[parent] if parent != 0 else ""
            action_seqs = []
            for k, action in enumerate(iset.actions):
                chain = parent_chain + ((iset.index, k),)
                chain_map[chain] = len(labels)
                action_seqs.append(len(labels))
                labels.append(parent_label + tree.label_sep + action
                              if parent_label else action)
            cols.append(InfosetSeqs(iset.label, parent, tuple(action_seqs)))
        seq_labels[player] = labels
        infosets[player] = cols
        seq_of_chain[player] = chain_map

    def constraint_matrix(player: int) -> tuple[np.ndarray, np.ndarray]:
        rows = len(infosets[player]) + 1
        d = len(seq_labels[player])
        M = np.zeros((rows, d), dtype=np.int64)
        M[0, 0] = 1
        for r, iset in enumerate(infosets[player], start=1):
            M[r, iset.parent_seq] = -1
            for s in iset.action_seqs:
                M[r, s] = 1
        rhs = np.zeros(rows, dtype=np.int64)
        rhs[0] = 1
        return M, rhs

    E, e = constraint_matrix(PLAYER_1)
    F, f = constraint_matrix(PLAYER_2)

    d1, d2 = len(seq_labels[PLAYER_1]), len(seq_labels[PLAYER_2])
    A_exact: dict[tuple[int, int], Fraction] = {}
    leaf_seqs = []
    for leaf in tree.leaves:
        i = seq_of_chain[PLAYER_1][leaf.chain1]
        j = seq_of_chain[PLAYER_2][leaf.chain2]
        contribution = leaf.payoff1 * leaf.chance_prob
        A_exact[(i, j)] = A_exact.get((i, j), Fraction(0)) + contribution
        leaf_seqs.append((i, j, leaf.chance_prob))
    A = np.zeros((d1, d2))
    for (i, j), v in A_exact.items():
        A[i, j] = float(v)
    A_exact = {ij: v for ij, v in A_exact.items() if v != 0}

    return SequenceFormGame(tree.name, tree, seq_labels, infosets,
                            E, e, F, f, A, -A, A_exact, leaf_seqs)


def _check_behavioral(game: SequenceFormGame, player: int, strategy) -> list[np.ndarray]:
    isets = game.infosets[player]
    if len(strategy) != len(isets):
        raise ValueError(
            f"expected {len(isets)} action distributions, got {len(strategy)}")
    rows = []
    for iset, probs in zip(isets, strategy):
        p = np.asarray(probs, dtype=float)
        if p.shape != (len(iset.action_seqs),):
            raise ValueError(f"infoset {iset.label}: wrong number of actions")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"infoset {iset.label}: not a distribution")
        rows.append(p)
    return rows


def behavioral_to_realization(game: SequenceFormGame, player: int,
                              strategy) -> np.ndarray:
    """Realization plan: product of the player's own action probabilities."""
    rows = _check_behavioral(game, player, strategy)
    y = np.zeros(len(game.seq_labels[player]))
    y[0] = 1.0
    for iset, p in zip(game.infosets[player], rows):
        y[list(iset.action_seqs)] = y[iset.parent_seq] * p
    return y


def realization_to_behavioral(game: SequenceFormGame, player: int,
                              y: np.ndarray) -> list[np.ndarray]:
    """Per-infoset conditional distributions; uniform where the plan is dead.

    An information set whose parent sequence has zero realization weight is
    never reached under y; any conditional is behaviorally equivalent there,
    and the uniform one is returned.
    """
    y = np.asarray(y, dtype=float)
    M, rhs = game.constraints(player)
    if y.shape != (M.shape[1],):
        raise ValueError(f"plan has shape {y.shape}, want ({M.shape[1]},)")
    if (y < -1e-9).any() or np.abs(M @ y - rhs).max() > 1e-6:
        raise ValueError("not a realization plan (constraint violation)")
    out = []
    for iset in game.infosets[player]:
        w = y[iset.parent_seq]
        n = len(iset.action_seqs)
        if w <= 0.0:
            out.append(np.full(n, 1.0 / n))
        else:
            out.append(np.clip(y[list(iset.action_seqs)] / w, 0.0, None))
    return out


def uniform_behavioral(game: SequenceFormGame, player: int) -> list[np.ndarray]:
    return [np.full(n, 1.0 / n)
            for n in (len(i.action_seqs) for i in game.infosets[player])]


def uniform_plan(game: SequenceFormGame, player: int) -> np.ndarray:
    return behavioral_to_realization(game, player, uniform_behavioral(game, player))


def expected_payoff(game: SequenceFormGame, x: np.ndarray, y: np.ndarray) -> float:
    """Player 1's expected payoff x^T A y for realization plans x, y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d1, d2 = game.dims()
    if x.shape != (d1,) or y.shape != (d2,):
        raise ValueError(f"plan shapes {x.shape}/{y.shape}, want ({d1},)/({d2},)")
    return float(x @ game.A @ y)
