"""Tree construction, leaf census, and post-hand candidate sets."""

from fractions import Fraction

import pytest

from seqmodel.games import (
    CHANCE,
    PLAYER_1,
    PLAYER_2,
    GameTree,
    Infoset,
    Node,
    ObservabilityFunction,
    build_kuhn,
    build_rps,
    observe,
    validate_tree,
)

# canonical leaf order: deals (K,Q) (K,J) (Q,K) (Q,J) (J,K) (J,Q), within a
# deal bet-call, bet-fold, check-bet-call, check-bet-fold, check-check
KUHN_LEAF_ORDER = [
    "B_Kca_Q", "B_Kf_Q", "Ch_Kb_QCa_K", "Ch_Kb_QF_K", "Ch_Kch_Q",
    "B_Kca_J", "B_Kf_J", "Ch_Kb_JCa_K", "Ch_Kb_JF_K", "Ch_Kch_J",
    "B_Qca_K", "B_Qf_K", "Ch_Qb_KCa_Q", "Ch_Qb_KF_Q", "Ch_Qch_K",
    "B_Qca_J", "B_Qf_J", "Ch_Qb_JCa_Q", "Ch_Qb_JF_Q", "Ch_Qch_J",
    "B_Jca_K", "B_Jf_K", "Ch_Jb_KCa_J", "Ch_Jb_KF_J", "Ch_Jch_K",
    "B_Jca_Q", "B_Jf_Q", "Ch_Jb_QCa_J", "Ch_Jb_QF_J", "Ch_Jch_Q",
]

# the 18 showdown / checked-down leaves are singletons for both players;
# the 12 fold leaves hide the unseen card from exactly one player each
KUHN_FOLD_SETS = {
    "B_Kf_Q":      ({"B_Kf_Q", "B_Kf_J"},           {"B_Kf_Q", "B_Jf_Q"}),
    "B_Kf_J":      ({"B_Kf_J", "B_Kf_Q"},           {"B_Kf_J", "B_Qf_J"}),
    "B_Qf_K":      ({"B_Qf_K", "B_Qf_J"},           {"B_Qf_K", "B_Jf_K"}),
    "B_Qf_J":      ({"B_Qf_J", "B_Qf_K"},           {"B_Qf_J", "B_Kf_J"}),
    "B_Jf_K":      ({"B_Jf_K", "B_Jf_Q"},           {"B_Jf_K", "B_Qf_K"}),
    "B_Jf_Q":      ({"B_Jf_Q", "B_Jf_K"},           {"B_Jf_Q", "B_Kf_Q"}),
    "Ch_Kb_QF_K":  ({"Ch_Kb_QF_K", "Ch_Kb_JF_K"},   {"Ch_Kb_QF_K", "Ch_Jb_QF_J"}),
    "Ch_Kb_JF_K":  ({"Ch_Kb_JF_K", "Ch_Kb_QF_K"},   {"Ch_Kb_JF_K", "Ch_Qb_JF_Q"}),
    "Ch_Qb_KF_Q":  ({"Ch_Qb_KF_Q", "Ch_Qb_JF_Q"},   {"Ch_Qb_KF_Q", "Ch_Jb_KF_J"}),
    "Ch_Qb_JF_Q":  ({"Ch_Qb_JF_Q", "Ch_Qb_KF_Q"},   {"Ch_Qb_JF_Q", "Ch_Kb_JF_K"}),
    "Ch_Jb_KF_J":  ({"Ch_Jb_KF_J", "Ch_Jb_QF_J"},   {"Ch_Jb_KF_J", "Ch_Qb_KF_Q"}),
    "Ch_Jb_QF_J":  ({"Ch_Jb_QF_J", "Ch_Jb_KF_J"},   {"Ch_Jb_QF_J", "Ch_Kb_QF_K"}),
}

RANK = {"J": 0, "Q": 1, "K": 2}


def expected_kuhn_payoff(label: str) -> int:
    cards = [c for c in label if c in "KQJ"]
    c1 = cards[0]
    c2 = cards[1]
    sign = 1 if RANK[c1] > RANK[c2] else -1
    if "ca" in label or "Ca" in label:
        return 2 * sign
    if label.startswith("B"):
        return 1          # player 2 folded to the bet
    if "F_" in label:
        return -1         # player 1 folded to the raise
    return sign           # checked down


@pytest.fixture(scope="module")
def kuhn():
    return build_kuhn()


def test_kuhn_leaf_census(kuhn):
    tree, _ = kuhn
    assert [leaf.label for leaf in tree.leaves] == KUHN_LEAF_ORDER
    for leaf in tree.leaves:
        assert leaf.chance_prob == Fraction(1, 6)
        assert leaf.payoff1 == expected_kuhn_payoff(leaf.label)
    assert {int(leaf.payoff1) for leaf in tree.leaves} == {-2, -1, 1, 2}


def test_kuhn_infosets(kuhn):
    tree, _ = kuhn
    assert [i.label for i in tree.infosets[PLAYER_1]] == [
        "K", "Kcb", "Q", "Qcb", "J", "Jcb"]
    assert [i.label for i in tree.infosets[PLAYER_2]] == [
        "Qb", "Qch", "Jb", "Jch", "Kb", "Kch"]
    for player in (PLAYER_1, PLAYER_2):
        for iset in tree.infosets[player]:
            assert len(iset.nodes) == 2
            assert len(iset.actions) == 2
    assert tree.infosets[PLAYER_1][0].actions == ("B_K", "Ch_K")
    assert tree.infosets[PLAYER_1][1].actions == ("Ca_K", "F_K")
    assert tree.infosets[PLAYER_2][0].actions == ("ca_Q", "f_Q")
    assert tree.infosets[PLAYER_2][1].actions == ("b_Q", "ch_Q")


def test_kuhn_observability_exact(kuhn):
    tree, obs = kuhn
    for label in KUHN_LEAF_ORDER:
        want1, want2 = KUHN_FOLD_SETS.get(label, ({label}, {label}))
        got1 = {leaf.label for leaf in observe(obs, PLAYER_1, label)}
        got2 = {leaf.label for leaf in observe(obs, PLAYER_2, label)}
        assert got1 == want1, f"o_1({label})"
        assert got2 == want2, f"o_2({label})"


def test_observability_invariants(kuhn):
    tree, obs = kuhn
    for leaf in tree.leaves:
        for player, chain_of in ((PLAYER_1, lambda l: l.chain1),
                                 (PLAYER_2, lambda l: l.chain2)):
            members = observe(obs, player, leaf.index)
            assert leaf.label in {m.label for m in members}
            for member in members:
                assert chain_of(member) == chain_of(leaf), \
                    f"player {player} chain differs inside o({leaf.label})"


def test_observe_lookup_errors(kuhn):
    _, obs = kuhn
    assert observe(obs, PLAYER_1, 0)[0].label == "B_Kca_Q"
    with pytest.raises(ValueError):
        observe(obs, PLAYER_1, "nonsense")
    with pytest.raises(ValueError):
        observe(obs, PLAYER_1, 30)
    with pytest.raises(ValueError):
        observe(obs, 3, 0)


def test_rps_tree():
    tree, obs = build_rps()
    assert len(tree.leaves) == 9
    assert tree.leaves[0].label == "Rock rock"
    assert tree.leaves[0].chance_prob == 1
    wins = {(l.label, int(l.payoff1)) for l in tree.leaves}
    assert ("Rock scissors", 1) in wins
    assert ("Rock paper", -1) in wins
    assert ("Scissors scissors", 0) in wins
    for leaf in tree.leaves:
        for player in (PLAYER_1, PLAYER_2):
            members = observe(obs, player, leaf.index)
            assert [m.label for m in members] == [leaf.label]
    # antisymmetry of the move grid
    by_moves = {tuple(l.label.split(" ")): int(l.payoff1) for l in tree.leaves}
    for (m1, m2), v in by_moves.items():
        assert by_moves[(m2.capitalize(), m1.lower())] == -v


def test_imperfect_recall_rejected():
    # player 1 moves twice; the second-round nodes are merged into one
    # information set even though they follow different first moves
    nodes = [
        Node(PLAYER_1, ("a", "b"), (1, 2), infoset=0),
        Node(PLAYER_1, ("c", "d"), (3, 4), infoset=1),
        Node(PLAYER_1, ("c", "d"), (5, 6), infoset=1),
        Node(None, payoff1=Fraction(0)),
        Node(None, payoff1=Fraction(0)),
        Node(None, payoff1=Fraction(0)),
        Node(None, payoff1=Fraction(0)),
    ]
    infosets = {PLAYER_1: [
        Infoset(PLAYER_1, 0, "first", ("a", "b"), (0,)),
        Infoset(PLAYER_1, 1, "second", ("c", "d"), (1, 2)),
    ], PLAYER_2: []}
    tree = GameTree("forgetful", nodes, infosets)
    with pytest.raises(ValueError, match="imperfect recall"):
        validate_tree(tree)


def test_bad_chance_probs_rejected():
    nodes = [
        Node(CHANCE, ("l", "r"), (1, 3),
             probs=(Fraction(1, 2), Fraction(1, 3))),
        Node(PLAYER_1, ("L",), (2,), infoset=0),
        Node(None, payoff1=Fraction(1)),
        Node(PLAYER_1, ("R",), (4,), infoset=1),
        Node(None, payoff1=Fraction(-1)),
    ]
    infosets = {PLAYER_1: [
        Infoset(PLAYER_1, 0, "left", ("L",), (1,)),
        Infoset(PLAYER_1, 1, "right", ("R",), (3,)),
    ], PLAYER_2: []}
    tree = GameTree("lopsided", nodes, infosets)
    with pytest.raises(ValueError, match="sum"):
        validate_tree(tree)


def test_duplicate_leaf_labels_rejected():
    nodes = [
        Node(PLAYER_1, ("x", "x"), (1, 2), infoset=0),
        Node(None, payoff1=Fraction(0)),
        Node(None, payoff1=Fraction(0)),
    ]
    with pytest.raises(ValueError, match="duplicate"):
        GameTree("clash", nodes,
                 {PLAYER_1: [Infoset(PLAYER_1, 0, "only", ("x", "x"), (0,))],
                  PLAYER_2: []})
