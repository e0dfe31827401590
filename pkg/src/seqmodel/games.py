"""Exact game trees for one-card poker (Kuhn) and rock-paper-scissors.

Both games are represented as explicit trees: a chance node with rational
outcome probabilities, decision nodes grouped into information sets, and
terminal nodes carrying the payoff to player 1 (zero-sum, so player 2
receives the negation).  Alongside the tree we build, for each player, a
map from every terminal node to the set of terminal nodes that player
cannot tell apart once the hand is over.  In the poker game a fold ends
the hand without a showdown, so the card of the player who did not fold
to a bet stays hidden; showdowns and checked-down hands reveal the deal.

All probabilities and payoffs are fractions.Fraction so downstream matrix
construction is exact until the float boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

CHANCE = 0
PLAYER_1 = 1
PLAYER_2 = 2

CARDS = ("K", "Q", "J")
CARD_RANK = {"J": 0, "Q": 1, "K": 2}


@dataclass
class Node:
    """One tree node.  player is CHANCE / PLAYER_1 / PLAYER_2, None at leaves."""

    player: int | None
    actions: tuple[str, ...] = ()
    children: tuple[int, ...] = ()
    probs: tuple[Fraction, ...] | None = None  # chance nodes only
    infoset: int | None = None                 # index into GameTree.infosets[player]
    payoff1: Fraction | None = None            # leaves only


@dataclass
class Infoset:
    player: int
    index: int
    label: str
    actions: tuple[str, ...]
    nodes: tuple[int, ...]


@dataclass
class Leaf:
    """Terminal-node view: payoff to player 1, chance weight of the path, label.

    chain1/chain2 are the acting players' own (infoset, action) pairs along
    the path, in play order; they identify each player's sequence at this leaf.
    """

    index: int
    node_id: int
    label: str
    payoff1: Fraction
    chance_prob: Fraction
    chain1: tuple[tuple[int, int], ...]
    chain2: tuple[tuple[int, int], ...]


class GameTree:
    """Finished tree plus derived per-leaf data.

    Construction only checks local structure; call validate_tree() (the
    builders do) for the information-set and recall checks that the
    sequence-form derivation relies on.
    """

    def __init__(self, name: str, nodes: list[Node],
                 infosets: dict[int, list[Infoset]], label_sep: str = ""):
        self.name = name
        self.nodes = nodes
        self.infosets = infosets
        self.label_sep = label_sep
        self.root = 0
        self.leaves: list[Leaf] = []
        self.leaf_index: dict[str, int] = {}
        # own (infoset, action) chain of the acting player before each node
        self.own_chain: dict[int, tuple[tuple[int, int], ...]] = {}
        self._walk()

    def _walk(self) -> None:
        # iterative DFS, children in declared order so leaf order is canonical
        stack = [(self.root, Fraction(1), [], (), ())]
        seen = set()
        while stack:
            nid, prob, path, c1, c2 = stack.pop()
            if nid in seen:
                raise ValueError(f"node {nid} reachable twice")
            seen.add(nid)
            node = self.nodes[nid]
            if node.player is None:
                if node.payoff1 is None:
                    raise ValueError(f"leaf {nid} has no payoff")
                label = self.label_sep.join(path)
                if label in self.leaf_index:
                    raise ValueError(f"duplicate leaf label {label!r}")
                leaf = Leaf(len(self.leaves), nid, label, node.payoff1,
                            prob, c1, c2)
                self.leaf_index[label] = leaf.index
                self.leaves.append(leaf)
                continue
            self.own_chain[nid] = c1 if node.player == PLAYER_1 else c2
            if len(node.children) != len(node.actions):
                raise ValueError(f"node {nid}: children/actions mismatch")
            # push in reverse so the first action is popped first
            for k in reversed(range(len(node.children))):
                child = node.children[k]
                if node.player == CHANCE:
                    step = prob * node.probs[k]
                    stack.append((child, step, path, c1, c2))
                else:
                    nc1 = c1 + ((node.infoset, k),) if node.player == PLAYER_1 else c1
                    nc2 = c2 + ((node.infoset, k),) if node.player == PLAYER_2 else c2
                    stack.append((child, prob, path + [node.actions[k]], nc1, nc2))
        if len(seen) != len(self.nodes):
            raise ValueError("unreachable nodes in tree")

    def leaf(self, key: str | int) -> Leaf:
        if isinstance(key, str):
            if key not in self.leaf_index:
                raise ValueError(f"unknown leaf {key!r}")
            return self.leaves[self.leaf_index[key]]
        if not 0 <= key < len(self.leaves):
            raise ValueError(f"leaf index {key} out of range")
        return self.leaves[key]


def validate_tree(tree: GameTree) -> None:
    """Structural checks: chance weights, information sets, perfect recall."""
    for nid, node in enumerate(tree.nodes):
        if node.player == CHANCE:
            if node.probs is None or any(p <= 0 for p in node.probs):
                raise ValueError(f"chance node {nid} needs positive probs")
            if sum(node.probs) != 1:
                raise ValueError(f"chance node {nid} probs sum to {sum(node.probs)}")
        elif node.player in (PLAYER_1, PLAYER_2):
            if node.infoset is None:
                raise ValueError(f"decision node {nid} missing infoset")
    for player in (PLAYER_1, PLAYER_2):
        for iset in tree.infosets.get(player, []):
            chains = set()
            for nid in iset.nodes:
                node = tree.nodes[nid]
                if node.player != player or node.infoset != iset.index:
                    raise ValueError(f"infoset {iset.label}: bad member {nid}")
                if node.actions != iset.actions:
                    raise ValueError(f"infoset {iset.label}: action labels differ")
                chains.add(tree.own_chain[nid])
            if len(chains) > 1:
                # two nodes the player cannot distinguish, reached by different
                # own histories: the sequence-form derivation is unsound here
                raise ValueError(f"imperfect recall at infoset {iset.label}")


class ObservabilityFunction:
    """Per player, the partition-like map leaf -> indistinguishable leaves."""

    def __init__(self, tree: GameTree, sets: dict[int, list[tuple[int, ...]]]):
        self.tree = tree
        self.sets = sets
        for player, per_leaf in sets.items():
            if len(per_leaf) != len(tree.leaves):
                raise ValueError(f"player {player}: wrong number of leaf sets")
            for idx, members in enumerate(per_leaf):
                if idx not in members:
                    raise ValueError(f"player {player}: leaf {idx} not in own set")


def observe(obs: ObservabilityFunction, player: int, leaf: str | int) -> tuple[Leaf, ...]:
    """Candidate leaves player `player` cannot rule out after `leaf` is reached."""
    if player not in obs.sets:
        raise ValueError(f"no observability data for player {player}")
    target = obs.tree.leaf(leaf)
    return tuple(obs.tree.leaves[i] for i in obs.sets[player][target.index])


def _kuhn_deals() -> list[tuple[str, str]]:
    return [(a, b) for a in CARDS for b in CARDS if b != a]


def build_kuhn() -> tuple[GameTree, ObservabilityFunction]:
    """One-card poker: three cards K > Q > J, one ante, a single one-chip bet.

    Player 1 may bet or check; facing a bet player 2 calls or folds, facing a
    check player 2 bets or checks behind; facing that bet player 1 calls or
    folds.  Showdown winner takes the pot: +-2 after a called bet, +-1 after
    check-check, +1 to the bettor on a fold, -1 to player 1 when they fold.
    """
    nodes: list[Node] = []
    infosets1: list[Infoset] = []
    infosets2: list[Infoset] = []

    def add(node: Node) -> int:
        nodes.append(node)
        return len(nodes) - 1

    # information sets, declared in canonical order (owner's card, situation)
    p1_root = {}
    p1_cb = {}
    for c in CARDS:
        p1_root[c] = len(infosets1)
        infosets1.append(Infoset(PLAYER_1, p1_root[c], c,
                                 (f"B_{c}", f"Ch_{c}"), ()))
        p1_cb[c] = len(infosets1)
        infosets1.append(Infoset(PLAYER_1, p1_cb[c], f"{c}cb",
                                 (f"Ca_{c}", f"F_{c}"), ()))
    p2_bet = {}
    p2_chk = {}
    for c in ("Q", "J", "K"):
        p2_bet[c] = len(infosets2)
        infosets2.append(Infoset(PLAYER_2, p2_bet[c], f"{c}b",
                                 (f"ca_{c}", f"f_{c}"), ()))
        p2_chk[c] = len(infosets2)
        infosets2.append(Infoset(PLAYER_2, p2_chk[c], f"{c}ch",
                                 (f"b_{c}", f"ch_{c}"), ()))

    members1: dict[int, list[int]] = {i.index: [] for i in infosets1}
    members2: dict[int, list[int]] = {i.index: [] for i in infosets2}
    leaf_meta: dict[int, tuple[str, str, tuple[str, ...]]] = {}
    root = add(Node(CHANCE))
    deal_children = []
    for c1, c2 in _kuhn_deals():
        sign = 1 if CARD_RANK[c1] > CARD_RANK[c2] else -1
        # bet branch: player 2 calls (showdown for 2 chips) or folds (+1)
        l_bca = add(Node(None, payoff1=Fraction(2 * sign)))
        leaf_meta[l_bca] = (c1, c2, ("B", "ca"))
        l_bf = add(Node(None, payoff1=Fraction(1)))
        leaf_meta[l_bf] = (c1, c2, ("B", "f"))
        n_bet = add(Node(PLAYER_2, (f"ca_{c2}", f"f_{c2}"), (l_bca, l_bf),
                         infoset=p2_bet[c2]))
        members2[p2_bet[c2]].append(n_bet)
        # check branch: player 2 bets (player 1 calls +-2 / folds -1) or checks (+-1)
        l_cbca = add(Node(None, payoff1=Fraction(2 * sign)))
        leaf_meta[l_cbca] = (c1, c2, ("Ch", "b", "Ca"))
        l_cbf = add(Node(None, payoff1=Fraction(-1)))
        leaf_meta[l_cbf] = (c1, c2, ("Ch", "b", "F"))
        n_cb = add(Node(PLAYER_1, (f"Ca_{c1}", f"F_{c1}"), (l_cbca, l_cbf),
                        infoset=p1_cb[c1]))
        members1[p1_cb[c1]].append(n_cb)
        l_cc = add(Node(None, payoff1=Fraction(sign)))
        leaf_meta[l_cc] = (c1, c2, ("Ch", "ch"))
        n_chk = add(Node(PLAYER_2, (f"b_{c2}", f"ch_{c2}"), (n_cb, l_cc),
                         infoset=p2_chk[c2]))
        members2[p2_chk[c2]].append(n_chk)
        n_p1 = add(Node(PLAYER_1, (f"B_{c1}", f"Ch_{c1}"), (n_bet, n_chk),
                        infoset=p1_root[c1]))
        members1[p1_root[c1]].append(n_p1)
        deal_children.append(n_p1)
    nodes[root] = Node(CHANCE, tuple(f"deal_{a}{b}" for a, b in _kuhn_deals()),
                       tuple(deal_children),
                       tuple(Fraction(1, 6) for _ in range(6)))
    infosets1 = [Infoset(i.player, i.index, i.label, i.actions,
                         tuple(members1[i.index])) for i in infosets1]
    infosets2 = [Infoset(i.player, i.index, i.label, i.actions,
                         tuple(members2[i.index])) for i in infosets2]

    tree = GameTree("kuhn", nodes, {PLAYER_1: infosets1, PLAYER_2: infosets2})
    validate_tree(tree)

    # per-leaf deal and action-type path, for the hidden-card rule below
    info = {leaf.index: leaf_meta[leaf.node_id] for leaf in tree.leaves}

    showdown_types = {"ca", "Ca", "ch"}
    sets: dict[int, list[tuple[int, ...]]] = {PLAYER_1: [], PLAYER_2: []}
    for leaf in tree.leaves:
        c1, c2, types = info[leaf.index]
        showdown = types[-1] in showdown_types
        o1, o2 = [], []
        for other in tree.leaves:
            d1, d2, t = info[other.index]
            if t != types:
                continue
            if d1 == c1 and (not showdown or d2 == c2):
                o1.append(other.index)
            if d2 == c2 and (not showdown or d1 == c1):
                o2.append(other.index)
        sets[PLAYER_1].append(tuple(o1))
        sets[PLAYER_2].append(tuple(o2))
    return tree, ObservabilityFunction(tree, sets)


def build_rps() -> tuple[GameTree, ObservabilityFunction]:
    """Rock-paper-scissors as a sequential tree with a single hidden move each.

    Player 1 moves first, player 2 moves without seeing it (one information
    set spanning all three of player 2's nodes).  Both moves are revealed at
    the end, so every post-hand candidate set is a singleton.
    """
    moves1 = ("Rock", "Paper", "Scissors")
    moves2 = ("rock", "paper", "scissors")
    beats = {("Rock", "paper"): -1, ("Rock", "scissors"): 1,
             ("Paper", "rock"): 1, ("Paper", "scissors"): -1,
             ("Scissors", "rock"): -1, ("Scissors", "paper"): 1}
    nodes: list[Node] = [Node(PLAYER_1, moves1, (), infoset=0)]
    p2_nodes = []
    for m1 in moves1:
        leaf_ids = []
        for m2 in moves2:
            payoff = Fraction(beats.get((m1, m2), 0))
            nodes.append(Node(None, payoff1=payoff))
            leaf_ids.append(len(nodes) - 1)
        nodes.append(Node(PLAYER_2, moves2, tuple(leaf_ids), infoset=0))
        p2_nodes.append(len(nodes) - 1)
    nodes[0] = Node(PLAYER_1, moves1, tuple(p2_nodes), infoset=0)
    infosets = {
        PLAYER_1: [Infoset(PLAYER_1, 0, "move", moves1, (0,))],
        PLAYER_2: [Infoset(PLAYER_2, 0, "move", moves2, tuple(p2_nodes))],
    }
    tree = GameTree("rps", nodes, infosets, label_sep=" ")
    validate_tree(tree)
    sets = {
        PLAYER_1: [(leaf.index,) for leaf in tree.leaves],
        PLAYER_2: [(leaf.index,) for leaf in tree.leaves],
    }
    return tree, ObservabilityFunction(tree, sets)
