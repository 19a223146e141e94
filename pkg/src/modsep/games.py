"""Parity games, an attractor-based recursive solver, and the semantic game
for the graded mu-calculus on finite trees."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

from . import formula as F
from . import kripke as K
from .errors import FormulaError


class Player(Enum):
    EVE = 0
    ADAM = 1

    @property
    def opponent(self) -> "Player":
        return Player.ADAM if self is Player.EVE else Player.EVE


EVE = Player.EVE
ADAM = Player.ADAM


@dataclass
class ParityGame:
    """Finite parity game.  A position with no moves loses for its owner,
    unless listed in `terminal_wins` (immediate win for the owner, used for
    true literals)."""

    owner: dict
    priority: dict
    moves: dict
    initial: object
    terminal_wins: set = field(default_factory=set)

    def positions(self):
        return self.owner.keys()


@dataclass
class Strategy:
    """Positional strategy for one player: owned position -> chosen move."""

    player: Player
    choices: dict


def _terminal_winner(game: ParityGame, v) -> Player:
    if v in game.terminal_wins:
        return game.owner[v]
    return game.owner[v].opponent


def solve_parity(game: ParityGame):
    """Winning regions and positional strategies for both players.

    Returns (eve_region, eve_strategy, adam_strategy); the regions partition
    the positions, each strategy is defined on the owner's positions inside
    the owner's region (excluding terminals)."""
    preds: dict = {v: [] for v in game.positions()}
    for v, succ in game.moves.items():
        for w in succ:
            preds[w].append(v)

    region: dict = {}
    strategy = {EVE: {}, ADAM: {}}

    def attract(player: Player, base: set, alive: set, strat: dict) -> set:
        attracted = set(base)
        out_count = {
            v: sum(1 for w in game.moves[v] if w in alive) for v in alive
        }
        queue = list(base)
        while queue:
            w = queue.pop()
            for v in preds[w]:
                if v not in alive or v in attracted:
                    continue
                if game.owner[v] is player:
                    attracted.add(v)
                    if v not in strat:
                        strat[v] = w
                    queue.append(v)
                else:
                    out_count[v] -= 1
                    if out_count[v] == 0:
                        attracted.add(v)
                        queue.append(v)
        return attracted

    def solve(alive: set):
        if not alive:
            return {EVE: set(), ADAM: set()}, {EVE: {}, ADAM: {}}
        dead_here = {
            v for v in alive if not any(w in alive for w in game.moves[v])
        }
        if dead_here:
            win: dict = {EVE: set(), ADAM: set()}
            strat: dict = {EVE: {}, ADAM: {}}
            for pl in (EVE, ADAM):
                base = {v for v in dead_here if _terminal_winner(game, v) is pl}
                if base:
                    att = attract(pl, base, alive, strat[pl])
                    sub_win, sub_strat = solve(alive - att)
                    win[pl] |= base | (att - base) | sub_win[pl]
                    win[pl.opponent] |= sub_win[pl.opponent]
                    strat[EVE].update(sub_strat[EVE])
                    strat[ADAM].update(sub_strat[ADAM])
                    return win, strat
        p = max(game.priority[v] for v in alive)
        player = EVE if p % 2 == 0 else ADAM
        opp = player.opponent
        targets = {v for v in alive if game.priority[v] == p}
        strat_a: dict = {}
        region_a = attract(player, targets, alive, strat_a)
        sub_win, sub_strat = solve(alive - region_a)
        if not sub_win[opp]:
            strat_p = dict(sub_strat[player])
            strat_p.update(strat_a)
            for v in targets:
                if game.owner[v] is player and v not in strat_p:
                    for w in game.moves[v]:
                        if w in alive:
                            strat_p[v] = w
                            break
            return (
                {player: set(alive), opp: set()},
                {player: strat_p, opp: {}},
            )
        strat_b: dict = {}
        region_b = attract(opp, set(sub_win[opp]), alive, strat_b)
        rest_win, rest_strat = solve(alive - region_b)
        win = {
            player: set(rest_win[player]),
            opp: set(rest_win[opp]) | region_b,
        }
        strat_opp = dict(rest_strat[opp])
        strat_opp.update(sub_strat[opp])
        strat_opp.update(strat_b)
        return win, {player: dict(rest_strat[player]), opp: strat_opp}

    alive = set(game.positions())
    win, strat = solve(alive)
    region = win
    eve_strat = {v: m for v, m in strat[EVE].items() if v not in game.terminal_wins}
    adam_strat = {v: m for v, m in strat[ADAM].items() if v not in game.terminal_wins}
    return (
        frozenset(region[EVE]),
        Strategy(EVE, eve_strat),
        Strategy(ADAM, adam_strat),
    )


# ---------------------------------------------------------------------------
# Semantic game

def binder_priorities(phi: F.Formula) -> dict[str, int]:
    """Priority per fixpoint variable: even for nu, odd for mu, outer binders
    at least as high as the binders they contain."""
    prio: dict[str, int] = {}

    def walk(g) -> int:
        if isinstance(g, (F.And, F.Or)):
            return max((walk(a) for a in g.args), default=-1)
        if isinstance(g, (F.Dia, F.Box)):
            return walk(g.body)
        if isinstance(g, (F.Mu, F.Nu)):
            inner = walk(g.body)
            base = 1 if isinstance(g, F.Mu) else 0
            p = base
            while p < inner:
                p += 2
            prio[g.var] = p
            return p
        return -1

    walk(phi)
    return prio


def semantic_game(tree: K.KripkeTree, phi: F.Formula) -> ParityGame:
    """Parity game whose initial position Eve wins iff the tree satisfies
    phi.  Disjunctions and diamonds belong to Eve, conjunctions and boxes to
    Adam; graded modalities move in two steps (Eve proposes a child set, Adam
    picks).  Regenerating a fixpoint variable emits the binder's priority."""
    phi = F.normalize(phi)
    binders = F.binder_map(phi)
    prio = binder_priorities(phi)

    owner: dict = {}
    priority: dict = {}
    moves: dict = {}
    terminal_wins: set = set()

    def add(pos, own: Player, pr: int, succ: tuple, win: bool = False):
        if pos in owner:
            return False
        owner[pos] = own
        priority[pos] = pr
        moves[pos] = succ
        if win:
            terminal_wins.add(pos)
        return True

    todo = [((), phi)]
    seen = set()
    while todo:
        path, g = todo.pop()
        pos = (path, g)
        if pos in seen:
            continue
        seen.add(pos)
        here = K.node_at(tree, path)
        nkids = len(here.children)
        if isinstance(g, F.Top):
            add(pos, EVE, 0, (), win=True)
        elif isinstance(g, F.Bot):
            add(pos, ADAM, 0, (), win=True)
        elif isinstance(g, F.Lit):
            holds = (g.name in here.label) == g.positive
            add(pos, EVE if holds else ADAM, 0, (), win=True)
        elif isinstance(g, F.Or):
            succ = tuple((path, a) for a in g.args)
            add(pos, EVE, 0, succ)
            todo.extend(succ)
        elif isinstance(g, F.And):
            succ = tuple((path, a) for a in g.args)
            add(pos, ADAM, 0, succ)
            todo.extend(succ)
        elif isinstance(g, F.Dia):
            subsets = tuple(
                itertools.combinations(range(nkids), g.grade)
            )
            succ = tuple((path, g, s) for s in subsets)
            add(pos, EVE, 0, succ)
            for s in subsets:
                nxt = tuple((path + (i,), g.body) for i in s)
                add((path, g, s), ADAM, 0, nxt)
                todo.extend(nxt)
        elif isinstance(g, F.Box):
            exceptions = tuple(
                s
                for r in range(min(g.grade, nkids) + 1)
                for s in itertools.combinations(range(nkids), r)
            )
            if g.grade == 0:
                nxt = tuple((path + (i,), g.body) for i in range(nkids))
                add(pos, ADAM, 0, nxt)
                todo.extend(nxt)
            else:
                succ = tuple((path, g, s) for s in exceptions)
                add(pos, EVE, 0, succ)
                for s in exceptions:
                    nxt = tuple(
                        (path + (i,), g.body) for i in range(nkids) if i not in s
                    )
                    add((path, g, s), ADAM, 0, nxt)
                    todo.extend(nxt)
        elif isinstance(g, (F.Mu, F.Nu)):
            succ = ((path, g.body),)
            add(pos, ADAM, 0, succ)
            todo.extend(succ)
        elif isinstance(g, F.Var):
            binder = binders.get(g.name)
            if binder is None:
                raise FormulaError(f"unbound fixpoint variable {g.name}")
            succ = ((path, binder.body),)
            add(pos, ADAM, prio[g.name], succ)
            todo.extend(succ)
        else:
            raise TypeError(f"not a formula: {g!r}")

    return ParityGame(owner, priority, moves, ((), phi), terminal_wins)


def model_check(tree: K.KripkeTree, phi: F.Formula) -> bool:
    """True iff the tree's root satisfies phi (game semantics)."""
    game = semantic_game(tree, phi)
    eve_region, _, _ = solve_parity(game)
    return game.initial in eve_region
