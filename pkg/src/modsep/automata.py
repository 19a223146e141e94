"""Nondeterministic parity tree automata and the constructions on them.

Transitions are unordered: in tuple mode a transition is a multiset of
successor states stored as a sorted tuple whose length must equal the number
of children of the node (at most the arity); in set mode it is the exact set
of states occurring at the children.  Sibling order never matters.

The joint-consistency check relativizes both automata to full d-ary leafless
trees by padding transitions with an internal dead state whose subtrees are
unlabelled; the dead region is treated as distinguishable from live nodes
(it plays the role of an aliveness marker), which keeps depth-n prefix
isomorphism faithful for automata whose models may have leaves.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass, field

from . import monitor as MON
from .errors import BudgetExhaustedError, ModsepError, ParseError
from . import kripke as K

DEAD = "__dead__"

_TRANSITION_BUDGET = 400_000


def letters(sig) -> list[frozenset[str]]:
    sig = sorted(sig)
    out = [
        frozenset(c)
        for r in range(len(sig) + 1)
        for c in itertools.combinations(sig, r)
    ]
    return sorted(out, key=lambda s: (len(s), tuple(sorted(s))))


@dataclass
class Npta:
    """Nondeterministic parity tree automaton.

    trans maps (state, letter) to a frozenset of transitions: sorted state
    tuples (tuple mode, length <= arity) or frozensets of states (set mode).
    """

    states: tuple[str, ...]
    initial: str
    sig: tuple[str, ...]
    prio: dict
    trans: dict
    mode: str = "tuple"
    arity: int | None = None
    _live: frozenset | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("tuple", "set"):
            raise ModsepError(f"unknown transition mode {self.mode!r}")
        if self.mode == "tuple" and self.arity is None:
            raise ModsepError("tuple mode requires an arity")

    def transitions(self, state, letter):
        return self.trans.get((state, frozenset(letter)), frozenset())

    def size(self) -> int:
        return len(self.states)


# ---------------------------------------------------------------------------
# Text format

def render_automaton(a: Npta) -> str:
    lines = [
        "sig: " + " ".join(sorted(a.sig)),
        "arity: " + ("unbounded" if a.mode == "set" else str(a.arity)),
        "states: " + " ".join(a.states),
        "initial: " + a.initial,
        "prio: " + " ".join(f"{q}={a.prio[q]}" for q in a.states),
    ]
    for q in a.states:
        for letter in letters(a.sig):
            for t in sorted(a.transitions(q, letter), key=_trans_key):
                lab = "{" + " ".join(sorted(letter)) + "}"
                if a.mode == "tuple":
                    rhs = "(" + " ".join(t) + ")"
                else:
                    rhs = "{" + " ".join(sorted(t)) + "}"
                lines.append(f"{q} , {lab} -> {rhs}")
    return "\n".join(lines) + "\n"


def _trans_key(t):
    return tuple(sorted(t)) if isinstance(t, frozenset) else t


_HEADER = re.compile(r"^(sig|arity|states|initial|prio):\s*(.*)$")
_RULE = re.compile(r"^(\S+)\s*,\s*\{([^}]*)\}\s*->\s*(\(([^)]*)\)|\{([^}]*)\})$")


def parse_automaton(text: str) -> Npta:
    sig: tuple[str, ...] | None = None
    arity: int | None = None
    mode = "tuple"
    states: tuple[str, ...] | None = None
    initial: str | None = None
    prio: dict = {}
    trans: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER.match(line)
        if m:
            key, val = m.group(1), m.group(2).strip()
            if key == "sig":
                sig = tuple(sorted(val.split()))
            elif key == "arity":
                if val == "unbounded":
                    mode, arity = "set", None
                else:
                    mode, arity = "tuple", int(val)
            elif key == "states":
                states = tuple(val.split())
            elif key == "initial":
                initial = val
            elif key == "prio":
                for item in val.split():
                    q, _, p = item.partition("=")
                    prio[q] = int(p)
            continue
        m = _RULE.match(line)
        if m is None:
            raise ParseError(f"bad automaton line {lineno}: {raw!r}", lineno)
        q, letter = m.group(1), frozenset(m.group(2).split())
        if m.group(4) is not None:
            t = tuple(sorted(m.group(4).split()))
        else:
            t = frozenset(m.group(5).split())
        trans.setdefault((q, letter), set()).add(t)
    if None in (sig, states, initial):
        raise ParseError("missing automaton header line", 0)
    for q in states:
        prio.setdefault(q, 0)
    frozen = {k: frozenset(v) for k, v in trans.items()}
    return Npta(states, initial, sig, prio, frozen, mode, arity)


# ---------------------------------------------------------------------------
# Emptiness

def live_states(a: Npta) -> frozenset:
    """States recognizing a nonempty language, via the emptiness game
    (Eve picks letter and transition, Adam a successor)."""
    if a._live is not None:
        return a._live
    from .games import ADAM, EVE, ParityGame, solve_parity

    owner: dict = {}
    prio: dict = {}
    moves: dict = {}
    alphabet = letters(a.sig)
    for q in a.states:
        succ = []
        for letter in alphabet:
            for t in sorted(a.transitions(q, letter), key=_trans_key):
                pos = ("t", q, letter, t)
                succ.append(pos)
                owner[pos] = ADAM
                prio[pos] = 0
                moves[pos] = tuple(("q", p) for p in sorted(set(t)))
        owner[("q", q)] = EVE
        prio[("q", q)] = a.prio[q]
        moves[("q", q)] = tuple(succ)
    game = ParityGame(owner, prio, moves, ("q", a.initial))
    eve_region, _, _ = solve_parity(game)
    live = frozenset(q for q in a.states if ("q", q) in eve_region)
    a._live = live
    return live


def is_empty(a: Npta) -> bool:
    return a.initial not in live_states(a)


def emptiness_witness(a: Npta, max_depth: int | None = None) -> K.KripkeTree | None:
    """A finite prefix of some accepted tree, unfolded from the winning
    strategy of the emptiness game up to max_depth (default: one more than
    the state count); None when the language is empty."""
    from .games import EVE, ParityGame, solve_parity, ADAM

    if is_empty(a):
        return None
    cap = a.size() + 1 if max_depth is None else max_depth
    owner: dict = {}
    prio: dict = {}
    moves: dict = {}
    alphabet = letters(a.sig)
    for q in a.states:
        succ = []
        for letter in alphabet:
            for t in sorted(a.transitions(q, letter), key=_trans_key):
                pos = ("t", q, letter, t)
                succ.append(pos)
                owner[pos] = ADAM
                prio[pos] = 0
                moves[pos] = tuple(("q", p) for p in sorted(set(t)))
        owner[("q", q)] = EVE
        prio[("q", q)] = a.prio[q]
        moves[("q", q)] = tuple(succ)
    game = ParityGame(owner, prio, moves, ("q", a.initial))
    _, eve, _ = solve_parity(game)

    def build(q: str, depth: int) -> K.KripkeTree:
        move = eve.choices[("q", q)]
        _, _, letter, t = move
        if depth >= cap:
            return K.KripkeTree(frozenset(letter), ())
        kids = tuple(build(p, depth + 1) for p in t)
        return K.KripkeTree(frozenset(letter), kids)

    return build(a.initial, 0)


# ---------------------------------------------------------------------------
# Finite-tree membership

def _match_children(options: list[frozenset], t) -> bool:
    """Can the children (with per-child admissible state sets) be matched
    bijectively against the transition?  Tuple mode: t is a multiset; set
    mode: t is the exact set of child states."""
    if isinstance(t, frozenset):
        if any(not (o & t) for o in options):
            return False
        need = set(t)
        return _cover(options, need)
    if len(options) != len(t):
        return False
    counts = Counter(t)
    return _assign(sorted(options, key=len), counts)


def _assign(options: list[frozenset], counts: Counter) -> bool:
    if not options:
        return True
    first, rest = options[0], options[1:]
    for state in sorted(first):
        if counts[state] > 0:
            counts[state] -= 1
            if _assign(rest, counts):
                counts[state] += 1
                return True
            counts[state] += 1
    return False


def _cover(options: list[frozenset], need: set) -> bool:
    for combo in itertools.product(*[sorted(o & need) for o in options]):
        if set(combo) == need:
            return True
    return False


def accepts_finite(a: Npta, tree: K.KripkeTree) -> bool:
    """Run existence on a finite tree (priorities are irrelevant:
    there are no infinite paths)."""
    sig = frozenset(a.sig)

    def ok_states(t: K.KripkeTree) -> frozenset:
        child_ok = [ok_states(c) for c in t.children]
        letter = frozenset(t.label & sig)
        out = set()
        for q in a.states:
            for trans in a.transitions(q, letter):
                if _match_children(child_ok, trans):
                    out.add(q)
                    break
        return frozenset(out)

    return a.initial in ok_states(tree)


# ---------------------------------------------------------------------------
# Signature adjustment and products

def project_letters(a: Npta, sigma) -> Npta:
    """Existential projection of the alphabet onto sigma: the language
    becomes the sigma-reducts of the original language (propositions of
    sigma outside the original signature are unconstrained)."""
    sigma = tuple(sorted(sigma))
    common = frozenset(sigma) & frozenset(a.sig)
    trans: dict = {}
    for c in letters(sigma):
        key = frozenset(c) & common
        for q in a.states:
            merged = set()
            for e in letters(a.sig):
                if frozenset(e) & frozenset(sigma) == key:
                    merged |= a.transitions(q, e)
            if merged:
                trans[(q, frozenset(c))] = frozenset(merged)
    return Npta(a.states, a.initial, sigma, dict(a.prio), trans, a.mode, a.arity)


def _acceptance_kind(a: Npta) -> str:
    values = {a.prio[q] for q in a.states}
    if all(v % 2 == 0 for v in values):
        return "safety"
    if max(values) - min(values) <= 1:
        return "cobuchi" if min(values) % 2 == 0 else "buchi"
    raise ModsepError(f"priority range {sorted(values)} unsupported in products")


def product(a: Npta, b: Npta) -> Npta:
    """Intersection automaton over the union signature (tuple mode, equal
    arity).  Supports safety/Buchi/co-Buchi shaped priority ranges."""
    if a.mode != "tuple" or b.mode != "tuple":
        raise ModsepError("products require tuple mode")
    if a.arity != b.arity:
        raise ModsepError(f"arity mismatch: {a.arity} vs {b.arity}")
    sigma = tuple(sorted(set(a.sig) | set(b.sig)))
    pa, pb = project_letters(a, sigma), project_letters(b, sigma)
    ka, kb = _acceptance_kind(a), _acceptance_kind(b)
    flip = ka == "buchi" and kb == "buchi"
    if "cobuchi" in (ka, kb) and "buchi" in (ka, kb):
        raise ModsepError("cannot intersect Buchi with co-Buchi priorities")

    def prio_of(qa, qb, bit):
        if flip:
            return 2 if bit == 0 and a.prio[qa] % 2 == 0 else 1
        if ka == "cobuchi" or kb == "cobuchi":
            base = 0
            if ka == "cobuchi":
                base = max(base, a.prio[qa] % 2)
            if kb == "cobuchi":
                base = max(base, b.prio[qb] % 2)
            return base
        if ka == "buchi":
            return a.prio[qa]
        if kb == "buchi":
            return b.prio[qb]
        return 0

    def step_bit(bit, qa, qb):
        if not flip:
            return 0
        # waiting for an accepting visit on side `bit`
        if bit == 0 and a.prio[qa] % 2 == 0:
            return 1
        if bit == 1 and b.prio[qb] % 2 == 0:
            return 0
        return bit

    start = (pa.initial, pb.initial, 0)
    todo = [start]
    seen = {start}
    trans: dict = {}
    while todo:
        qa, qb, bit = todo.pop()
        name = _pname(qa, qb, bit)
        for c in letters(sigma):
            combos = set()
            nb = step_bit(bit, qa, qb)
            for ta in pa.transitions(qa, c):
                for tb in pb.transitions(qb, c):
                    if len(ta) != len(tb):
                        continue
                    left = {(x,): n for x, n in Counter(ta).items()}
                    for table in _overlay(left, dict(Counter(tb))):
                        kids = []
                        for ((x,), y), cnt in table.items():
                            kid = (x, y, nb)
                            if kid not in seen:
                                seen.add(kid)
                                todo.append(kid)
                            kids.extend([_pname(*kid)] * cnt)
                        combos.add(tuple(sorted(kids)))
            if combos:
                trans[(name, frozenset(c))] = frozenset(combos)
    states = tuple(sorted(_pname(*s) for s in seen))
    prio = {}
    for qa, qb, bit in seen:
        prio[_pname(qa, qb, bit)] = prio_of(qa, qb, bit)
    return Npta(states, _pname(*start), sigma, prio, trans, "tuple", a.arity)


def _pname(qa, qb, bit) -> str:
    return f"{qa}*{qb}*{bit}"


# ---------------------------------------------------------------------------
# Prefix languages

def _projected_transitions(a: Npta, sigma):
    """(state, sigma-letter) -> frozenset of transitions, existentially
    projecting letters outside sigma."""
    proj = project_letters(a, sigma)
    return proj


def prefix_npta(a: Npta, sigma) -> Npta:
    """Automaton whose runs on finite trees accept exactly the finite trees
    that are prefixes of sigma-reducts of members of L(a): transitions may
    drop live obligations (subtrees that exist in the extension only)."""
    if a.mode != "tuple":
        raise ModsepError("prefix languages require tuple mode")
    live = live_states(a)
    proj = project_letters(a, sigma)
    trans: dict = {}
    for (q, c), ts in proj.trans.items():
        out = set()
        for t in ts:
            counts = Counter(t)
            support = sorted(counts)
            ranges = [range(counts[p] + 1) for p in support]
            for kept in itertools.product(*ranges):
                dropped_ok = all(
                    p in live or counts[p] == k
                    for p, k in zip(support, kept)
                )
                if not dropped_ok:
                    continue
                sub = []
                for p, k in zip(support, kept):
                    sub.extend([p] * k)
                out.add(tuple(sorted(sub)))
        if out:
            trans[(q, c)] = frozenset(out)
    prio = {q: 0 for q in a.states}
    return Npta(a.states, a.initial, tuple(sorted(sigma)), prio, trans, "tuple", a.arity)


@dataclass
class FinTreeAutomaton:
    """Finite-tree recognizer: an automaton evaluated on finite trees only
    (no priorities consulted) plus an explicit leaf-acceptance predicate."""

    npta: Npta

    @property
    def sig(self):
        return self.npta.sig

    @property
    def arity(self):
        return self.npta.arity

    def size(self) -> int:
        return self.npta.size()

    def leaf_accepts(self, state, letter) -> bool:
        return () in self.npta.transitions(state, letter)

    def accepts(self, tree: K.KripkeTree) -> bool:
        return accepts_finite(self.npta, tree)


def prefix_automaton(a: Npta, sigma) -> FinTreeAutomaton:
    """Finite full d-ary prefixes of sigma-reducts of members of L(a); also
    meaningful on non-full trees (arbitrary prefixes), leaves accept in live
    states."""
    return FinTreeAutomaton(prefix_npta(a, sigma))


# ---------------------------------------------------------------------------
# Joint consistency for all depths (tallness chain)

@dataclass(frozen=True)
class ConsistencyResult:
    consistent_for_all_n: bool
    first_failure: int | None
    m_bound: int
    chain_sizes: tuple[int, ...]
    stabilized_by: int

    def consistent_at(self, n: int) -> bool:
        return self.first_failure is None or n < self.first_failure


def _flow_feasible(left: Counter, right: Counter, allowed) -> bool:
    """Perfect matching between two equal-size multisets along allowed pairs
    (transportation feasibility via augmenting paths)."""
    total = sum(left.values())
    if total != sum(right.values()):
        return False
    lkeys = sorted(left)
    rkeys = sorted(right)
    flow = {(l, r): 0 for l in lkeys for r in rkeys}
    pushed = 0
    while pushed < total:
        # BFS for an augmenting path from a left node with residual supply
        parent: dict = {}
        queue = []
        for l in lkeys:
            if sum(flow[(l, r)] for r in rkeys) < left[l]:
                parent[("L", l)] = None
                queue.append(("L", l))
        goal = None
        while queue and goal is None:
            side, x = queue.pop(0)
            if side == "L":
                for r in rkeys:
                    if (x, r) in allowed and ("R", r) not in parent:
                        parent[("R", r)] = ("L", x)
                        if sum(flow[(l2, r)] for l2 in lkeys) < right[r]:
                            goal = ("R", r)
                            break
                        queue.append(("R", r))
            else:
                for l in lkeys:
                    if flow[(l, x)] > 0 and ("L", l) not in parent:
                        parent[("L", l)] = ("R", x)
                        queue.append(("L", l))
        if goal is None:
            return False
        node = goal
        while parent[node] is not None:
            prev = parent[node]
            if node[0] == "R":
                flow[(prev[1], node[1])] += 1
            else:
                flow[(node[1], prev[1])] -= 1
            node = prev
        pushed += 1
    return True


def consistency_for_all_n(a: Npta, b: Npta, sigma, d: int) -> ConsistencyResult:
    """Joint depth-n-isomorphism consistency over d-ary trees for every n,
    via the descending chain S_1 >= S_2 >= ... of product states recognizing
    common padded prefixes of increasing tallness; the answer is membership
    of the initial pair in S_m for m = |a| * |b| + 1."""
    if a.mode != "tuple" or b.mode != "tuple":
        raise ModsepError("consistency check requires tuple mode")
    if a.arity != d or b.arity != d:
        raise ModsepError(
            f"arity mismatch: automata have {a.arity}/{b.arity}, class needs {d}"
        )
    sigma = tuple(sorted(sigma))
    pa, pb = project_letters(a, sigma), project_letters(b, sigma)
    live_a, live_b = live_states(a), live_states(b)
    alphabet = [frozenset(c) for c in letters(sigma)]

    def leaf_ok(proj, live, q):
        out = set()
        for c in alphabet:
            for t in proj.transitions(q, c):
                if all(p in live for p in t):
                    out.add(c)
                    break
        return out

    leaves_a = {q: leaf_ok(pa, live_a, q) for q in a.states}
    leaves_b = {q: leaf_ok(pb, live_b, q) for q in b.states}

    def padded(proj, q, c):
        for t in proj.transitions(q, c):
            if len(t) > d:
                continue
            yield Counter(t) + Counter({DEAD: d - len(t)})

    s0 = {(DEAD, DEAD)}
    for qa in a.states:
        for qb in b.states:
            if leaves_a[qa] & leaves_b[qb]:
                s0.add((qa, qb))
    chain = [frozenset(s0)]
    m = a.size() * b.size() + 1

    def step(cur: frozenset) -> frozenset:
        nxt = set()
        if (DEAD, DEAD) in cur:
            nxt.add((DEAD, DEAD))
        for (qa, qb) in cur:
            if DEAD in (qa, qb):
                continue
            found = False
            for c in alphabet:
                for ta in padded(pa, qa, c):
                    for tb in padded(pb, qb, c):
                        if _flow_feasible(ta, tb, cur):
                            found = True
                            break
                    if found:
                        break
                if found:
                    break
            if found:
                nxt.add((qa, qb))
        return frozenset(nxt)

    stabilized = m + 1
    for i in range(1, m + 2):
        nxt = step(chain[-1])
        if nxt == chain[-1] and stabilized == m + 1:
            stabilized = i - 1
        chain.append(nxt)
    root = (a.initial, b.initial)
    first_failure = None
    for n, s in enumerate(chain):
        if root not in s:
            first_failure = n
            break
    consistent = root in chain[m]
    return ConsistencyResult(
        consistent, first_failure, m, tuple(len(s) for s in chain), stabilized
    )


# ---------------------------------------------------------------------------
# Duplication-safe closure

def duplication_safe_closure(a: Npta) -> Npta:
    """Add the doubled version of every singleton transition.  Idempotent;
    over binary trees this does not change the language of automata that come
    from formulas (their languages are closed under sibling duplication)."""
    if a.mode != "tuple":
        raise ModsepError("duplication closure requires tuple mode")
    if a.arity is None or a.arity < 2:
        raise ModsepError("duplication closure needs arity >= 2")
    trans = {}
    for key, ts in a.trans.items():
        out = set(ts)
        for t in ts:
            if len(t) == 1:
                out.add((t[0], t[0]))
        trans[key] = frozenset(out)
    return Npta(a.states, a.initial, a.sig, dict(a.prio), trans, "tuple", a.arity)


def is_duplication_safe(a: Npta) -> bool:
    for ts in a.trans.values():
        for t in ts:
            if isinstance(t, tuple) and len(t) == 1 and (t[0], t[0]) not in ts:
                return False
    return True


# ---------------------------------------------------------------------------
# Quotient and QPL automata

def _assignments(counts: Counter, k: int):
    """All ways to choose, for each of k interchangeable children, a nonempty
    subset of the support such that each state p is used by between 1 and
    counts[p] children.  Yields count vectors {frozenset-profile: multiplicity}."""
    support = sorted(counts)
    profiles = []
    for r in range(1, len(support) + 1):
        for combo in itertools.combinations(support, r):
            profiles.append(frozenset(combo))

    out: list[dict] = []

    def rec(idx: int, remaining: int, used: dict, chosen: dict):
        if remaining == 0:
            if all(1 <= used.get(p, 0) <= counts[p] for p in support):
                out.append(dict(chosen))
            return
        if idx == len(profiles):
            return
        prof = profiles[idx]
        cap = min(counts[p] - used.get(p, 0) for p in prof)
        cap = min(cap, remaining)
        for c in range(cap, -1, -1):
            if c:
                for p in prof:
                    used[p] = used.get(p, 0) + c
                chosen[prof] = c
            rec(idx + 1, remaining - c, used, chosen)
            if c:
                for p in prof:
                    used[p] -= c
                del chosen[prof]

    rec(0, k, {}, {})
    return out


def _ckey(x):
    if isinstance(x, str):
        return (2, x)
    if isinstance(x, frozenset):
        return (0, tuple(sorted(x, key=_ckey)))
    return (1, tuple(_ckey(e) for e in x))


def _overlay(left: dict, right: dict):
    """All ways to superpose two child-profile count vectors of equal total:
    contingency tables with the given margins."""
    lkeys = sorted(left, key=_ckey)
    rkeys = sorted(right, key=_ckey)
    tables: list[dict] = []

    def rec(i: int, lrem: dict, rrem: dict, acc: dict):
        if i == len(lkeys):
            if all(v == 0 for v in rrem.values()):
                tables.append(dict(acc))
            return
        lk = lkeys[i]
        need = lrem[lk]

        def fill(j: int, left_need: int):
            if left_need == 0:
                rec(i + 1, lrem, rrem, acc)
                return
            if j == len(rkeys):
                return
            rk = rkeys[j]
            cap = min(left_need, rrem[rk])
            for c in range(cap, -1, -1):
                if c:
                    rrem[rk] -= c
                    acc[(lk, rk)] = acc.get((lk, rk), 0) + c
                fill(j + 1, left_need - c)
                if c:
                    rrem[rk] += c
                    acc[(lk, rk)] -= c
                    if not acc[(lk, rk)]:
                        del acc[(lk, rk)]

        fill(0, need)

    rec(0, dict(left), dict(right), {})
    return tables


def _combined_profiles(counts_per_state: list[Counter]):
    """Nonempty per-state subsets of each transition's support, combined."""
    spaces = []
    for counts in counts_per_state:
        support = sorted(counts)
        subs = [
            frozenset(c)
            for r in range(1, len(support) + 1)
            for c in itertools.combinations(support, r)
        ]
        spaces.append(subs)
    return [tuple(combo) for combo in itertools.product(*spaces)]


def _quotient_distributions(counts_per_state: list[Counter], d: int):
    """Count vectors over combined child profiles: for every state index i
    and every p in its transition, between 1 and multiplicity many children
    must carry p in their i-th profile; at most d children in total."""
    profiles = _combined_profiles(counts_per_state)
    profiles.sort(key=_ckey)
    need_keys = [
        (i, p) for i, counts in enumerate(counts_per_state) for p in sorted(counts)
    ]
    caps = {key: counts_per_state[key[0]][key[1]] for key in need_keys}
    out: list[dict] = []

    def rec(idx: int, total: int, used: dict, acc: dict):
        if idx == len(profiles):
            if all(used.get(key, 0) >= 1 for key in need_keys):
                out.append(dict(acc))
            return
        prof = profiles[idx]
        cap = d - total
        for i, sub in enumerate(prof):
            for p in sub:
                cap = min(cap, caps[(i, p)] - used.get((i, p), 0))
        for c in range(cap, -1, -1):
            if c:
                for i, sub in enumerate(prof):
                    for p in sub:
                        used[(i, p)] = used.get((i, p), 0) + c
                acc[prof] = c
            rec(idx + 1, total + c, used, acc)
            if c:
                for i, sub in enumerate(prof):
                    for p in sub:
                        used[(i, p)] -= c
                del acc[prof]
        if len(out) > _TRANSITION_BUDGET:
            raise BudgetExhaustedError("quotient transition enumeration exceeded budget")

    rec(0, 0, {}, {})
    return out


def _circulation_feasible(rows, cols, edges) -> bool:
    """Feasibility of y >= 0 with y[u,p] <= cap(u), row sums >= demand(u),
    column sums within [lo(p), hi(p)]; rows/cols map keys to those bounds."""
    # lower-bound reduction onto a plain max-flow problem
    excess: dict = {}
    arcs: dict = {}

    def add_arc(u, v, lo, hi):
        if hi - lo > 0:
            arcs.setdefault(u, {})[v] = arcs.get(u, {}).get(v, 0) + (hi - lo)
        excess[v] = excess.get(v, 0) + lo
        excess[u] = excess.get(u, 0) - lo

    big = sum(cap * len(cols) for cap, _ in rows.values()) + sum(
        hi for _, hi in cols.values()
    ) + 1
    for u, (cap, demand) in rows.items():
        add_arc("S", ("u", u), demand, big)
        for p in edges.get(u, ()):
            add_arc(("u", u), ("p", p), 0, cap)
    for p, (lo, hi) in cols.items():
        add_arc(("p", p), "T", lo, hi)
    add_arc("T", "S", 0, big)
    src, sink = "SRC", "SNK"
    for v, e in list(excess.items()):
        if e > 0:
            arcs.setdefault(src, {})[v] = e
        elif e < 0:
            arcs.setdefault(v, {})[sink] = -e
    need = sum(e for e in excess.values() if e > 0)
    # BFS augmenting max-flow
    flow = 0
    while True:
        parent = {src: None}
        queue = [src]
        while queue and sink not in parent:
            x = queue.pop(0)
            for y, c in arcs.get(x, {}).items():
                if c > 0 and y not in parent:
                    parent[y] = x
                    queue.append(y)
        if sink not in parent:
            break
        path = []
        node = sink
        while parent[node] is not None:
            path.append((parent[node], node))
            node = parent[node]
        push = min(arcs[u][v] for u, v in path)
        for u, v in path:
            arcs[u][v] -= push
            arcs.setdefault(v, {})[u] = arcs.get(v, {}).get(u, 0) + push
        flow += push
    return flow == need


def _safety_quotient_distributions(counts_per_state: list[Counter], d: int):
    """Child slot-set multisets for the quotient transition relation when no
    acceptance bookkeeping is needed: a multiset of slot sets is viable iff
    for every state index the children admit nonempty sub-assignments
    covering each transition entry within its multiplicity."""
    union: set = set()
    for counts in counts_per_state:
        union |= set(counts)
    supports = [set(c) for c in counts_per_state]
    types = []
    for r in range(1, len(union) + 1):
        for combo in itertools.combinations(sorted(union), r):
            u = frozenset(combo)
            if all(u & s for s in supports):
                types.append(u)
    types.sort(key=_ckey)

    def cap_of(u) -> int:
        cap = d
        for i, counts in enumerate(counts_per_state):
            cap = min(cap, sum(counts[p] for p in u & supports[i]))
        return cap

    caps = [cap_of(u) for u in types]

    def feasible(vec: dict) -> bool:
        for i, counts in enumerate(counts_per_state):
            rows = {u: (c, c) for u, c in vec.items()}
            cols = {p: (1, counts[p]) for p in supports[i]}
            edges = {u: sorted(u & supports[i]) for u in vec}
            if not _circulation_feasible(rows, cols, edges):
                return False
        return True

    out: list[dict] = []

    def rec(idx: int, total: int, acc: dict):
        if idx == len(types):
            if acc and feasible(acc):
                out.append(dict(acc))
            return
        hi = min(caps[idx], d - total)
        for c in range(hi, -1, -1):
            if c:
                acc[types[idx]] = c
            rec(idx + 1, total + c, acc)
            if c:
                del acc[types[idx]]
        if len(out) > _TRANSITION_BUDGET:
            raise BudgetExhaustedError("quotient transition enumeration exceeded budget")

    rec(0, 0, {})
    return out


def quotient_automaton(a: Npta) -> Npta:
    """Automaton for the bisimulation quotients of L(a): trees M such that
    some member of L(a) maps onto M by a functional bisimulation.  Built by
    guessing, per node and active state, a transition together with a
    surjection of its states onto the children, and checking all resulting
    state threads with an acceptance monitor."""
    if a.mode != "tuple":
        raise ModsepError("quotient construction requires tuple mode")
    d = a.arity
    mode = MON.classify_priorities(a.prio.values())
    mon = MON.make_monitor(mode, a.size())
    if mode == "buchi":
        good = max(a.prio.values())
        mark = {q: a.prio[q] == good for q in a.states}
    elif mode == "cobuchi":
        bad = max(a.prio.values())
        mark = {q: a.prio[q] == bad for q in a.states}
    else:
        mark = {q: False for q in a.states}

    init = (frozenset({a.initial}), mon.initial(frozenset({a.initial})))
    names: dict = {init: "q0"}
    order = [init]
    todo = [init]
    trans: dict = {}
    alphabet = [frozenset(c) for c in letters(a.sig)]

    def register(kid) -> str:
        if kid not in names:
            names[kid] = f"q{len(names)}"
            order.append(kid)
            todo.append(kid)
        return names[kid]

    while todo:
        macro = todo.pop(0)
        phi, mem = macro
        name = names[macro]
        states_sorted = sorted(phi)
        for c in alphabet:
            options = [sorted(a.transitions(q, c), key=_trans_key) for q in states_sorted]
            if any(not ts for ts in options):
                continue
            results = set()
            for combo in itertools.product(*options):
                if all(len(t) == 0 for t in combo):
                    results.add(())
                if any(len(t) == 0 for t in combo):
                    continue
                counts = [Counter(t) for t in combo]
                if mode == "safety":
                    for dist in _safety_quotient_distributions(counts, d):
                        kids = []
                        for u, cnt in sorted(dist.items(), key=lambda kv: _ckey(kv[0])):
                            kid = (u, None)
                            kids.extend([register(kid)] * cnt)
                        results.add(tuple(sorted(kids)))
                        if len(results) > _TRANSITION_BUDGET:
                            raise BudgetExhaustedError(
                                "quotient transition enumeration exceeded budget"
                            )
                    continue
                for dist in _quotient_distributions(counts, d):
                    child_variants = []
                    for prof, cnt in sorted(dist.items(), key=lambda kv: _ckey(kv[0])):
                        slots = frozenset().union(*prof)
                        edges = {
                            p: [
                                (q, mark[p])
                                for q, sub in zip(states_sorted, prof)
                                if p in sub
                            ]
                            for p in slots
                        }
                        mems = mon.child_mems(mem, slots, edges)
                        child_variants.append((slots, tuple(mems), cnt))
                    if any(not ms for _, ms, _ in child_variants):
                        continue
                    for pick in itertools.product(
                        *[
                            itertools.combinations_with_replacement(ms, cnt)
                            for _, ms, cnt in child_variants
                        ]
                    ):
                        ids = []
                        for (slots, _, _), mems in zip(child_variants, pick):
                            for m2 in mems:
                                ids.append(register((slots, m2)))
                        results.add(tuple(sorted(ids)))
                        if len(results) > _TRANSITION_BUDGET:
                            raise BudgetExhaustedError(
                                "quotient transition enumeration exceeded budget"
                            )
            if results:
                trans[(name, c)] = frozenset(results)

    states = tuple(names[s] for s in order)
    prio = {names[s]: mon.priority(s[1]) for s in order}
    return Npta(states, "q0", a.sig, prio, trans, "tuple", d)


def qpl_automaton(a: Npta, sigma) -> FinTreeAutomaton:
    """Finite d-ary trees that are bisimulation quotients of finite prefixes
    of sigma-reducts of members of L(a)."""
    return FinTreeAutomaton(quotient_automaton(prefix_npta(a, sigma)))


CUT = "__cut__"


def padded_prefix_npta(a: Npta, sigma) -> Npta:
    """Recognizer of the finite full d-ary prefixes of sigma-reducts of
    members of L(a) after padding every model to a leafless full d-ary tree;
    padding nodes carry the distinguished proposition CUT.  Full prefixes
    keep all siblings, so a prefix of tallness n contains the whole depth-n
    ball of the padded model -- the property the joint-consistency chain
    relies on."""
    if a.mode != "tuple":
        raise ModsepError("prefix languages require tuple mode")
    d = a.arity
    live = live_states(a)
    proj = project_letters(a, sigma)
    pad = "__pad__"
    while pad in a.states:
        pad += "_"
    sig2 = tuple(sorted(set(sigma) | {CUT}))
    trans: dict = {}
    for q in a.states:
        for c in letters(sigma):
            ts = proj.transitions(q, frozenset(c))
            out = set()
            leaf_ok = False
            for t in ts:
                if all(p in live for p in t):
                    leaf_ok = True
                out.add(tuple(sorted(t + (pad,) * (d - len(t)))))
            if leaf_ok:
                out.add(())
            if out:
                trans[(q, frozenset(c))] = frozenset(out)
    trans[(pad, frozenset({CUT}))] = frozenset({(pad,) * d, ()})
    states = a.states + (pad,)
    prio = {q: 0 for q in states}
    return Npta(states, a.initial, sig2, prio, trans, "tuple", d)


def qpl_padded_npta(a: Npta, sigma) -> Npta:
    """Quotients of full padded prefixes; feeding a pair of these to
    consistency_for_all_n (over sigma plus CUT) decides joint depth-n
    bisimulation consistency of the original automata for every n."""
    return quotient_automaton(padded_prefix_npta(a, sigma))


class _QplSide:
    """One side of the fused quotient-prefix consistency chain: the padded
    full-prefix automaton together with the macro states (active state sets)
    of its quotient construction.  Per (state, letter) only multiplicity-
    maximal transitions are kept: larger multiplicities only weaken the
    surjection constraints."""

    def __init__(self, a: Npta, sigma):
        self.pref = padded_prefix_npta(a, sigma)
        self.trans: dict = {}
        for (q, c), ts in self.pref.trans.items():
            counters = [Counter(t) for t in ts if t]
            keep: list = []
            for cnt in counters:
                if any(
                    other != cnt
                    and set(other) == set(cnt)
                    and all(other[p] >= cnt[p] for p in cnt)
                    for other in counters
                ):
                    continue
                if cnt not in keep:
                    keep.append(cnt)
            keep.sort(key=lambda counts: tuple(sorted(counts.items())))
            self.trans[(q, c)] = keep
        self.letters = sorted(
            {c for (_, c) in self.pref.trans}, key=lambda s: tuple(sorted(s))
        )
        self.macros = self._reachable_macros()
        self.leaf_letters = {
            phi: frozenset(
                c
                for c in self.letters
                if all(() in self.pref.transitions(q, c) for q in phi)
            )
            for phi in self.macros
        }

    def _reachable_macros(self):
        init = frozenset({self.pref.initial})
        seen = {init}
        todo = [init]
        while todo:
            phi = todo.pop()
            for c in self.letters:
                options = [self.trans.get((q, c), []) for q in sorted(phi)]
                if any(not ts for ts in options):
                    continue
                for combo in itertools.product(*options):
                    if any(not t for t in combo):
                        continue
                    union = sorted(set().union(*[set(t) for t in combo]))
                    for r in range(1, len(union) + 1):
                        for sub in itertools.combinations(union, r):
                            u = frozenset(sub)
                            if all(u & set(t) for t in combo):
                                if u not in seen:
                                    seen.add(u)
                                    todo.append(u)
        return sorted(seen, key=_ckey)


def _joint_step_feasible(combo_l, combo_r, d: int, good_pairs) -> bool:
    """Is there a common child structure: k <= d children typed on both
    sides, every pair of types in good_pairs, satisfying the surjection
    constraints of every transition on both sides?"""
    sides = [combo_l, combo_r]
    types_per_side = []
    for combo in sides:
        union = sorted(set().union(*[set(t) for t in combo]))
        types = [
            frozenset(sub)
            for r in range(1, len(union) + 1)
            for sub in itertools.combinations(union, r)
            if all(frozenset(sub) & set(t) for t in combo)
        ]
        types_per_side.append(types)

    def side_cap(side_idx, u):
        cap = d
        for t in sides[side_idx]:
            cap = min(cap, sum(t[p] for p in u & set(t)))
        return cap

    pair_types = []
    for ul in types_per_side[0]:
        for ur in types_per_side[1]:
            if (ul, ur) in good_pairs:
                cap = min(side_cap(0, ul), side_cap(1, ur))
                if cap >= 1:
                    pair_types.append((ul, ur, cap))
    if not pair_types:
        return False
    pair_types.sort(key=lambda x: _ckey((x[0], x[1])))
    k0 = sum(len(t) for t in combo_l) + sum(len(t) for t in combo_r)
    kmax = min(d, k0)

    def side_feasible(side_idx, vec) -> bool:
        for i, t in enumerate(sides[side_idx]):
            rows = {u: (c, c) for u, c in vec.items()}
            cols = {p: (1, t[p]) for p in t}
            edges = {u: sorted(u & set(t)) for u in vec}
            if not _circulation_feasible(rows, cols, edges):
                return False
        return True

    found = [False]

    def rec(idx: int, total: int, accl: dict, accr: dict):
        if found[0] or idx == len(pair_types):
            return
        ul, ur, cap = pair_types[idx]
        for c in range(min(cap, kmax - total), -1, -1):
            if found[0]:
                return
            if c:
                accl[ul] = accl.get(ul, 0) + c
                accr[ur] = accr.get(ur, 0) + c
            if (
                c
                and total + c >= 1
                and side_feasible(0, accl)
                and side_feasible(1, accr)
            ):
                found[0] = True
            else:
                rec(idx + 1, total + c, accl, accr)
            if c:
                accl[ul] -= c
                accr[ur] -= c
                if not accl[ul]:
                    del accl[ul]
                if not accr[ur]:
                    del accr[ur]

    rec(0, 0, {}, {})
    return found[0]


def qpl_consistency_for_all_n(a: Npta, b: Npta, sigma, d: int) -> ConsistencyResult:
    """Joint depth-n bisimulation consistency of L(a), L(b) over d-ary trees
    for every n, decided on the bisimulation quotients of full padded
    prefixes without materializing the quotient automata: the chain runs on
    pairs of quotient macro states with a per-step feasibility search."""
    sl, sr = _QplSide(a, sigma), _QplSide(b, sigma)
    pairs = [(x, y) for x in sl.macros for y in sr.macros]
    s0 = frozenset(
        (x, y) for (x, y) in pairs if sl.leaf_letters[x] & sr.leaf_letters[y]
    )
    m = len(sl.macros) * len(sr.macros) + 1
    chain = [s0]

    def step(cur: frozenset) -> frozenset:
        nxt = set()
        for (x, y) in cur:
            done = False
            for c in sl.letters:
                if c not in sr.letters:
                    continue
                opt_l = [sl.trans.get((q, c), []) for q in sorted(x)]
                opt_r = [sr.trans.get((q, c), []) for q in sorted(y)]
                if any(not ts for ts in opt_l) or any(not ts for ts in opt_r):
                    continue
                for combo_l in itertools.product(*opt_l):
                    if any(not t for t in combo_l):
                        continue
                    for combo_r in itertools.product(*opt_r):
                        if any(not t for t in combo_r):
                            continue
                        if _joint_step_feasible(combo_l, combo_r, d, cur):
                            done = True
                            break
                    if done:
                        break
                if done:
                    break
            if done:
                nxt.add((x, y))
        return frozenset(nxt)

    stabilized = m + 1
    for i in range(1, m + 2):
        nxt = step(chain[-1])
        if nxt == chain[-1] and stabilized == m + 1:
            stabilized = i - 1
        chain.append(nxt)
    root = (frozenset({sl.pref.initial}), frozenset({sr.pref.initial}))
    first_failure = None
    for n, s in enumerate(chain):
        if root not in s:
            first_failure = n
            break
    return ConsistencyResult(
        root in chain[m], first_failure, m, tuple(len(s) for s in chain), stabilized
    )



