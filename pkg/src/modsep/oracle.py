"""Brute-force reference implementations used by tests and cross-validation.

Everything here trades efficiency for being simple enough to trust: explicit
fixpoint iteration, exhaustive enumeration, recursive matching.  Results are
deterministic; enumeration order is fixed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import formula as F
from . import kripke as K
from .errors import FormulaError


# ---------------------------------------------------------------------------
# Knaster-Tarski model checking (independent of the game-based checker)

def _all_paths(tree: K.KripkeTree) -> list[K.Path]:
    out = [()]
    for i, c in enumerate(tree.children):
        out.extend((i,) + p for p in _all_paths(c))
    return out


def _check_polarity(f: F.Formula, polarity: dict, negated: bool) -> None:
    if isinstance(f, F._Neg):
        _check_polarity(f.body, polarity, not negated)
    elif isinstance(f, F.Var):
        if f.name in polarity and polarity[f.name] != negated:
            raise FormulaError(
                f"fixpoint variable {f.name} occurs with mixed polarity"
            )
    elif isinstance(f, (F.And, F.Or)):
        for a in f.args:
            _check_polarity(a, polarity, negated)
    elif isinstance(f, (F.Dia, F.Box)):
        _check_polarity(f.body, polarity, negated)
    elif isinstance(f, (F.Mu, F.Nu)):
        inner = dict(polarity)
        inner[f.var] = negated
        _check_polarity(f.body, inner, negated)


def model_check_fixpoint(tree: K.KripkeTree, phi: F.Formula) -> bool:
    """Direct fixpoint evaluation on a finite tree; handles raw (unnormalized)
    formulas, negation as complement, and graded modalities by counting."""
    _check_polarity(phi, {}, False)
    nodes = _all_paths(tree)
    universe = frozenset(nodes)
    children = {p: [p + (i,) for i in range(len(K.node_at(tree, p).children))] for p in nodes}

    def ev(f: F.Formula, env: dict) -> frozenset:
        if isinstance(f, F.Top):
            return universe
        if isinstance(f, F.Bot):
            return frozenset()
        if isinstance(f, F._Neg):
            return universe - ev(f.body, env)
        if isinstance(f, F.Lit):
            inside = frozenset(
                p for p in nodes if f.name in K.node_at(tree, p).label
            )
            return inside if f.positive else universe - inside
        if isinstance(f, F.Var):
            return env[f.name]
        if isinstance(f, F.And):
            out = universe
            for a in f.args:
                out &= ev(a, env)
            return out
        if isinstance(f, F.Or):
            out = frozenset()
            for a in f.args:
                out |= ev(a, env)
            return out
        if isinstance(f, F.Dia):
            body = ev(f.body, env)
            return frozenset(
                p for p in nodes
                if sum(1 for c in children[p] if c in body) >= f.grade
            )
        if isinstance(f, F.Box):
            body = ev(f.body, env)
            return frozenset(
                p for p in nodes
                if sum(1 for c in children[p] if c not in body) <= f.grade
            )
        if isinstance(f, (F.Mu, F.Nu)):
            cur = frozenset() if isinstance(f, F.Mu) else universe
            while True:
                env2 = dict(env)
                env2[f.var] = cur
                nxt = ev(f.body, env2)
                if nxt == cur:
                    return cur
                cur = nxt
        raise TypeError(f"not a formula: {f!r}")

    return () in ev(phi, {})


# ---------------------------------------------------------------------------
# Functional bisimulations (bounded morphisms) between finite trees

def functional_bisim_exists(src: K.KripkeTree, dst: K.KripkeTree) -> bool:
    """True iff there is a function src -> dst whose graph is a bisimulation
    (labels preserved, children mapped onto children)."""
    if src.label != dst.label:
        return False
    if not src.children and not dst.children:
        return True
    if bool(src.children) != bool(dst.children):
        return False
    # every src child maps to some dst child; every dst child must be hit
    options = [
        [j for j, d in enumerate(dst.children) if functional_bisim_exists(c, d)]
        for c in src.children
    ]
    if any(not o for o in options):
        return False
    for assign in itertools.product(*options):
        if set(assign) == set(range(len(dst.children))):
            return True
    return False


# ---------------------------------------------------------------------------
# Satisfiability of a formula on finite trees / at the prefix level

def sat_on_finite_tree(phi: F.Formula, d: int, max_depth: int, budget: int = 50000):
    """First enumerated finite d-ary tree satisfying phi, or None."""
    from .games import model_check

    sigma = F.sig(phi)
    for t in K.enumerate_trees(sigma, d, max_depth, limit=budget):
        if model_check(t, phi):
            return t
    return None


def prefix_extendable(tree: K.KripkeTree, phi: F.Formula, d: int, n: int) -> bool:
    """True iff some d-ary model of phi agrees with `tree` up to depth n and
    has `tree` as a prefix.  Decided exactly via the automaton pipeline; the
    depth-n agreement is captured by a characteristic formula."""
    from .automata import is_empty
    from .translate import muml_to_npta

    sigma = sorted(F.sig(phi) | _labels(tree))
    chi = F.characteristic_formula(tree, sigma, n)
    conj = F.normalize(F.And((phi, chi)))
    if isinstance(conj, F.Bot):
        return False
    return not is_empty(muml_to_npta(conj, d))


def _labels(tree: K.KripkeTree) -> frozenset:
    out = set(tree.label)
    for c in tree.children:
        out |= _labels(c)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Joint consistency and equivalence sweeps

@dataclass(frozen=True)
class OracleResult:
    """Three-valued search outcome."""

    status: str  # "found" | "exhausted" | "budget"
    witness: tuple | None = None
    examined: int = 0


def joint_consistency_bruteforce(
    phi: F.Formula,
    phi2: F.Formula,
    sigma,
    n: int,
    d: int,
    budget: int = 20000,
    max_depth: int | None = None,
) -> OracleResult:
    """Search for finite trees M, M' that are depth-n bisimilar over `sigma`
    and extend to d-ary models of phi and phi' respectively (satisfaction of
    fixpoint formulae is checked at the prefix level via the automaton
    pipeline, never claimed for the finite tree itself).

    The enumeration covers trees of depth at most `max_depth` (default n) and
    stops after `budget` candidate pairs."""
    from .games import model_check

    sigma = frozenset(sigma)
    cap = n if max_depth is None else max_depth
    sig_l = F.sig(phi) | sigma
    sig_r = F.sig(phi2) | sigma

    def holders(f, s):
        out = []
        for t in K.enumerate_trees(s, d, cap, limit=budget):
            if model_check(t, f) or prefix_extendable(t, f, d, n):
                out.append(t)
            if len(out) * 4 > budget:
                break
        return out

    left = holders(phi, sig_l)
    right = holders(phi2, sig_r)
    examined = 0
    exhausted_left = _enumeration_complete(sig_l, d, cap, budget)
    exhausted_right = _enumeration_complete(sig_r, d, cap, budget)
    for a in left:
        for b in right:
            examined += 1
            if examined > budget:
                return OracleResult("budget", None, examined)
            if K.check_bisim(a, b, sigma, n) is not None:
                return OracleResult("found", (a, b), examined)
    if exhausted_left and exhausted_right:
        return OracleResult("exhausted", None, examined)
    return OracleResult("budget", None, examined)


def _enumeration_complete(sigma, d: int, max_depth: int, budget: int) -> bool:
    count = 0
    for _ in K.enumerate_trees(sigma, d, max_depth, limit=budget + 1):
        count += 1
        if count > budget:
            return False
    return True


def equivalence_bruteforce(
    phi: F.Formula, psi: F.Formula, d: int, max_depth: int, budget: int = 20000
):
    """First enumerated finite tree on which phi and psi disagree (game
    semantics), or None if none within bounds."""
    from .games import model_check

    sigma = F.sig(phi) | F.sig(psi)
    for t in K.enumerate_trees(sigma, d, max_depth, limit=budget):
        if model_check(t, phi) != model_check(t, psi):
            return t
    return None


# ---------------------------------------------------------------------------
# Prefix-hood by bounded extension search

def _extensions(tree: K.KripkeTree, pool, d: int):
    """All trees obtained by adding subtrees from the pool as extra children
    of arbitrary nodes, keeping the outdegree at most d."""
    room = d - len(tree.children)
    child_variants = []
    for c in tree.children:
        child_variants.append(list(_extensions(c, pool, d)))
    for extra in range(room + 1):
        for added in itertools.combinations_with_replacement(pool, extra):
            for kids in itertools.product(*child_variants) if child_variants else [()]:
                yield K.KripkeTree(tree.label, tuple(kids) + tuple(added))


def prefix_witness_bruteforce(
    tree: K.KripkeTree,
    phi: F.Formula,
    d: int,
    pool_depth: int = 1,
    unfold: int | None = None,
    budget: int = 60000,
) -> bool:
    """Is the tree a prefix of some d-ary model of phi?  Independent search:
    extend the tree by attaching small subtrees anywhere, evaluate with
    greatest fixpoints unfolded a bounded number of times.  The pool depth
    and unfolding bound are part of the check's contract: they must be large
    enough for the formula under test."""
    from .games import model_check

    sigma = sorted(F.sig(phi) | _labels(tree))
    pool = list(K.enumerate_trees(sigma, d, pool_depth))
    k = unfold if unfold is not None else K.depth(tree) + pool_depth + 1
    target = F.normalize(F.unfold_greatest(F.normalize(phi), k))
    count = 0
    for ext in _extensions(tree, pool, d):
        count += 1
        if count > budget:
            raise BudgetExhaustedError("prefix extension search exceeded budget")
        if model_check(ext, target):
            return True
    return False


# ---------------------------------------------------------------------------
# Independent depth-n isomorphism-consistency probe for automata pairs

def iso_consistency_probe(a, b, sigma, d: int, n: int) -> bool:
    """Do the two automata accept models whose depth-n prefixes become
    isomorphic after padding to leafless full d-ary trees?  Memoized
    recursive search with brute-force matching; independent of the
    production chain computation."""
    from .automata import live_states, project_letters, letters

    sigma = tuple(sorted(sigma))
    pa, pb = project_letters(a, sigma), project_letters(b, sigma)
    live_a, live_b = live_states(a), live_states(b)
    alphabet = [frozenset(c) for c in letters(sigma)]
    dead = ("dead",)

    def padded(proj, live, q):
        if q == dead:
            return [("dead-letter", (dead,) * d)]
        out = []
        for c in alphabet:
            for t in sorted(proj.transitions(q, c), key=lambda t: tuple(sorted(t))):
                out.append((c, tuple(sorted(t + (dead,) * (d - len(t))))))
        return out

    def leafable(proj, live, q):
        if q == dead:
            return {"dead-letter"}
        out = set()
        for c in alphabet:
            for t in proj.transitions(q, c):
                if all(p in live for p in t):
                    out.add(c)
        return out

    memo: dict = {}

    def probe(x, y, i: int) -> bool:
        key = (x, y, i)
        if key in memo:
            return memo[key]
        memo[key] = False  # cycle guard; recursion is on decreasing i anyway
        if i == 0:
            res = bool(leafable(pa, live_a, x) & leafable(pb, live_b, y))
        else:
            res = False
            for cx, tx in padded(pa, live_a, x):
                for cy, ty in padded(pb, live_b, y):
                    if cx != cy or len(tx) != len(ty):
                        continue
                    for perm in sorted(set(itertools.permutations(ty))):
                        if all(probe(p, q2, i - 1) for p, q2 in zip(tx, perm)):
                            res = True
                            break
                    if res:
                        break
                if res:
                    break
        memo[key] = res
        return res

    return probe(a.initial, b.initial, n)
