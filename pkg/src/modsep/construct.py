"""Separator and uniform-consequence construction, plus the verification
used before any constructed formula is surfaced."""

from __future__ import annotations

import itertools

from . import formula as F
from . import kripke as K
from .automata import (
    Npta,
    duplication_safe_closure,
    is_duplication_safe,
    is_empty,
    live_states,
    project_letters,
)
from .errors import BudgetExhaustedError, ModsepError, UnsupportedClassError
from .translate import muml_to_npta

_TREE_BUDGET = 100_000


def letter_formula(letter, sig) -> F.Formula:
    """Conjunction of literals pinning a valuation over sig."""
    lits = [F.Lit(p, p in letter) for p in sorted(sig)]
    return F.conj(lits)


def _implies(x: F.Formula, y: F.Formula) -> bool:
    """Sound (incomplete) syntactic entailment used for simplification."""
    if x == y or isinstance(y, F.Top) or isinstance(x, F.Bot):
        return True
    if isinstance(x, F.Or):
        return all(_implies(a, y) for a in x.args)
    if isinstance(y, F.And):
        return all(_implies(x, b) for b in y.args)
    if isinstance(x, F.And) and any(_implies(a, y) for a in x.args):
        return True
    if isinstance(y, F.Or) and any(_implies(x, b) for b in y.args):
        return True
    if isinstance(x, F.Dia) and isinstance(y, F.Dia):
        return x.grade >= y.grade and _implies(x.body, y.body)
    if isinstance(x, F.Box) and isinstance(y, F.Box):
        return x.grade <= y.grade and _implies(x.body, y.body)
    return False


def _conj_args(f: F.Formula) -> tuple:
    return f.args if isinstance(f, F.And) else (f,)


def _resolve_pairs(args: list) -> list:
    """Merge disjuncts differing in one literal's polarity: the shared part."""
    for i, x in enumerate(args):
        xs = set(_conj_args(x))
        for j in range(i + 1, len(args)):
            ys = set(_conj_args(args[j]))
            diff = xs.symmetric_difference(ys)
            lits = [g for g in diff if isinstance(g, F.Lit)]
            if len(diff) == 2 and len(lits) == 2:
                a, b = lits
                if a.name == b.name and a.positive != b.positive:
                    merged = F.conj(sorted(xs - {a} - {b}, key=F.render))
                    rest = [g for k, g in enumerate(args) if k not in (i, j)]
                    return _resolve_pairs(rest + [merged])
    return args


def _simp(f: F.Formula) -> F.Formula:
    if isinstance(f, F.And):
        args = [_simp(a) for a in f.args]
        kept: list = []
        for a in args:
            if any(_implies(b, a) for b in kept):
                continue
            kept = [b for b in kept if not _implies(a, b)] + [a]
        return F.conj(sorted(kept, key=F.render))
    if isinstance(f, F.Or):
        args = [_simp(a) for a in f.args]
        args = _resolve_pairs(args)
        kept = []
        for a in args:
            if any(_implies(a, b) for b in kept):
                continue
            kept = [b for b in kept if not _implies(b, a)] + [a]
        return F.disj(sorted(kept, key=F.render))
    if isinstance(f, F.Dia):
        return F.Dia(f.grade, _simp(f.body))
    if isinstance(f, F.Box):
        return F.Box(f.grade, _simp(f.body))
    if isinstance(f, (F.Mu, F.Nu)):
        return type(f)(f.var, _simp(f.body))
    return f


def simplify(f: F.Formula) -> F.Formula:
    """Iterated constant folding, absorption and single-literal resolution;
    preserves semantics (every rewrite is a sound entailment both ways)."""
    f = F.normalize(f)
    while True:
        g = F.normalize(_simp(f))
        if g == f:
            return f
        f = g


def _dia_n(n: int, body: F.Formula) -> F.Formula:
    for _ in range(n):
        body = F.Dia(1, body)
    return body


def _box_n(n: int, body: F.Formula) -> F.Formula:
    for _ in range(n):
        body = F.Box(0, body)
    return body


# ---------------------------------------------------------------------------
# Uniform consequences over words

def word_run_formula(a: Npta, m: int, p: str, q: str, _memo=None) -> F.Formula:
    """Formula satisfied by exactly the words on whose depth-m prefix the
    automaton can move from state p to state q (halving recursion, so the
    size is O(|Q| m^2) with memoization)."""
    sig = a.sig
    memo = _memo if _memo is not None else {}
    alphabet = [
        frozenset(c)
        for r in range(len(sig) + 1)
        for c in itertools.combinations(sorted(sig), r)
    ]

    def run(m: int, p: str, q: str) -> F.Formula:
        key = (m, p, q)
        if key in memo:
            return memo[key]
        if m == 0:
            out = F.TOP if p == q else F.BOT
        elif m == 1:
            out = F.disj(
                sorted(
                    {
                        letter_formula(c, sig)
                        for c in alphabet
                        if (q,) in a.transitions(p, c)
                    },
                    key=F.render,
                )
            )
        else:
            half = m // 2
            out = F.disj(
                [
                    F.conj([run(half, p, r), _dia_n(half, run(m - half, r, q))])
                    for r in a.states
                ]
            )
        memo[key] = out
        return out

    return run(m, p, q)


def uniform_consequence_words(a: Npta, n: int) -> F.Formula:
    """Modal formula of depth <= n satisfied by exactly the words that agree
    with some member of L(a) up to depth n.  Size O(|Q| n^2): the run
    formulas use a halving recursion."""
    if a.mode != "tuple" or a.arity != 1:
        raise UnsupportedClassError("word construction needs tuple mode, arity 1")
    sig = a.sig
    live = live_states(a)
    alphabet = [
        frozenset(c)
        for r in range(len(sig) + 1)
        for c in itertools.combinations(sorted(sig), r)
    ]
    memo: dict = {}

    def run(m: int, p: str, q: str) -> F.Formula:
        return word_run_formula(a, m, p, q, _memo=memo)

    acc = {
        q: [c for c in alphabet if () in a.transitions(q, c)] for q in a.states
    }
    cont = {
        q: [
            c
            for c in alphabet
            if any(
                t == () or (len(t) == 1 and t[0] in live)
                for t in a.transitions(q, c)
            )
        ]
        for q in a.states
    }
    parts = []
    for q in a.states:
        cont_d = F.disj([letter_formula(c, sig) for c in cont[q]])
        parts.append(F.conj([run(n, a.initial, q), _dia_n(n, cont_d)]))
    for m in range(n + 1):
        for q in a.states:
            acc_d = F.disj([letter_formula(c, sig) for c in acc[q]])
            parts.append(
                F.conj(
                    [
                        run(m, a.initial, q),
                        _box_n(m + 1, F.BOT),
                        _dia_n(m, acc_d),
                    ]
                )
            )
    return F.normalize(F.disj(parts))


# ---------------------------------------------------------------------------
# Uniform consequences over all models / binary trees

def uniform_consequence(a: Npta, n: int, model_class: str) -> F.Formula:
    """Depth-n uniform consequence of the automaton: entails exactly the
    modal consequences of L(a) up to depth n.  Over binary trees the
    automaton must be duplication safe; over all models tuple transitions are
    read as unbounded (multiplicities collapse)."""
    if model_class not in ("all", "binary"):
        raise UnsupportedClassError(f"no uniform consequence over {model_class!r}")
    if model_class == "binary":
        if a.mode != "tuple" or a.arity != 2:
            raise UnsupportedClassError("binary construction needs arity 2")
        if not is_duplication_safe(a):
            raise ModsepError("binary construction requires a duplication-safe automaton")
    sig = a.sig
    live = live_states(a)
    alphabet = [
        frozenset(c)
        for r in range(len(sig) + 1)
        for c in itertools.combinations(sorted(sig), r)
    ]
    level: dict = {}
    for q in a.states:
        opts = sorted(
            {
                letter_formula(c, sig)
                for c in alphabet
                if any(all(p in live for p in t) for t in a.transitions(q, c))
            },
            key=F.render,
        )
        level[q] = F.disj(opts)
    for _ in range(n):
        nxt = {}
        for q in a.states:
            parts = []
            for c in alphabet:
                for t in sorted(a.transitions(q, c), key=lambda t: tuple(sorted(t))):
                    succ = sorted({level[p] for p in t}, key=F.render)
                    parts.append(F.conj([letter_formula(c, sig), F.nabla(succ)]))
            nxt[q] = F.disj(parts)
        level = nxt
    return F.normalize(level[a.initial])


# ---------------------------------------------------------------------------
# Satisfiability over a class and separator verification

def sat_arity(phi: F.Formula, model_class) -> int:
    """Arity sufficient to witness satisfiability of phi over the class."""
    kind = model_class.kind if hasattr(model_class, "kind") else model_class
    if kind == "words":
        return 1
    if kind == "binary":
        return 2
    if kind == "dary":
        return model_class.d
    return F.diamond_budget(phi)


def satisfiable(phi: F.Formula, model_class) -> bool:
    from .decide import ModelClass

    cls = model_class if isinstance(model_class, ModelClass) else ModelClass(model_class)
    phi = F.normalize(phi)
    while cls.kind == "finite":
        phi = F.normalize(F.And((phi, F.Mu("WF", F.Box(0, F.Var("WF"))))))
        cls = cls.inner
    if isinstance(phi, F.Bot):
        return False
    if isinstance(phi, F.Top):
        return True
    return not is_empty(muml_to_npta(phi, sat_arity(phi, cls)))


def entails(phi: F.Formula, psi: F.Formula, model_class) -> bool:
    return not satisfiable(F.And((phi, F.neg(psi))), model_class)


def verify_separator(phi: F.Formula, phi2: F.Formula, psi: F.Formula, model_class) -> bool:
    """phi entails psi and psi entails the negation of phi2, over the class."""
    if not F.is_ml(F.normalize(psi)):
        raise ModsepError("separators must be modal formulas")
    return entails(phi, psi, model_class) and entails(psi, F.neg(phi2), model_class)


# ---------------------------------------------------------------------------
# Separators over d-ary trees and Craig interpolants

def _sigma_type_trees(sigma, outdeg: int, depth: int, budget: int):
    seen = set()
    count = 0
    for t in K.enumerate_trees(sigma, outdeg, depth, limit=budget + 1):
        count += 1
        if count > budget:
            raise BudgetExhaustedError(
                f"type enumeration over {sorted(sigma)} exceeded {budget} trees"
            )
        key = F.render(F.characteristic_formula(t, sigma, depth))
        if key in seen:
            continue
        seen.add(key)
        yield t


def separator_td(
    phi: F.Formula,
    phi2: F.Formula,
    d: int,
    sigma,
    n: int,
    budget: int = _TREE_BUDGET,
) -> F.Formula | None:
    """Separator over d-ary trees as a disjunction of depth-n characteristic
    formulas of the sigma-trees consistent with phi; requires that the
    separability check already failed joint consistency at depth n."""
    sigma = tuple(sorted(sigma))
    phi_n = F.normalize(phi)
    parts = []
    for t in _sigma_type_trees(sigma, d, n, budget):
        chi = F.characteristic_formula(t, sigma, n)
        cand = F.normalize(F.And((phi_n, chi)))
        if isinstance(cand, F.Bot):
            continue
        if not is_empty(muml_to_npta(cand, d)):
            parts.append(chi)
    psi = simplify(F.disj(sorted(parts, key=F.render)))
    from .decide import ModelClass

    if not verify_separator(phi, phi2, psi, ModelClass("dary", d=d)):
        return None
    return psi


def ml_craig_interpolant(
    theta: F.Formula,
    theta2: F.Formula,
    sigma,
    model_class=None,
    depth: int | None = None,
    budget: int = _TREE_BUDGET,
) -> F.Formula:
    """Separator of theta and theta2 over the common signature sigma, built
    as a disjunction of sigma-type characteristic formulas consistent with
    theta.  Raises if theta does not entail the negation of theta2 at the
    chosen depth (default: the maximal modal depth of the inputs)."""
    from .decide import ModelClass

    cls = model_class if model_class is not None else ModelClass("all")
    theta_n = F.normalize(theta)
    if depth is None:
        depth = max(F.modal_depth(theta_n), F.modal_depth(F.normalize(theta2)))
    n = depth
    sigma = tuple(sorted(sigma))
    if cls.kind == "words":
        outdeg = 1
    elif cls.kind == "binary":
        outdeg = 2
    elif cls.kind == "dary":
        outdeg = cls.d
    else:
        outdeg = _type_outdeg(sigma, n)
    parts = []
    for t in _sigma_type_trees(sigma, outdeg, n, budget):
        chi = F.characteristic_formula(t, sigma, n)
        cand = F.normalize(F.And((theta_n, chi)))
        if isinstance(cand, F.Bot):
            continue
        if satisfiable(cand, cls):
            parts.append(chi)
    psi = simplify(F.disj(sorted(parts, key=F.render)))
    if not verify_separator(theta, theta2, psi, cls):
        raise ModsepError(
            "entailment precondition violated: the inputs admit no separator "
            "over the given signature"
        )
    return psi


def _type_outdeg(sigma, n: int) -> int:
    """Enough children to realize every bisimulation type of depth < n,
    capped at a desk-scale bound.  An insufficient cap cannot produce a wrong
    separator: the result is verified and the construction fails loudly."""
    if n <= 0:
        return 1
    count = 2 ** len(sigma)
    for _ in range(n - 1):
        count = 2 ** len(sigma) * 2 ** min(count, 12)
    return min(count, 12)
