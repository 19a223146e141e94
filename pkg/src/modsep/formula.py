"""Formula ASTs for the modal mu-calculus with graded modalities.

Nodes are immutable dataclasses; formulas are values (hashable, comparable).
Grades are natural numbers with unary-style semantics: a diamond of grade g
requires at least g children satisfying the body, a box of grade g allows at
most g exceptional children.  Plain diamond is grade 1, plain box grade 0.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass

from .errors import FormulaError, ParseError


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Lit(Formula):
    name: str
    positive: bool = True


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Dia(Formula):
    grade: int
    body: Formula


@dataclass(frozen=True)
class Box(Formula):
    grade: int
    body: Formula


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Mu(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula


TOP = Top()
BOT = Bot()

THETA_INF = Nu("X", Dia(1, Var("X")))


def theta_d(d: int) -> Formula:
    """Fixpoint formula defining trees whose nodes all have at most d children."""
    return Nu("X", And((Box(0, Var("X")), Box(d, BOT))))


def conj(args) -> Formula:
    args = tuple(args)
    if not args:
        return TOP
    if len(args) == 1:
        return args[0]
    return And(args)


def disj(args) -> Formula:
    args = tuple(args)
    if not args:
        return BOT
    if len(args) == 1:
        return args[0]
    return Or(args)


def nabla(args) -> Formula:
    """Cover modality: every argument holds at some child and every child
    satisfies some argument.  Expands to a conjunction of diamonds plus a box."""
    args = tuple(args)
    return conj(tuple(Dia(1, a) for a in args) + (Box(0, disj(args)),))


# ---------------------------------------------------------------------------
# Printing

_ATOMIC = (Top, Bot, Lit, Var)


def _wrap(f: Formula, text: str) -> str:
    if isinstance(f, (And, Or, Mu, Nu)):
        return "(" + text + ")"
    return text


def render(f: Formula) -> str:
    """Canonical ASCII rendering; `parse(render(f)) == f` for normalized f."""
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Lit):
        return f.name if f.positive else "~" + f.name
    if isinstance(f, Var):
        return f.name
    if isinstance(f, And):
        return " & ".join(_paren_arg(a, in_and=True) for a in f.args)
    if isinstance(f, Or):
        return " | ".join(_paren_arg(a, in_and=False) for a in f.args)
    if isinstance(f, Dia):
        op = "<>" if f.grade == 1 else f"<{f.grade}>"
        return op + _wrap(f.body, render(f.body))
    if isinstance(f, Box):
        op = "[]" if f.grade == 0 else f"[{f.grade}]"
        return op + _wrap(f.body, render(f.body))
    if isinstance(f, Mu):
        return f"mu {f.var}. " + render(f.body)
    if isinstance(f, Nu):
        return f"nu {f.var}. " + render(f.body)
    raise TypeError(f"not a formula: {f!r}")


def _paren_arg(a: Formula, in_and: bool) -> str:
    text = render(a)
    if isinstance(a, (Mu, Nu)):
        return "(" + text + ")"
    if in_and and isinstance(a, Or):
        return "(" + text + ")"
    if not in_and and isinstance(a, And):
        # conjunction binds tighter, no parens needed, keep for symmetry of
        # the grammar: & > |, so And inside Or is fine bare
        return text
    return text


def size(f: Formula) -> int:
    """Formula size: length of the canonical rendering."""
    return len(render(f))


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num_dia><\d+>)|(?P<num_box>\[\d+\])|(?P<dia><>)|(?P<box>\[\])"
    r"|(?P<sym>[~&|().])|(?P<word>[A-Za-z_][A-Za-z0-9_]*)|(?P<num>\d+))"
)

_KEYWORDS = {"true", "false", "mu", "nu", "THETA_INF", "THETA_D"}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip():
                    raise ParseError(f"unexpected character {text[pos]!r}", pos)
                break
            pos = m.end()
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), m.start(kind)))
        self.i = 0

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)


def parse_formula(text: str) -> Formula:
    """Parse the ASCII grammar.  Named constants THETA_INF and THETA_D(d)
    expand to their fixpoint definitions.  Raises ParseError / FormulaError."""
    toks = _Tokens(text)
    f = _parse_binder(toks)
    kind, val, pos = toks.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {val!r}", pos)
    _check_bound(f, frozenset())
    return f


def _parse_binder(toks: _Tokens) -> Formula:
    kind, val, pos = toks.peek()
    if kind == "word" and val in ("mu", "nu"):
        toks.next()
        vkind, vname, vpos = toks.next()
        if vkind != "word" or not vname[0].isupper() or vname in _KEYWORDS:
            raise ParseError("expected a fixpoint variable (capitalized name)", vpos)
        toks.expect(".")
        body = _parse_binder(toks)
        return Mu(vname, body) if val == "mu" else Nu(vname, body)
    return _parse_or(toks)


def _tail(toks: _Tokens, parse_next):
    kind, val, _ = toks.peek()
    if kind == "word" and val in ("mu", "nu"):
        return _parse_binder(toks)
    return parse_next(toks)


def _parse_or(toks: _Tokens) -> Formula:
    args = [_parse_and(toks)]
    while toks.peek()[1] == "|":
        toks.next()
        args.append(_tail(toks, _parse_and))
    return args[0] if len(args) == 1 else Or(tuple(args))


def _parse_and(toks: _Tokens) -> Formula:
    args = [_parse_unary(toks)]
    while toks.peek()[1] == "&":
        toks.next()
        args.append(_tail(toks, _parse_unary))
    return args[0] if len(args) == 1 else And(tuple(args))


def _parse_unary(toks: _Tokens) -> Formula:
    kind, val, pos = toks.peek()
    if val == "~":
        toks.next()
        return neg(_tail(toks, _parse_unary))
    if kind == "dia":
        toks.next()
        return Dia(1, _tail(toks, _parse_unary))
    if kind == "box":
        toks.next()
        return Box(0, _tail(toks, _parse_unary))
    if kind == "num_dia":
        toks.next()
        g = int(val[1:-1])
        if g < 1:
            raise ParseError("diamond grade must be at least 1", pos)
        return Dia(g, _tail(toks, _parse_unary))
    if kind == "num_box":
        toks.next()
        return Box(int(val[1:-1]), _tail(toks, _parse_unary))
    return _parse_atom(toks)


def _parse_atom(toks: _Tokens) -> Formula:
    kind, val, pos = toks.next()
    if val == "(":
        f = _parse_binder(toks)
        toks.expect(")")
        return f
    if kind != "word":
        raise ParseError(f"expected a formula, found {val or 'end of input'!r}", pos)
    if val == "true":
        return TOP
    if val == "false":
        return BOT
    if val == "THETA_INF":
        return THETA_INF
    if val == "THETA_D":
        toks.expect("(")
        nkind, nval, npos = toks.next()
        if not nval.isdigit():
            raise ParseError("THETA_D expects a numeric argument", npos)
        toks.expect(")")
        return theta_d(int(nval))
    if val in _KEYWORDS:
        raise ParseError(f"keyword {val!r} cannot be used here", pos)
    if val[0].isupper():
        return Var(val)
    return Lit(val, True)


def _check_bound(f: Formula, scope: frozenset[str]) -> None:
    if isinstance(f, Var):
        if f.name not in scope:
            raise FormulaError(f"unbound fixpoint variable {f.name}")
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _check_bound(a, scope)
    elif isinstance(f, (Dia, Box)):
        _check_bound(f.body, scope)
    elif isinstance(f, (Mu, Nu)):
        _check_bound(f.body, scope | {f.var})


def neg(f: Formula) -> Formula:
    """Structural negation helper used by the parser and callers.
    The result is resolved to literals by normalize()."""
    if isinstance(f, Top):
        return BOT
    if isinstance(f, Bot):
        return TOP
    if isinstance(f, Lit):
        return Lit(f.name, not f.positive)
    return _Neg(f)


@dataclass(frozen=True)
class _Neg(Formula):
    """Internal negation wrapper; eliminated by normalize()."""

    body: Formula


# ---------------------------------------------------------------------------
# Normalization

def normalize(f: Formula) -> Formula:
    """Negation normal form with binder variables renamed apart.

    Negation is pushed to propositions (fixpoints and graded modalities
    dualize), boolean constants are folded, n-ary connectives flattened,
    deduplicated and canonically sorted, vacuous binders dropped.  Idempotent
    on closed formulas."""
    _check_bound(_strip_neg(f), frozenset())
    counter = [0]
    g = _nnf(f, False, {}, counter)
    return _simplify(g)


def _strip_neg(f: Formula) -> Formula:
    if isinstance(f, _Neg):
        return _strip_neg(f.body)
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_strip_neg(a) for a in f.args))
    if isinstance(f, (Dia, Box)):
        return type(f)(f.grade, _strip_neg(f.body))
    if isinstance(f, (Mu, Nu)):
        return type(f)(f.var, _strip_neg(f.body))
    return f


def _nnf(f: Formula, negated: bool, env: dict, counter: list[int]) -> Formula:
    if isinstance(f, _Neg):
        return _nnf(f.body, not negated, env, counter)
    if isinstance(f, Top):
        return BOT if negated else TOP
    if isinstance(f, Bot):
        return TOP if negated else BOT
    if isinstance(f, Lit):
        return Lit(f.name, f.positive != negated)
    if isinstance(f, Var):
        if f.name not in env:
            raise FormulaError(f"unbound fixpoint variable {f.name}")
        fresh, pol = env[f.name]
        if pol != negated:
            raise FormulaError(
                f"fixpoint variable {f.name} occurs under an odd number of negations"
            )
        return Var(fresh)
    if isinstance(f, And):
        args = tuple(_nnf(a, negated, env, counter) for a in f.args)
        return Or(args) if negated else And(args)
    if isinstance(f, Or):
        args = tuple(_nnf(a, negated, env, counter) for a in f.args)
        return And(args) if negated else Or(args)
    if isinstance(f, Dia):
        body = _nnf(f.body, negated, env, counter)
        if negated:
            return Box(f.grade - 1, body)
        return Dia(f.grade, body)
    if isinstance(f, Box):
        body = _nnf(f.body, negated, env, counter)
        if negated:
            return Dia(f.grade + 1, body)
        return Box(f.grade, body)
    if isinstance(f, (Mu, Nu)):
        fresh = f"X{counter[0]}"
        counter[0] += 1
        env2 = dict(env)
        env2[f.var] = (fresh, negated)
        body = _nnf(f.body, negated, env2, counter)
        flip = isinstance(f, Mu) == negated
        return Nu(fresh, body) if flip else Mu(fresh, body)
    raise TypeError(f"not a formula: {f!r}")


def _simplify(f: Formula) -> Formula:
    if isinstance(f, And):
        args = []
        for a in f.args:
            a = _simplify(a)
            if isinstance(a, Bot):
                return BOT
            if isinstance(a, Top):
                continue
            args.extend(a.args if isinstance(a, And) else (a,))
        uniq = sorted(set(args), key=render)
        for a in uniq:
            if isinstance(a, Lit) and Lit(a.name, not a.positive) in uniq:
                return BOT
        return conj(uniq)
    if isinstance(f, Or):
        args = []
        for a in f.args:
            a = _simplify(a)
            if isinstance(a, Top):
                return TOP
            if isinstance(a, Bot):
                continue
            args.extend(a.args if isinstance(a, Or) else (a,))
        uniq = sorted(set(args), key=render)
        for a in uniq:
            if isinstance(a, Lit) and Lit(a.name, not a.positive) in uniq:
                return TOP
        return disj(uniq)
    if isinstance(f, Dia):
        body = _simplify(f.body)
        if isinstance(body, Bot):
            return BOT
        return Dia(f.grade, body)
    if isinstance(f, Box):
        body = _simplify(f.body)
        if isinstance(body, Top):
            return TOP
        return Box(f.grade, body)
    if isinstance(f, (Mu, Nu)):
        body = _simplify(_guard_toplevel(f))
        if f.var not in free_vars(body):
            return body
        if body == Var(f.var):
            return BOT if isinstance(f, Mu) else TOP
        return type(f)(f.var, body)
    return f


def _guard_toplevel(binder) -> Formula:
    """Replace occurrences of the binder's variable that sit under neither a
    modality nor another binder: they are equivalent to false (mu) / true (nu)."""
    repl = BOT if isinstance(binder, Mu) else TOP

    def walk(g: Formula) -> Formula:
        if isinstance(g, Var) and g.name == binder.var:
            return repl
        if isinstance(g, And):
            return And(tuple(walk(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(walk(a) for a in g.args))
        return g

    return walk(binder.body)


# ---------------------------------------------------------------------------
# Metrics and structural helpers

@functools.lru_cache(maxsize=None)
def modal_depth(f: Formula) -> int:
    if isinstance(f, (Top, Bot, Lit, Var)):
        return 0
    if isinstance(f, (And, Or)):
        return max((modal_depth(a) for a in f.args), default=0)
    if isinstance(f, (Dia, Box)):
        return 1 + modal_depth(f.body)
    if isinstance(f, (Mu, Nu)):
        return modal_depth(f.body)
    raise TypeError(f"not a formula: {f!r}")


@functools.lru_cache(maxsize=None)
def sig(f: Formula) -> frozenset[str]:
    if isinstance(f, Lit):
        return frozenset({f.name})
    if isinstance(f, (And, Or)):
        out: frozenset[str] = frozenset()
        for a in f.args:
            out |= sig(a)
        return out
    if isinstance(f, (Dia, Box)):
        return sig(f.body)
    if isinstance(f, (Mu, Nu)):
        return sig(f.body)
    return frozenset()


def metrics(f: Formula) -> tuple[int, frozenset[str], int]:
    """(modal depth, signature, size under the canonical printer)."""
    return modal_depth(f), sig(f), size(f)


@functools.lru_cache(maxsize=None)
def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Var):
        return frozenset({f.name})
    if isinstance(f, (And, Or)):
        out: frozenset[str] = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, (Dia, Box)):
        return free_vars(f.body)
    if isinstance(f, (Mu, Nu)):
        return free_vars(f.body) - {f.var}
    return frozenset()


def subformulas(f: Formula) -> list[Formula]:
    out = []

    def walk(g):
        out.append(g)
        if isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, (Dia, Box)):
            walk(g.body)
        elif isinstance(g, (Mu, Nu)):
            walk(g.body)

    walk(f)
    return out


def binder_map(f: Formula) -> dict[str, Formula]:
    """Variable name -> binder node, for well-named (normalized) formulas."""
    out: dict[str, Formula] = {}
    for g in subformulas(f):
        if isinstance(g, (Mu, Nu)):
            if g.var in out:
                raise FormulaError(f"variable {g.var} bound twice; normalize first")
            out[g.var] = g
    return out


def is_ml(f: Formula) -> bool:
    """True iff f contains no fixpoint operators or variables."""
    return not any(isinstance(g, (Mu, Nu, Var)) for g in subformulas(f))


def max_grade(f: Formula) -> int:
    grades = [g.grade for g in subformulas(f) if isinstance(g, (Dia, Box))]
    return max(grades, default=0)


def uses_grades(f: Formula) -> bool:
    """True iff f uses a modality beyond plain diamond/box."""
    return any(
        (isinstance(g, Dia) and g.grade > 1) or (isinstance(g, Box) and g.grade > 0)
        for g in subformulas(f)
    )


def diamond_budget(f: Formula) -> int:
    """Upper bound on the branching needed by any satisfying tree: the sum of
    diamond grades over all diamond subformula occurrences."""
    total = sum(g.grade for g in subformulas(f) if isinstance(g, Dia))
    return max(1, total)


def flatten(f: Formula) -> Formula:
    """Collapse all grades: diamonds to grade 1, boxes to grade 0."""
    if isinstance(f, And):
        return And(tuple(flatten(a) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(flatten(a) for a in f.args))
    if isinstance(f, Dia):
        return Dia(1, flatten(f.body))
    if isinstance(f, Box):
        return Box(0, flatten(f.body))
    if isinstance(f, (Mu, Nu)):
        return type(f)(f.var, flatten(f.body))
    return f


def substitute(f: Formula, name: str, replacement: Formula) -> Formula:
    """Replace free occurrences of a fixpoint variable."""
    if isinstance(f, Var):
        return replacement if f.name == name else f
    if isinstance(f, And):
        return And(tuple(substitute(a, name, replacement) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(substitute(a, name, replacement) for a in f.args))
    if isinstance(f, (Dia, Box)):
        return type(f)(f.grade, substitute(f.body, name, replacement))
    if isinstance(f, (Mu, Nu)):
        if f.var == name:
            return f
        return type(f)(f.var, substitute(f.body, name, replacement))
    return f


def unfold_greatest(f: Formula, k: int) -> Formula:
    """Approximate greatest fixpoints by k-fold unfolding (ending in true);
    least fixpoints are left alone.  Sound on finite trees up to depth k."""
    if isinstance(f, And):
        return And(tuple(unfold_greatest(a, k) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(unfold_greatest(a, k) for a in f.args))
    if isinstance(f, (Dia, Box)):
        return type(f)(f.grade, unfold_greatest(f.body, k))
    if isinstance(f, Mu):
        return Mu(f.var, unfold_greatest(f.body, k))
    if isinstance(f, Nu):
        out: Formula = TOP
        for _ in range(k):
            out = substitute(unfold_greatest(f.body, k), f.var, out)
        return out
    return f


def unguarded_vars(f: Formula) -> frozenset[str]:
    """Variables with an occurrence not separated from their binder by a
    modality.  Empty for guarded formulas (required by the translation)."""
    bad: set[str] = set()

    def walk(g: Formula, unguarded: frozenset[str]):
        if isinstance(g, Var):
            if g.name in unguarded:
                bad.add(g.name)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a, unguarded)
        elif isinstance(g, (Dia, Box)):
            walk(g.body, frozenset())
        elif isinstance(g, (Mu, Nu)):
            walk(g.body, unguarded | {g.var})

    walk(f, frozenset())
    return frozenset(bad)


# ---------------------------------------------------------------------------
# Characteristic formulas and the nested gadget families

def characteristic_formula(tree, signature, n: int) -> Formula:
    """Modal formula of depth at most n satisfied by exactly the trees that
    are depth-n bisimilar to `tree` with respect to `signature`."""
    signature = sorted(signature)
    lits = tuple(
        Lit(p, True) if p in tree.label else Lit(p, False) for p in signature
    )
    if n == 0:
        return conj(lits)
    child_forms = sorted(
        {characteristic_formula(c, signature, n - 1) for c in tree.children},
        key=render,
    )
    parts = list(lits)
    parts.extend(Dia(1, g) for g in child_forms)
    parts.append(Box(0, disj(child_forms)))
    return conj(parts)


def _boxes(j: int, body: Formula) -> Formula:
    for _ in range(j):
        body = Box(0, body)
    return body


def gadget(i: int) -> tuple[Formula, Formula]:
    """Families of modal formula pairs that force 2^i pairwise distinguishable
    points on one side all linked to a single point on the other side by any
    sufficiently deep bisimulation over a signature containing just `a`."""
    a = Lit("a", True)
    c = Lit("c", True)
    psi, psi_p = a, a
    for k in range(i):
        b = Lit(f"b{k}", True)
        keep_b = conj(tuple(_boxes(j, b) for j in range(k)))
        keep_nb = conj(tuple(_boxes(j, Lit(f"b{k}", False)) for j in range(k)))
        psi = And(
            (
                Dia(1, And((a, b))),
                Dia(1, And((a, Lit(f"b{k}", False)))),
                Box(
                    0,
                    Or(
                        (
                            Lit("a", False),
                            conj(
                                (psi,)
                                + ((Or((Lit(f"b{k}", False), keep_b)),) if k else ())
                                + ((Or((b, keep_nb)),) if k else ())
                            ),
                        )
                    ),
                ),
            )
        )
        no_a = conj(tuple(_boxes(j, Lit("a", False)) for j in range(k)))
        psi_p = And(
            (
                Dia(1, conj((Lit("a", False),) + ((no_a,) if k else ()) + (c,))),
                Dia(1, conj((Lit("a", False),) + ((no_a,) if k else ()) + (Lit("c", False),))),
                Dia(1, And((a, psi_p))),
            )
        )
    return psi, psi_p
