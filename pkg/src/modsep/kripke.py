"""Finite pointed tree models and bisimulation machinery.

Trees are immutable values; sibling order carries no meaning.  Nodes are
addressed by their path from the root (tuple of child indices) wherever a
relation between two trees has to name nodes.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass

from .errors import ParseError

Path = tuple[int, ...]


@dataclass(frozen=True)
class KripkeTree:
    label: frozenset[str]
    children: tuple["KripkeTree", ...] = ()


def node(label=(), children=()) -> KripkeTree:
    return KripkeTree(frozenset(label), tuple(children))


@functools.lru_cache(maxsize=None)
def depth(t: KripkeTree) -> int:
    return 1 + max((depth(c) for c in t.children), default=-1)


def tree_size(t: KripkeTree) -> int:
    return 1 + sum(tree_size(c) for c in t.children)


def outdegree(t: KripkeTree) -> int:
    """Maximal number of children of any node."""
    return max((len(t.children), *(outdegree(c) for c in t.children)), default=0)


def prefix(t: KripkeTree, n: int) -> KripkeTree:
    """Subtree induced by the nodes at depth at most n."""
    if n <= 0:
        return KripkeTree(t.label, ())
    return KripkeTree(t.label, tuple(prefix(c, n - 1) for c in t.children))


def reduct(t: KripkeTree, signature) -> KripkeTree:
    signature = frozenset(signature)
    return KripkeTree(t.label & signature, tuple(reduct(c, signature) for c in t.children))


def full_dary_completion(t: KripkeTree, d: int) -> KripkeTree:
    """Duplicate a child subtree until every non-leaf node has exactly d
    children.  Leaves stay leaves; requires outdegree(t) <= d."""
    if not t.children:
        return t
    if len(t.children) > d:
        raise ValueError(f"tree has outdegree {len(t.children)} > {d}")
    kids = [full_dary_completion(c, d) for c in t.children]
    while len(kids) < d:
        kids.append(kids[-1])
    return KripkeTree(t.label, tuple(kids))


def node_at(t: KripkeTree, path: Path) -> KripkeTree:
    for i in path:
        t = t.children[i]
    return t


def paths_by_depth(t: KripkeTree, n: int) -> list[list[Path]]:
    """Paths of all nodes of the n-prefix, grouped by depth 0..n."""
    levels: list[list[Path]] = [[()]]
    for k in range(n):
        nxt: list[Path] = []
        for p in levels[k]:
            for i in range(len(node_at(t, p).children)):
                nxt.append(p + (i,))
        levels.append(nxt)
    return levels


# ---------------------------------------------------------------------------
# Text format: (node {a b} (node {} ...) ...)

def render_tree(t: KripkeTree) -> str:
    label = "{" + " ".join(sorted(t.label)) + "}"
    parts = ["(node", label]
    parts.extend(render_tree(c) for c in t.children)
    return " ".join(parts) + ")"


_TREE_TOKEN = re.compile(r"\s*(\(|\)|\{|\}|[A-Za-z_][A-Za-z0-9_]*)")


def parse_tree(text: str) -> KripkeTree:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TREE_TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            break
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    idx = [0]

    def peek():
        return tokens[idx[0]] if idx[0] < len(tokens) else ("", len(text))

    def take(expected=None):
        tok, p = peek()
        if not tok:
            raise ParseError("unexpected end of input", p)
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, found {tok!r}", p)
        idx[0] += 1
        return tok, p

    def parse_node() -> KripkeTree:
        take("(")
        take("node")
        take("{")
        label = set()
        while True:
            tok, p = take()
            if tok == "}":
                break
            if not (tok[0].isalpha() or tok[0] == "_"):
                raise ParseError(f"expected a proposition name, found {tok!r}", p)
            label.add(tok)
        kids = []
        while peek()[0] == "(":
            kids.append(parse_node())
        take(")")
        return KripkeTree(frozenset(label), tuple(kids))

    tree = parse_node()
    tok, p = peek()
    if tok:
        raise ParseError(f"trailing input {tok!r}", p)
    return tree


# ---------------------------------------------------------------------------
# Canonical keys, isomorphism, quotient

def canonical_key(t: KripkeTree, signature=None, n: int | None = None):
    """Canonical encoding: label plus sorted multiset of child keys.
    Two trees have equal keys iff their (signature-reduct, n-prefix)s are
    isomorphic as unordered labelled trees."""
    label = t.label if signature is None else t.label & frozenset(signature)
    if n == 0:
        return (tuple(sorted(label)),)
    m = None if n is None else n - 1
    kids = sorted(canonical_key(c, signature, m) for c in t.children)
    return (tuple(sorted(label)), tuple(kids))


def check_iso(a: KripkeTree, b: KripkeTree, signature, n: int) -> bool:
    """Depth-n isomorphism of the signature-reducts."""
    return canonical_key(a, signature, n) == canonical_key(b, signature, n)


@dataclass(frozen=True)
class LevelRelation:
    """Equal-depth node relation between two trees, grouped by depth."""

    levels: tuple[frozenset[tuple[Path, Path]], ...]

    def pairs(self):
        for level in self.levels:
            yield from sorted(level)

    def contains(self, a: Path, b: Path) -> bool:
        d = len(a)
        return d < len(self.levels) and (a, b) in self.levels[d]


def check_bisim(a: KripkeTree, b: KripkeTree, signature, n: int) -> LevelRelation | None:
    """Maximal depth-n bisimulation over `signature` linking the roots, or
    None.  Computed bottom-up: labels must agree on the signature at depths
    <= n, forth/back conditions hold at depths < n."""
    signature = frozenset(signature)
    la = paths_by_depth(a, n)
    lb = paths_by_depth(b, n)
    levels: list[frozenset[tuple[Path, Path]]] = [frozenset()] * (n + 1)
    prev: set[tuple[Path, Path]] = set()
    for k in range(n, -1, -1):
        cur: set[tuple[Path, Path]] = set()
        for pa in la[k]:
            na = node_at(a, pa)
            for pb in lb[k]:
                nb = node_at(b, pb)
                if (na.label & signature) != (nb.label & signature):
                    continue
                if k < n:
                    ok = all(
                        any((pa + (i,), pb + (j,)) in prev for j in range(len(nb.children)))
                        for i in range(len(na.children))
                    ) and all(
                        any((pa + (i,), pb + (j,)) in prev for i in range(len(na.children)))
                        for j in range(len(nb.children))
                    )
                    if not ok:
                        continue
                cur.add((pa, pb))
        levels[k] = frozenset(cur)
        prev = cur
    if ((), ()) not in levels[0]:
        return None
    return LevelRelation(tuple(levels))


def _hall_ok(sides: list[list[int]], g: int) -> bool:
    """Every set of at most g left nodes has a neighbourhood at least as big."""
    k = len(sides)
    for r in range(1, min(g, k) + 1):
        for combo in itertools.combinations(range(k), r):
            nb = set()
            for i in combo:
                nb.update(sides[i])
            if len(nb) < r:
                return False
    return True


def check_graded_bisim(a: KripkeTree, b: KripkeTree, signature, n: int, g: int) -> bool:
    """Existence of a g-graded depth-n bisimulation over `signature` linking
    the roots: forth/back must match any up-to-g pairwise distinct children
    injectively (a Hall-type condition on the candidate relation)."""
    signature = frozenset(signature)
    la = paths_by_depth(a, n)
    lb = paths_by_depth(b, n)
    prev: set[tuple[Path, Path]] = set()
    cur: set[tuple[Path, Path]] = set()
    for k in range(n, -1, -1):
        cur = set()
        for pa in la[k]:
            na = node_at(a, pa)
            for pb in lb[k]:
                nb = node_at(b, pb)
                if (na.label & signature) != (nb.label & signature):
                    continue
                if k < n:
                    left = [
                        [j for j in range(len(nb.children)) if (pa + (i,), pb + (j,)) in prev]
                        for i in range(len(na.children))
                    ]
                    right = [
                        [i for i in range(len(na.children)) if (pa + (i,), pb + (j,)) in prev]
                        for j in range(len(nb.children))
                    ]
                    if not (_hall_ok(left, g) and _hall_ok(right, g)):
                        continue
                cur.add((pa, pb))
        prev = cur
    return ((), ()) in prev


def quotient(t: KripkeTree) -> KripkeTree:
    """Bisimilarity quotient of a finite tree: recursively merge bisimilar
    sibling subtrees.  Idempotent; the result is bisimilar to the input and
    has no two bisimilar siblings."""
    kids = sorted({quotient(c) for c in t.children}, key=canonical_key)
    return KripkeTree(t.label, tuple(kids))


# ---------------------------------------------------------------------------
# Enumeration

def _all_trees_upto(signature: tuple[str, ...], d: int, dep: int) -> list[KripkeTree]:
    labels = [
        frozenset(c)
        for r in range(len(signature) + 1)
        for c in itertools.combinations(signature, r)
    ]
    if dep <= 0:
        return [KripkeTree(lab, ()) for lab in labels]
    smaller = _all_trees_upto(signature, d, dep - 1)
    out = []
    for lab in labels:
        for k in range(d + 1):
            for kids in itertools.combinations_with_replacement(smaller, k):
                out.append(KripkeTree(lab, kids))
    return out


def enumerate_trees(signature, d: int, max_depth: int, limit: int | None = None):
    """Deterministic stream of all trees with outdegree <= d, depth <=
    max_depth and valuations inside `signature`, without isomorphic
    duplicates, shallow trees first.  Truncated after `limit` trees."""
    signature = tuple(sorted(signature))
    count = 0
    emitted: set = set()
    by_depth: list[list[KripkeTree]] = []
    for dep in range(max_depth + 1):
        if dep == 0:
            stratum = _all_trees_upto(signature, d, 0)
        else:
            smaller = [t for level in by_depth for t in level]
            smaller.sort(key=canonical_key)
            stratum = []
            labels = [
                frozenset(c)
                for r in range(len(signature) + 1)
                for c in itertools.combinations(signature, r)
            ]
            for lab in labels:
                for k in range(1, d + 1):
                    for kids in itertools.combinations_with_replacement(smaller, k):
                        if max(depth(c) for c in kids) == dep - 1:
                            stratum.append(KripkeTree(lab, kids))
        level_out = []
        for t in stratum:
            key = canonical_key(t)
            if key in emitted:
                continue
            emitted.add(key)
            level_out.append(t)
            yield t
            count += 1
            if limit is not None and count >= limit:
                return
        by_depth.append(level_out)
