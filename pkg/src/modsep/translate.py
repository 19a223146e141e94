"""Compilation of (graded) mu-calculus formulas into nondeterministic parity
tree automata equivalent over d-ary trees (tuple mode) or all trees (set
mode).

The construction guesses, per node, how the pending obligations decompose
into literals and modal atoms and how the atoms are distributed over the
children; the per-thread fixpoint requirements are checked by an acceptance
monitor.  Supported alternation shapes, chosen by analysing which binders can
regenerate through which:

* no mu binders                -> safety automaton (all priorities 0);
* no nu binders                -> every infinite thread rejects;
* no nu regenerating around mu -> rank-based co-Buchi monitor;
* no mu regenerating around nu -> breakpoint Buchi monitor;
* both                         -> UnsupportedAlternationError (the general
                                  dealternation stage is not implemented).

Formulas must be guarded: each fixpoint variable only occurs under a
modality inside its binder.
"""

from __future__ import annotations

import itertools
from collections import Counter

from . import formula as F
from . import monitor as MON
from .automata import Npta, _TRANSITION_BUDGET
from .errors import (
    BudgetExhaustedError,
    FormulaError,
    UnsupportedAlternationError,
    UnsupportedClassError,
)


def _alternation_mode(phi: F.Formula) -> str:
    binders = [g for g in F.subformulas(phi) if isinstance(g, (F.Mu, F.Nu))]
    has_mu = any(isinstance(b, F.Mu) for b in binders)
    has_nu = any(isinstance(b, F.Nu) for b in binders)
    if not has_mu:
        return "safety"
    if not has_nu:
        return "finish"

    def regenerates_around(outer, inner_kind) -> bool:
        # an inner binder of the other kind whose body mentions the outer
        # variable: a single thread can then cycle through both priorities
        for g in F.subformulas(outer.body):
            if isinstance(g, inner_kind) and F.Var(outer.var) in F.subformulas(g.body):
                return True
        return False

    bad_cobuchi = any(
        isinstance(b, F.Nu) and regenerates_around(b, F.Mu) for b in binders
    )
    if not bad_cobuchi:
        return "cobuchi"
    bad_buchi = any(
        isinstance(b, F.Mu) and regenerates_around(b, F.Nu) for b in binders
    )
    if not bad_buchi:
        return "buchi"
    raise UnsupportedAlternationError(
        "formula needs full parity dealternation, which is beyond the "
        "implemented Buchi/co-Buchi stage"
    )


def _merge_mark(m1: bool, m2: bool, mark_is_bad: bool) -> bool:
    # pessimistic merge of parallel thread segments reaching the same atom
    return (m1 or m2) if mark_is_bad else (m1 and m2)


def _better(o1: dict, o2: dict, mark_is_bad: bool) -> bool:
    """o1 at least as easy to accept as o2: fewer obligations, and per shared
    atom a mark that is at least as favourable."""
    if not set(o1) <= set(o2):
        return False
    for atom, m1 in o1.items():
        m2 = o2[atom]
        ok = (not m1 or m2) if mark_is_bad else (m1 or not m2)
        if not ok:
            return False
    return True


def _prune(outcomes: list[dict], mark_is_bad: bool) -> list[dict]:
    uniq: list[dict] = []
    for o in outcomes:
        if o not in uniq:
            uniq.append(o)
    keep = []
    for o in uniq:
        if any(p is not o and _better(p, o, mark_is_bad) and p != o for p in uniq):
            continue
        keep.append(o)
    return keep


class _Compiler:
    def __init__(self, phi: F.Formula, d: int | None):
        self.phi = F.normalize(phi)
        bad = F.unguarded_vars(self.phi)
        if bad:
            raise FormulaError(
                f"unguarded fixpoint variables {sorted(bad)}; the translation "
                "requires guarded formulas"
            )
        self.d = d
        if d is None and F.uses_grades(self.phi):
            raise UnsupportedClassError(
                "graded modalities require a bounded-arity class"
            )
        if d is not None and d < 1:
            raise UnsupportedClassError("arity must be at least 1")
        self.binders = F.binder_map(self.phi)
        self.mode = _alternation_mode(self.phi)
        self.mark_is_bad = self.mode != "buchi"
        closure = {g for g in F.subformulas(self.phi)}
        self.monitor = MON.make_monitor(self.mode, max(1, len(closure)))
        self.sig = tuple(sorted(F.sig(self.phi)))
        self.alphabet = [
            frozenset(c)
            for r in range(len(self.sig) + 1)
            for c in itertools.combinations(self.sig, r)
        ]
        self._memo: dict = {}

    # -- local expansion ---------------------------------------------------

    def expand(self, psi: F.Formula, letter: frozenset) -> list[dict]:
        key = (psi, letter)
        if key not in self._memo:
            self._memo[key] = self._expand(psi, letter)
        return self._memo[key]

    def _expand(self, psi: F.Formula, letter: frozenset) -> list[dict]:
        if isinstance(psi, F.Top):
            return [{}]
        if isinstance(psi, F.Bot):
            return []
        if isinstance(psi, F.Lit):
            holds = (psi.name in letter) == psi.positive
            return [{}] if holds else []
        if isinstance(psi, (F.Dia, F.Box)):
            return [{psi: False}]
        if isinstance(psi, F.Or):
            out: list[dict] = []
            for a in psi.args:
                out.extend(self.expand(a, letter))
            return _prune(out, self.mark_is_bad)
        if isinstance(psi, F.And):
            outs = [[{}]]
            for a in psi.args:
                sub = self.expand(a, letter)
                merged = []
                for o1 in outs[-1]:
                    for o2 in sub:
                        m = dict(o1)
                        for atom, mk in o2.items():
                            if atom in m:
                                m[atom] = _merge_mark(m[atom], mk, self.mark_is_bad)
                            else:
                                m[atom] = mk
                        merged.append(m)
                outs.append(_prune(merged, self.mark_is_bad))
            return outs[-1]
        if isinstance(psi, (F.Mu, F.Nu)):
            return self.expand(psi.body, letter)
        if isinstance(psi, F.Var):
            binder = self.binders[psi.name]
            crossing = isinstance(binder, F.Mu) == self.mark_is_bad
            sub = self.expand(binder.body, letter)
            if not crossing:
                return sub
            return _prune(
                [{a: True for a in o} for o in sub], self.mark_is_bad
            )
        raise TypeError(f"not a formula: {psi!r}")

    # -- transition generation ---------------------------------------------

    def _distributions(self, dias: list, boxes: list):
        """Count vectors over child profiles (routed diamonds, excepted
        boxes); each diamond is routed to exactly its grade many children,
        each box excepted at most its grade many times, total <= arity."""
        d = self.d
        exceptable = [b for b in boxes if b.grade >= 1]
        profiles = []
        for r in range(len(dias) + 1):
            for rc in itertools.combinations(range(len(dias)), r):
                for x in range(len(exceptable) + 1):
                    for xc in itertools.combinations(range(len(exceptable)), x):
                        profiles.append((frozenset(rc), frozenset(xc)))
        profiles.sort(key=lambda p: (sorted(p[0]), sorted(p[1])))
        need = [dias[i].grade for i in range(len(dias))]
        allow = [exceptable[l].grade for l in range(len(exceptable))]
        out: list[dict] = []

        def rec(idx: int, total: int, need_left: list, allow_left: list, acc: dict):
            if len(out) > _TRANSITION_BUDGET:
                raise BudgetExhaustedError("transition enumeration exceeded budget")
            if idx == len(profiles):
                if all(n == 0 for n in need_left):
                    out.append(dict(acc))
                return
            rset, xset = profiles[idx]
            cap = d - total
            for i in rset:
                cap = min(cap, need_left[i])
            for l in xset:
                cap = min(cap, allow_left[l])
            if not rset and not xset:
                cap = d - total
            for c in range(cap, -1, -1):
                if c:
                    for i in rset:
                        need_left[i] -= c
                    for l in xset:
                        allow_left[l] -= c
                    acc[(rset, xset)] = c
                rec(idx + 1, total + c, need_left, allow_left, acc)
                if c:
                    for i in rset:
                        need_left[i] += c
                    for l in xset:
                        allow_left[l] += c
                    del acc[(rset, xset)]

        rec(0, 0, need, allow, {})
        return out

    def _child_obligations(self, dias, boxes, exceptable, rset, xset):
        slots = set()
        for i in rset:
            slots.add(dias[i].body)
        for l, b in enumerate(boxes):
            if b in exceptable and exceptable.index(b) in xset:
                continue
            slots.add(b.body)
        slots.discard(F.TOP)
        return frozenset(slots)

    def _edges_for(self, dias, boxes, exceptable, rset, xset, sources):
        edges: dict = {}
        contributing = [dias[i] for i in rset]
        contributing += [
            b
            for b in boxes
            if not (b in exceptable and exceptable.index(b) in xset)
        ]
        for atom in contributing:
            target = atom.body
            if target == F.TOP:
                continue
            per_src: dict = {}
            for src, mk in sources[atom]:
                if src in per_src:
                    per_src[src] = _merge_mark(per_src[src], mk, self.mark_is_bad)
                else:
                    per_src[src] = mk
            bucket = edges.setdefault(target, {})
            for src, mk in per_src.items():
                if src in bucket:
                    bucket[src] = _merge_mark(bucket[src], mk, self.mark_is_bad)
                else:
                    bucket[src] = mk
        return {
            t: [(s, m) for s, m in sorted(per.items(), key=lambda kv: F.render(kv[0]))]
            for t, per in edges.items()
        }

    # -- main loop ----------------------------------------------------------

    def build(self) -> Npta:
        init_phi = frozenset({self.phi})
        init = (init_phi, self.monitor.initial(init_phi))
        names = {init: "q0"}
        order = [init]
        todo = [init]
        trans: dict = {}
        while todo:
            macro = todo.pop(0)
            phi_set, mem = macro
            name = names[macro]
            for letter in self.alphabet:
                results = self._transitions_from(phi_set, mem, letter, names, order, todo)
                if results:
                    trans[(name, letter)] = frozenset(results)
        states = tuple(names[s] for s in order)
        prio = {names[s]: self.monitor.priority(s[1]) for s in order}
        mode = "set" if self.d is None else "tuple"
        return Npta(states, "q0", self.sig, prio, trans, mode, self.d)

    def _register(self, kid, names, order, todo) -> str:
        if kid not in names:
            names[kid] = f"q{len(names)}"
            order.append(kid)
            todo.append(kid)
        return names[kid]

    def _transitions_from(self, phi_set, mem, letter, names, order, todo):
        sources_order = sorted(phi_set, key=F.render)
        per_slot = []
        for psi in sources_order:
            outs = self.expand(psi, letter)
            if not outs:
                return set()
            per_slot.append(outs)
        results = set()
        for combo in itertools.product(*per_slot):
            sources: dict = {}
            for psi, o in zip(sources_order, combo):
                for atom, mk in o.items():
                    sources.setdefault(atom, []).append((psi, mk))
            atoms = sorted(sources, key=F.render)
            dias = [a for a in atoms if isinstance(a, F.Dia)]
            boxes = [a for a in atoms if isinstance(a, F.Box)]
            if self.d is None:
                results |= self._set_transitions(dias, boxes, sources, mem, names, order, todo)
            else:
                results |= self._tuple_transitions(dias, boxes, sources, mem, names, order, todo)
            if len(results) > _TRANSITION_BUDGET:
                raise BudgetExhaustedError("transition enumeration exceeded budget")
        return results

    def _tuple_transitions(self, dias, boxes, sources, mem, names, order, todo):
        exceptable = [b for b in boxes if b.grade >= 1]
        results = set()
        for dist in self._distributions(dias, boxes):
            groups = []
            ok = True
            for (rset, xset), count in sorted(
                dist.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))
            ):
                slots = self._child_obligations(dias, boxes, exceptable, rset, xset)
                if F.BOT in slots:
                    pass  # dead child state; the automaton simply has no run there
                edges = self._edges_for(dias, boxes, exceptable, rset, xset, sources)
                mems = self.monitor.child_mems(mem, slots, edges)
                if not mems:
                    ok = False
                    break
                groups.append((slots, tuple(mems), count))
            if not ok:
                continue
            for pick in itertools.product(
                *[
                    itertools.combinations_with_replacement(mems, count)
                    for _, mems, count in groups
                ]
            ):
                kids = []
                for (slots, _, _), chosen in zip(groups, pick):
                    for m2 in chosen:
                        kids.append(self._register((slots, m2), names, order, todo))
                results.add(tuple(sorted(kids)))
        return results

    def _set_transitions(self, dias, boxes, sources, mem, names, order, todo):
        box_bodies = frozenset(b.body for b in boxes) - {F.TOP}
        n = len(dias)
        profiles = [
            frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(n), r)
        ]
        results = set()
        for choice in itertools.product([False, True], repeat=len(profiles)):
            chosen = [p for p, used in zip(profiles, choice) if used]
            covered = set().union(*chosen) if chosen else set()
            if covered != set(range(n)):
                continue
            kids = []
            ok = True
            for rset in chosen:
                slots = frozenset(dias[i].body for i in rset) | box_bodies
                slots -= {F.TOP}
                edges = self._edges_for(dias, boxes, [], rset, frozenset(), sources)
                mems = self.monitor.child_mems(mem, slots, edges)
                if not mems:
                    ok = False
                    break
                kids.append([(slots, m2) for m2 in mems])
            if not ok:
                continue
            if not chosen:
                results.add(frozenset())
                continue
            for pick in itertools.product(*kids):
                ids = frozenset(
                    self._register(kid, names, order, todo) for kid in pick
                )
                results.add(ids)
        return results


def muml_to_npta(phi: F.Formula, d: int | None) -> Npta:
    """Automaton equivalent to phi over d-ary trees (or over all trees for
    d=None, producing set-mode transitions).

    Top-level conjunctions whose conjuncts avoid the rank-based monitor are
    compiled separately and intersected, which keeps the common case of
    independent fixpoint chains (for example a formula conjoined with a
    well-foundedness constraint) out of the expensive rank construction."""
    norm = F.normalize(phi)
    if d is not None and isinstance(norm, F.And):
        try:
            whole_mode = _alternation_mode(norm)
        except UnsupportedAlternationError:
            whole_mode = "unsupported"
        if whole_mode in ("cobuchi", "unsupported"):
            parts = [norm.args[0]]
            for arg in norm.args[1:]:
                merged = F.normalize(F.And((parts[-1], arg)))
                try:
                    if _alternation_mode(merged) != "cobuchi":
                        parts[-1] = merged
                        continue
                except UnsupportedAlternationError:
                    pass
                parts.append(arg)
            if len(parts) > 1:
                from .automata import product

                auto = muml_to_npta(parts[0], d)
                for part in parts[1:]:
                    auto = product(auto, muml_to_npta(part, d))
                return auto
    return _Compiler(norm, d).build()
