"""Acceptance monitors for nondeterminized thread systems.

A macro-run assigns each tree node a set of slots (pending obligations);
transitions connect parent slots to child slots through edges, some of which
carry a mark.  The monitors below turn per-thread parity requirements into a
Buchi condition on macro-states (priority 2 on breakpoint states, 1
otherwise):

* safety    -- every thread is fine; no bookkeeping.
* finish    -- every thread must die (all infinite threads are rejecting).
* buchi     -- every infinite thread must cross marked (good) edges
               infinitely often; Miyano-Hayashi breakpoints.
* cobuchi   -- every infinite thread must cross marked (bad) edges finitely
               often; rank functions with breakpoints (Kupferman-Vardi).

`edges` maps a child slot to the list of (parent slot, marked) pairs feeding
it; merging of parallel thread segments is pessimistic and must be done by
the caller.
"""

from __future__ import annotations

import itertools

from .errors import BudgetExhaustedError

_RANK_BUDGET = 200_000


class SafetyMonitor:
    needs_marks = False

    def initial(self, slots):
        return None

    def priority(self, mem) -> int:
        return 0

    def child_mems(self, mem, slots, edges):
        return (None,)


class FinishMonitor:
    """All threads must terminate."""

    needs_marks = False

    def initial(self, slots):
        return frozenset()

    def priority(self, mem) -> int:
        return 2 if not mem else 1

    def child_mems(self, mem, slots, edges):
        if not mem:
            return (frozenset(slots),)
        owing = frozenset(
            t for t in slots if any(src in mem for src, _ in edges[t])
        )
        return (owing,)


class BuchiMonitor:
    """Every infinite thread crosses marked edges infinitely often."""

    needs_marks = True

    def initial(self, slots):
        return frozenset()

    def priority(self, mem) -> int:
        return 2 if not mem else 1

    def child_mems(self, mem, slots, edges):
        def still_owing(t, restrict) -> bool:
            return any(
                (restrict is None or src in restrict) and not marked
                for src, marked in edges[t]
            )

        if not mem:
            owing = frozenset(t for t in slots if still_owing(t, None))
        else:
            owing = frozenset(t for t in slots if still_owing(t, mem))
        return (owing,)


class CoBuchiRankMonitor:
    """Every infinite thread crosses marked edges finitely often.

    Memory is (ranks, owing): guessed non-increasing ranks per slot, where a
    slot entered over a marked edge must have an even rank; breakpoints fire
    when every even-ranked thread of the current cohort has dropped to an odd
    rank or died."""

    needs_marks = True

    def __init__(self, max_rank: int):
        self.max_rank = max_rank

    def initial(self, slots):
        ranks = tuple(sorted(((s, self.max_rank) for s in slots), key=lambda kv: repr(kv[0])))
        return (ranks, frozenset())

    def priority(self, mem) -> int:
        return 2 if not mem[1] else 1

    def child_mems(self, mem, slots, edges):
        ranks = dict(mem[0])
        owing = mem[1]
        slot_list = sorted(slots, key=repr)
        choices = []
        for t in slot_list:
            cap = min(ranks[src] for src, _ in edges[t])
            tainted = any(marked for _, marked in edges[t])
            allowed = [
                v for v in range(cap, -1, -1) if not (tainted and v % 2 == 1)
            ]
            if not allowed:
                return ()
            choices.append(allowed)
        total = 1
        for c in choices:
            total *= len(c)
            if total > _RANK_BUDGET:
                raise BudgetExhaustedError(
                    "rank guessing exceeded the enumeration budget"
                )
        out = []
        for combo in itertools.product(*choices):
            new_ranks = tuple(zip(slot_list, combo))
            even = {t for t, v in zip(slot_list, combo) if v % 2 == 0}
            if not owing:
                new_owing = frozenset(even)
            else:
                new_owing = frozenset(
                    t
                    for t in even
                    if any(src in owing for src, _ in edges[t])
                )
            out.append((new_ranks, new_owing))
        return tuple(out)


def classify_priorities(priorities) -> str:
    """Monitor mode able to check `all threads satisfy max-parity` for
    threads labelled by these state priorities."""
    values = set(priorities)
    evens = any(v % 2 == 0 for v in values)
    odds = any(v % 2 == 1 for v in values)
    if not odds:
        return "safety"
    if not evens:
        return "finish"
    if max(values) - min(values) > 1:
        raise ValueError(f"priority range {sorted(values)} not supported")
    return "buchi" if min(values) % 2 == 1 else "cobuchi"


def make_monitor(mode: str, slot_bound: int):
    if mode == "safety":
        return SafetyMonitor()
    if mode == "finish":
        return FinishMonitor()
    if mode == "buchi":
        return BuchiMonitor()
    if mode == "cobuchi":
        return CoBuchiRankMonitor(2 * slot_bound)
    raise ValueError(f"unknown monitor mode {mode!r}")
