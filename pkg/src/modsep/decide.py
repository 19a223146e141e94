"""Top-level decision procedures: definability, separability, interpolant
existence, graded variants, and the finite-tree reduction."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formula as F
from . import kripke as K
from . import oracle
from .automata import (
    ConsistencyResult,
    consistency_for_all_n,
    duplication_safe_closure,
    project_letters,
    qpl_consistency_for_all_n,
)
from .construct import (
    ml_craig_interpolant,
    separator_td,
    uniform_consequence,
    uniform_consequence_words,
    verify_separator,
)
from .errors import BudgetExhaustedError, ModsepError, UnsupportedClassError
from .games import model_check
from .translate import muml_to_npta

_WITNESS_DEPTH_CAP = 2
_PAIR_BUDGET = 60_000


@dataclass(frozen=True)
class ModelClass:
    """All models, words (outdegree 1), binary trees, d-ary trees for d >= 3,
    or the finite-tree restriction of one of those."""

    kind: str
    d: int | None = None
    inner: "ModelClass | None" = None

    def __post_init__(self):
        if self.kind not in ("all", "words", "binary", "dary", "finite"):
            raise UnsupportedClassError(f"unknown model class {self.kind!r}")
        if self.kind == "dary":
            if self.d is None or self.d < 1:
                raise UnsupportedClassError("dary classes need an outdegree")
            if self.d == 1:
                object.__setattr__(self, "kind", "words")
                object.__setattr__(self, "d", None)
            elif self.d == 2:
                object.__setattr__(self, "kind", "binary")
                object.__setattr__(self, "d", None)
        if self.kind == "finite" and self.inner is None:
            raise UnsupportedClassError("finite classes wrap another class")

    def __str__(self) -> str:
        if self.kind == "dary":
            return f"dary:{self.d}"
        if self.kind == "finite":
            return f"finite:{self.inner}"
        return self.kind


ALL = ModelClass("all")
WORDS = ModelClass("words")
BINARY = ModelClass("binary")


def dary(d: int) -> ModelClass:
    return ModelClass("dary", d=d)


def finite_trees(inner: ModelClass) -> ModelClass:
    return ModelClass("finite", inner=inner)


def parse_class(text: str) -> ModelClass:
    text = text.strip()
    if text == "all":
        return ALL
    if text == "words":
        return WORDS
    if text == "binary":
        return BINARY
    if text.startswith("dary:"):
        return dary(int(text.split(":", 1)[1]))
    if text.startswith("finite:"):
        return finite_trees(parse_class(text.split(":", 1)[1]))
    raise UnsupportedClassError(f"unknown model class {text!r}")


@dataclass
class Verdict:
    """Decision outcome with optional certificates.

    A present separator has been verified; present evidence is a depth-n
    bisimilar pair of prefix witnesses confirmed by check_bisim."""

    decision: bool
    question: str
    separator: F.Formula | None = None
    evidence: tuple | None = None  # (n, left tree, right tree)
    trace: dict = field(default_factory=dict)


FINITE_CONSTRAINT = F.Mu("WF", F.Box(0, F.Var("WF")))


def reduce_finite_trees(phi: F.Formula, phi2: F.Formula):
    """Conjoin well-foundedness: separability over finite trees of the inputs
    equals separability (same class without the finiteness restriction) of
    the outputs."""
    return (
        F.normalize(F.And((phi, FINITE_CONSTRAINT))),
        F.normalize(F.And((phi2, FINITE_CONSTRAINT))),
    )


def _reject_graded(*formulas):
    for f in formulas:
        if F.uses_grades(F.normalize(f)):
            raise UnsupportedClassError(
                "graded modalities are only handled by the graded procedures"
            )


def _consistency_pipeline(phi, phi2, cls: ModelClass, sigma):
    """Translate both formulas for the class and run the joint-consistency
    check; returns the result, trace bookkeeping, both automata and the
    arity."""
    phi_n, phi2_n = F.normalize(phi), F.normalize(phi2)
    if cls.kind == "words":
        d = 1
        a = muml_to_npta(phi_n, 1)
        b = muml_to_npta(phi2_n, 1)
    elif cls.kind == "binary":
        d = 2
        a = duplication_safe_closure(muml_to_npta(phi_n, 2))
        b = duplication_safe_closure(muml_to_npta(phi2_n, 2))
    elif cls.kind == "all":
        d = max(1, F.size(phi_n) + F.size(phi2_n))
        a = muml_to_npta(phi_n, d)
        b = muml_to_npta(phi2_n, d)
    elif cls.kind == "dary":
        d = cls.d
        res = qpl_consistency_for_all_n(
            muml_to_npta(phi_n, d), muml_to_npta(phi2_n, d), sigma, d
        )
        trace = {
            "class": str(cls),
            "d": d,
            "m": res.m_bound,
            "first_failure": res.first_failure,
            "stabilized_by": res.stabilized_by,
        }
        return res, trace, None, None, d
    else:
        raise UnsupportedClassError(f"no separability pipeline for {cls}")
    res = consistency_for_all_n(a, b, sigma, d)
    trace = {
        "class": str(cls),
        "d": d,
        "m": res.m_bound,
        "sizes": (a.size(), b.size()),
        "first_failure": res.first_failure,
        "stabilized_by": res.stabilized_by,
    }
    return res, trace, a, b, d


def _build_separator(phi, phi2, cls: ModelClass, sigma, n: int, a, d: int):
    from .construct import simplify

    if cls.kind == "words":
        return simplify(uniform_consequence_words(project_letters(a, sigma), n))
    if cls.kind == "binary":
        proj = duplication_safe_closure(project_letters(a, sigma))
        return simplify(uniform_consequence(proj, n, "binary"))
    if cls.kind == "all":
        return simplify(uniform_consequence(project_letters(a, sigma), n, "all"))
    if cls.kind == "dary":
        return separator_td(phi, phi2, d, sigma, n)
    return None


def _witness_pair(phi, phi2, sigma, d: int, m: int):
    n = min(m, _WITNESS_DEPTH_CAP)
    res = oracle.joint_consistency_bruteforce(
        phi, phi2, sigma, n, min(d, 3), budget=_PAIR_BUDGET
    )
    if res.status == "found":
        return (n, res.witness[0], res.witness[1])
    return None


def decide_separability(
    phi: F.Formula,
    phi2: F.Formula,
    cls: ModelClass,
    sigma=None,
    want_separator: bool = True,
    want_witness: bool = True,
) -> Verdict:
    """Existence of a modal separator over the class, optionally restricted
    to the signature sigma (default: all propositions of the inputs)."""
    _reject_graded(phi, phi2)
    if cls.kind == "finite":
        left, right = reduce_finite_trees(phi, phi2)
        verdict = decide_separability(
            left, right, cls.inner, sigma=sigma, want_separator=want_separator,
            want_witness=want_witness,
        )
        verdict.trace["reduced_from"] = str(cls)
        verdict.question = "separability"
        return verdict
    phi_n, phi2_n = F.normalize(phi), F.normalize(phi2)
    if sigma is None:
        sigma = tuple(sorted(F.sig(phi_n) | F.sig(phi2_n)))
    else:
        sigma = tuple(sorted(sigma))
    res, trace, a, b, d = _consistency_pipeline(phi_n, phi2_n, cls, sigma)
    separable = not res.consistent_for_all_n
    verdict = Verdict(separable, "separability", trace=trace)
    verdict.trace["sigma"] = sigma
    if separable and want_separator:
        n = res.first_failure
        psi = _build_separator(phi_n, phi2_n, cls, sigma, n, a, d)
        if psi is not None and verify_separator(phi_n, phi2_n, psi, cls):
            verdict.separator = psi
            verdict.trace["separator_depth"] = n
        else:
            raise ModsepError("constructed separator failed verification")
    if not separable and want_witness:
        verdict.evidence = _witness_pair(phi_n, phi2_n, sigma, d, res.m_bound)
        if verdict.evidence is not None:
            n, left, right = verdict.evidence
            if K.check_bisim(left, right, sigma, n) is None:
                raise ModsepError("witness pair failed the bisimulation check")
    return verdict


def decide_definability(phi: F.Formula, cls: ModelClass, **kw) -> Verdict:
    """Existence of a modal formula equivalent to phi over the class."""
    _reject_graded(phi)
    phi_n = F.normalize(phi)
    verdict = decide_separability(
        phi_n, F.normalize(F.neg(phi_n)), cls, sigma=tuple(sorted(F.sig(phi_n))), **kw
    )
    verdict.question = "definability"
    return verdict


def decide_craig_separability(phi: F.Formula, phi2: F.Formula, cls: ModelClass) -> Verdict:
    """Existence of a separator over the common signature; over all models,
    words and binary trees this coincides with plain separability, and the
    constructed separator is rebuilt over the common signature."""
    if cls.kind not in ("all", "words", "binary"):
        raise UnsupportedClassError(
            "Craig separability coincides with separability only over all "
            "models, words and binary trees; use decide_separability with an "
            "explicit signature for other classes"
        )
    phi_n, phi2_n = F.normalize(phi), F.normalize(phi2)
    common = tuple(sorted(F.sig(phi_n) & F.sig(phi2_n)))
    verdict = decide_separability(phi_n, phi2_n, cls, want_separator=True)
    verdict.question = "craig-separability"
    verdict.trace["common_sigma"] = common
    if verdict.decision and not (
        verdict.separator is not None
        and F.sig(verdict.separator) <= frozenset(common)
    ):
        res, _, _, _, _ = _consistency_pipeline(phi_n, phi2_n, cls, common)
        if res.consistent_for_all_n:
            raise ModsepError(
                "separable inputs must fail common-signature consistency here"
            )
        verdict.separator = ml_craig_interpolant(
            phi_n, phi2_n, common, cls, depth=res.first_failure
        )
        verdict.trace["separator_depth"] = res.first_failure
    return verdict


def decide_interpolant_existence(phi: F.Formula, phi2: F.Formula, d: int) -> Verdict:
    """Craig interpolant existence for the entailment phi |= phi2 over d-ary
    trees, by exhaustive search for a common-signature bisimilar pair of
    depth-bounded countermodels (none: an interpolant exists)."""
    phi_n, phi2_n = F.normalize(phi), F.normalize(phi2)
    if not (F.is_ml(phi_n) and F.is_ml(phi2_n)):
        raise ModsepError("interpolant existence takes modal formulas")
    if d < 2:
        raise UnsupportedClassError("interpolant existence is studied for d >= 2")
    neg_right = F.normalize(F.neg(phi2_n))
    sigma = tuple(sorted(F.sig(phi_n) & F.sig(phi2_n)))
    n = max(F.modal_depth(phi_n), F.modal_depth(phi2_n))
    trace = {"d": d, "n": n, "sigma": sigma}

    def class_reps(psi):
        reps = {}
        budget = _PAIR_BUDGET
        count = 0
        for t in K.enumerate_trees(F.sig(psi) | frozenset(sigma), d, n):
            count += 1
            if count > budget:
                raise BudgetExhaustedError("interpolant search exceeded budget")
            if not model_check(t, psi):
                continue
            key = K.canonical_key(t, sigma, n)
            reps.setdefault(key, t)
        return reps

    left = class_reps(phi_n)
    right = class_reps(neg_right)
    for lt in sorted(left.values(), key=K.canonical_key):
        for rt in sorted(right.values(), key=K.canonical_key):
            if K.check_bisim(lt, rt, sigma, n) is not None:
                return Verdict(
                    False, "interpolant-existence", evidence=(n, lt, rt), trace=trace
                )
    verdict = Verdict(True, "interpolant-existence", trace=trace)
    verdict.separator = ml_craig_interpolant(
        phi_n, neg_right, sigma, ModelClass("dary", d=d)
    )
    return verdict


def decide_graded_separability(
    phi: F.Formula, phi2: F.Formula, graded_separator: bool
) -> Verdict:
    """Separator existence for graded fixpoint formulas over all models; the
    separating language is graded modal logic when graded_separator is set,
    plain modal logic otherwise."""
    phi_n, phi2_n = F.normalize(phi), F.normalize(phi2)
    g = max(F.max_grade(phi_n), F.max_grade(phi2_n), 1)
    d = max(1, g * (F.size(phi_n) + F.size(phi2_n)))
    sigma = tuple(sorted(F.sig(phi_n) | F.sig(phi2_n)))
    a = muml_to_npta(phi_n, d)
    b = muml_to_npta(phi2_n, d)
    if not graded_separator:
        res = qpl_consistency_for_all_n(a, b, sigma, d)
    else:
        res = consistency_for_all_n(a, b, sigma, d)
    separable = not res.consistent_for_all_n
    trace = {
        "graded_separator": graded_separator,
        "d": d,
        "g_max": g,
        "m": res.m_bound,
        "first_failure": res.first_failure,
        "sigma": sigma,
    }
    return Verdict(separable, "graded-separability", trace=trace)


def decide_mu_definability_graded(phi: F.Formula) -> Verdict:
    """Whether a graded fixpoint formula is equivalent to a grade-free
    fixpoint formula: exactly when it is equivalent to its flattening.  The
    trace also records plain modal definability (flattening equivalent and
    itself modally definable)."""
    from .construct import satisfiable

    phi_n = F.normalize(phi)
    flat = F.normalize(F.flatten(phi_n))
    g = max(F.max_grade(phi_n), 1)
    d0 = g * F.size(phi_n) + 1
    ltr = F.normalize(F.And((phi_n, F.neg(flat))))
    rtl = F.normalize(F.And((flat, F.neg(phi_n))))
    cls = ModelClass("dary", d=d0)
    equivalent = not satisfiable(ltr, cls) and not satisfiable(rtl, cls)
    trace = {"d0": d0, "flattening": F.render(flat)}
    verdict = Verdict(equivalent, "mu-definability-graded", trace=trace)
    if equivalent:
        ml = decide_definability(flat, ALL, want_separator=False, want_witness=False)
        verdict.trace["ml_definable"] = ml.decision
    else:
        verdict.trace["ml_definable"] = False
        counter = oracle.equivalence_bruteforce(phi_n, flat, min(d0, 3), 2)
        if counter is not None:
            verdict.trace["counterexample_tree"] = K.render_tree(counter)
    return verdict
