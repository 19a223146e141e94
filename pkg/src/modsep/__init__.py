"""Deciding modal definability/separability of mu-calculus formulae and
constructing separators, cross-validated by brute-force oracles."""

from .formula import (
    Formula,
    characteristic_formula,
    flatten,
    gadget,
    metrics,
    normalize,
    parse_formula,
    render,
)
from .kripke import (
    KripkeTree,
    check_bisim,
    check_graded_bisim,
    check_iso,
    enumerate_trees,
    parse_tree,
    quotient,
    render_tree,
)

__all__ = [
    "Formula",
    "KripkeTree",
    "characteristic_formula",
    "check_bisim",
    "check_graded_bisim",
    "check_iso",
    "enumerate_trees",
    "flatten",
    "gadget",
    "metrics",
    "normalize",
    "parse_formula",
    "parse_tree",
    "quotient",
    "render",
    "render_tree",
]
