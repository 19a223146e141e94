"""Command-line front end.

Every run prints a machine-readable verdict block (key: value lines)
followed by a human-readable summary.  Exit codes: 0 verdict printed, 2
usage or format error, 3 budget exhausted.  Witness models are written to
sidecar files next to the requested output directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import decide as D
from . import formula as F
from . import kripke as K
from .construct import verify_separator
from .errors import BudgetExhaustedError, ModsepError
from .games import model_check


def _read_formula(path: str) -> F.Formula:
    return F.parse_formula(Path(path).read_text())


def _read_tree(path: str) -> K.KripkeTree:
    return K.parse_tree(Path(path).read_text())


def _emit(block: list[tuple[str, str]], summary: str) -> None:
    for key, value in block:
        print(f"{key}: {value}")
    print()
    print(summary)


def _write_witness(args, verdict: D.Verdict, block: list) -> None:
    if verdict.evidence is None:
        return
    n, left, right = verdict.evidence
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.left).stem if getattr(args, "left", None) else "witness"
    lpath = outdir / f"{stem}.witness-left.tree"
    rpath = outdir / f"{stem}.witness-right.tree"
    lpath.write_text(K.render_tree(left) + "\n")
    rpath.write_text(K.render_tree(right) + "\n")
    block.append(("witness-depth", str(n)))
    block.append(("witness-left-file", str(lpath)))
    block.append(("witness-right-file", str(rpath)))


def _verdict_block(verdict: D.Verdict, yes: str, no: str) -> list:
    block = [
        ("verdict", yes if verdict.decision else no),
        ("question", verdict.question),
        ("decision", "yes" if verdict.decision else "no"),
    ]
    for key in ("class", "sigma", "common_sigma", "d", "m", "n", "first_failure", "separator_depth"):
        if key in verdict.trace and verdict.trace[key] is not None:
            value = verdict.trace[key]
            if isinstance(value, (tuple, list, frozenset)):
                value = ",".join(map(str, sorted(value)))
            block.append((f"bound-{key}" if key in ("d", "m", "n") else key, str(value)))
    if verdict.separator is not None:
        block.append(("separator", F.render(verdict.separator)))
    return block


def _cmd_check(args) -> int:
    tree = _read_tree(args.model)
    phi = _read_formula(args.formula)
    holds = model_check(tree, phi)
    _emit(
        [("verdict", "SATISFIED" if holds else "NOT_SATISFIED"), ("question", "check")],
        f"the model {'satisfies' if holds else 'does not satisfy'} the formula",
    )
    return 0


def _cmd_decide(args) -> int:
    cls = D.parse_class(args.model_class)
    left = _read_formula(args.left)
    sigma = tuple(s for s in args.sig.split(",") if s) if args.sig else None
    if args.problem == "definability":
        verdict = D.decide_definability(left, cls)
        block = _verdict_block(verdict, "DEFINABLE", "NOT_DEFINABLE")
        summary = "a modal equivalent exists" if verdict.decision else "no modal equivalent exists"
    elif args.problem == "separability":
        right = _read_formula(args.right)
        verdict = D.decide_separability(left, right, cls, sigma=sigma)
        block = _verdict_block(verdict, "SEPARABLE", "NOT_SEPARABLE")
        summary = "a modal separator exists" if verdict.decision else "no modal separator exists"
    elif args.problem == "interpolant":
        right = _read_formula(args.right)
        if cls.kind == "binary":
            d = 2
        elif cls.kind == "dary":
            d = cls.d
        else:
            raise ModsepError("interpolant existence runs over binary or dary classes")
        verdict = D.decide_interpolant_existence(left, right, d)
        block = _verdict_block(verdict, "INTERPOLABLE", "NOT_INTERPOLABLE")
        summary = (
            "a Craig interpolant exists" if verdict.decision else "no Craig interpolant exists"
        )
    elif args.problem == "craig-sep":
        right = _read_formula(args.right)
        verdict = D.decide_craig_separability(left, right, cls)
        block = _verdict_block(verdict, "SEPARABLE", "NOT_SEPARABLE")
        summary = (
            "a common-signature separator exists"
            if verdict.decision
            else "no common-signature separator exists"
        )
    else:  # graded-sep
        right = _read_formula(args.right)
        verdict = D.decide_graded_separability(left, right, args.graded_separator)
        block = _verdict_block(verdict, "SEPARABLE", "NOT_SEPARABLE")
        lang = "graded modal" if args.graded_separator else "modal"
        summary = (
            f"a {lang} separator exists" if verdict.decision else f"no {lang} separator exists"
        )
    _write_witness(args, verdict, block)
    _emit(block, summary)
    return 0


def _cmd_construct(args) -> int:
    cls = D.parse_class(args.model_class)
    left = _read_formula(args.left)
    right = _read_formula(args.right)
    verdict = D.decide_separability(left, right, cls, want_witness=False)
    block = _verdict_block(verdict, "SEPARABLE", "NOT_SEPARABLE")
    if verdict.decision and verdict.separator is not None and args.out:
        Path(args.out).write_text(F.render(verdict.separator) + "\n")
        block.append(("separator-file", args.out))
    _emit(
        block,
        "separator constructed and verified"
        if verdict.decision
        else "the formulas admit no modal separator",
    )
    return 0


def _cmd_verify(args) -> int:
    cls = D.parse_class(args.model_class)
    left = _read_formula(args.left)
    right = _read_formula(args.right)
    psi = _read_formula(args.separator)
    ok = verify_separator(left, right, psi, cls)
    _emit(
        [("verdict", "VALID" if ok else "INVALID"), ("question", "verify")],
        "the separator is valid" if ok else "the separator fails an entailment",
    )
    return 0


def _cmd_gadget(args) -> int:
    psi, psi2 = F.gadget(args.i)
    _emit(
        [
            ("verdict", "OK"),
            ("question", "gadget"),
            ("index", str(args.i)),
            ("psi", F.render(psi)),
            ("psi-prime", F.render(psi2)),
        ],
        f"gadget pair {args.i}: signatures "
        f"{sorted(F.sig(psi))} / {sorted(F.sig(psi2))}",
    )
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modsep",
        description="decide modal definability/separability of fixpoint formulas",
    )
    parser.add_argument("--outdir", default=".", help="directory for witness files")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="model check a formula on a tree")
    p_check.add_argument("--model", required=True)
    p_check.add_argument("--formula", required=True)

    p_dec = sub.add_parser("decide", help="run a decision procedure")
    p_dec.add_argument(
        "problem",
        choices=["definability", "separability", "interpolant", "craig-sep", "graded-sep"],
    )
    p_dec.add_argument("--class", dest="model_class", required=True)
    p_dec.add_argument("--left", required=True)
    p_dec.add_argument("--right")
    p_dec.add_argument("--sig", help="comma-separated separator signature")
    p_dec.add_argument("--graded-separator", action="store_true")

    p_con = sub.add_parser("construct", help="construct a verified separator")
    p_con.add_argument("--class", dest="model_class", required=True)
    p_con.add_argument("--left", required=True)
    p_con.add_argument("--right", required=True)
    p_con.add_argument("--out")

    p_ver = sub.add_parser("verify", help="verify a separator")
    p_ver.add_argument("--class", dest="model_class", required=True)
    p_ver.add_argument("--left", required=True)
    p_ver.add_argument("--right", required=True)
    p_ver.add_argument("--separator", required=True)

    p_gad = sub.add_parser("gadget", help="print a gadget formula pair")
    p_gad.add_argument("--i", type=int, required=True)

    return parser


def run(argv: list[str]) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "check": _cmd_check,
        "decide": _cmd_decide,
        "construct": _cmd_construct,
        "verify": _cmd_verify,
        "gadget": _cmd_gadget,
    }
    try:
        return handlers[args.command](args)
    except BudgetExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ModsepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
