import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modsep import formula as F
from modsep import kripke as K
from modsep.errors import FormulaError, ParseError
from modsep.games import model_check
from modsep.oracle import model_check_fixpoint


def fp(text):
    return F.parse_formula(text)


# ---------------------------------------------------------------------------
# Parsing

def test_parse_basic():
    f = fp("nu X. a & <>X")
    assert f == F.Nu("X", F.And((F.Lit("a"), F.Dia(1, F.Var("X")))))


def test_parse_named_constants():
    assert fp("THETA_INF") == F.Nu("X", F.Dia(1, F.Var("X")))
    assert fp("THETA_D(2)") == F.Nu(
        "X", F.And((F.Box(0, F.Var("X")), F.Box(2, F.BOT)))
    )


def test_parse_graded():
    assert fp("<2> a") == F.Dia(2, F.Lit("a"))
    assert fp("[3]~b") == F.Box(3, F.Lit("b", False))


def test_parse_precedence():
    assert fp("a & b | c") == F.Or((F.And((F.Lit("a"), F.Lit("b"))), F.Lit("c")))
    # binders extend maximally to the right
    assert fp("a | mu X. b & <>X") == F.Or(
        (F.Lit("a"), F.Mu("X", F.And((F.Lit("b"), F.Dia(1, F.Var("X"))))))
    )


def test_parse_errors_have_positions():
    with pytest.raises(ParseError) as err:
        fp("a & (b | ")
    assert err.value.pos >= 0
    with pytest.raises(FormulaError):
        fp("<>X")  # unbound variable
    # duplicate binder names are fine before normalization
    f = fp("(mu X. <>X) & (mu X. []X)")
    assert F.normalize(f) is not None


def test_negative_occurrence_rejected():
    with pytest.raises(FormulaError):
        F.normalize(fp("mu X. ~<>X"))


# ---------------------------------------------------------------------------
# Normalization

def test_normalize_dualities():
    assert F.normalize(F.neg(fp("<>a"))) == fp("[]~a")
    assert F.normalize(F.neg(fp("THETA_INF"))) == F.normalize(fp("mu X. []X"))
    assert F.normalize(F.neg(fp("<2>a"))) == fp("[1]~a")
    assert F.normalize(F.neg(fp("[2]a"))) == fp("<3>~a")


def test_graded_duality_agrees_on_trees():
    # oracle check: both sides agree on all trees over {a}, d <= 3, depth <= 2
    lhs = F.normalize(F.neg(fp("<2>a")))
    rhs = fp("[1]~a")
    for t in K.enumerate_trees({"a"}, 3, 2, limit=400):
        assert model_check_fixpoint(t, lhs) == model_check_fixpoint(t, rhs)


_lit = st.sampled_from([F.Lit("a"), F.Lit("b"), F.Lit("a", False), F.TOP, F.BOT])
_ml = st.recursive(
    _lit,
    lambda sub: st.one_of(
        st.tuples(sub, sub).map(F.And),
        st.tuples(sub, sub).map(F.Or),
        sub.map(lambda x: F.Dia(1, x)),
        sub.map(lambda x: F.Box(0, x)),
        sub.map(lambda x: F.Dia(2, x)),
        sub.map(F.neg),
    ),
    max_leaves=8,
)
_fix = st.one_of(
    _ml,
    _ml.map(lambda x: F.Mu("Z", F.Or((x, F.Dia(1, F.Var("Z")))))),
    _ml.map(lambda x: F.Nu("Z", F.And((x, F.Box(0, F.Var("Z")))))),
)


@settings(max_examples=120, deadline=None)
@given(_fix)
def test_normalize_idempotent_and_roundtrip(f):
    n1 = F.normalize(f)
    assert F.normalize(n1) == n1
    assert F.parse_formula(F.render(n1)) == n1


@settings(max_examples=40, deadline=None)
@given(_fix)
def test_normalize_preserves_semantics(f):
    trees = list(K.enumerate_trees({"a", "b"}, 2, 2, limit=25))
    trees += list(K.enumerate_trees({"a"}, 1, 4, limit=12))
    n = F.normalize(f)
    for t in trees:
        assert model_check_fixpoint(t, f) == model_check_fixpoint(t, n)


# ---------------------------------------------------------------------------
# Metrics / flatten

def test_metrics_examples():
    depth, sig, _ = F.metrics(fp("a & <>(a & <>a)"))
    assert depth == 2 and sig == {"a"}
    assert F.metrics(fp("a"))[0] == 0
    depth, sig, _ = F.metrics(fp("THETA_INF"))
    assert depth == 1 and sig == frozenset()


def test_flatten_examples():
    assert F.flatten(fp("<3>a")) == fp("<>a")
    assert F.flatten(fp("THETA_D(2)")) == F.Nu(
        "X", F.And((F.Box(0, F.Var("X")), F.Box(0, F.BOT)))
    )
    ml = F.normalize(fp("mu X. a | <>X"))
    assert F.flatten(ml) == ml


@settings(max_examples=60, deadline=None)
@given(_fix)
def test_flatten_preserves_depth_and_sig(f):
    f = F.normalize(f)
    assert F.modal_depth(F.flatten(f)) == F.modal_depth(f)
    assert F.sig(F.flatten(f)) == F.sig(f)


# ---------------------------------------------------------------------------
# Characteristic formulas

def test_characteristic_examples():
    single_a = K.node("a")
    assert F.normalize(F.characteristic_formula(single_a, {"a"}, 1)) == F.normalize(
        fp("a & []false")
    )
    m = K.node((), [K.node("a")])
    assert F.normalize(F.characteristic_formula(m, {"a"}, 1)) == F.normalize(
        fp("~a & <>a & []a")
    )
    assert F.characteristic_formula(m, {"a"}, 0) == fp("~a")


def test_characteristic_soundness():
    trees = list(K.enumerate_trees({"a"}, 2, 2, limit=60))
    for m in trees[:18]:
        for n in (0, 1, 2):
            chi = F.characteristic_formula(m, {"a"}, n)
            assert model_check(m, chi)
            for other in trees[:18]:
                holds = model_check(other, chi)
                bisim = K.check_bisim(m, other, {"a"}, n) is not None
                assert holds == bisim


# ---------------------------------------------------------------------------
# Gadget families

def test_gadget_base():
    psi, psi2 = F.gadget(0)
    assert psi == F.Lit("a") and psi2 == F.Lit("a")


def test_gadget_structure_and_signatures():
    psi1, psi1p = F.gadget(1)
    assert isinstance(psi1, F.And) and len(psi1.args) == 3
    assert psi1.args[0] == F.Dia(1, F.And((F.Lit("a"), F.Lit("b0"))))
    assert psi1.args[1] == F.Dia(1, F.And((F.Lit("a"), F.Lit("b0", False))))
    assert F.sig(F.gadget(2)[1]) == {"a", "c"}
    assert F.sig(F.gadget(2)[0]) == {"a", "b0", "b1"}
    assert F.sig(F.gadget(3)[0]) == {"a", "b0", "b1", "b2"}


def test_gadget_size_quadratic():
    sizes = [F.size(F.gadget(i)[0]) for i in range(1, 7)]
    for i, s in enumerate(sizes, start=1):
        assert s <= 40 * i * i
    assert sizes == sorted(sizes)
