import pytest

from modsep import formula as F


def fp(text: str) -> F.Formula:
    return F.parse_formula(text)


@pytest.fixture(scope="session")
def corpus():
    """Small formula corpus reused across cross-validation sweeps."""
    return {
        "dia_a": fp("<>a"),
        "theta_inf": fp("THETA_INF"),
        "finite": fp("mu X. []X"),
        "boxbot": fp("[]false"),
        "reach_a": fp("mu X. a | <>X"),
        "sep1": fp("a & <>(a & <>a)"),
        "never_a": fp("nu Y. ~a & []Y"),
        "box_a": fp("[]a"),
        "fig1_left": fp("<>(a & b) & <>(a & ~b)"),
        "fig1_right": fp("<>(~a & c) & <>(~a & ~c)"),
    }


@pytest.fixture(scope="session")
def fig1_models():
    from modsep import kripke as K

    left = K.node((), [K.node(("a", "b")), K.node(("a",)), K.node(())])
    right = K.node((), [K.node(("c",)), K.node(()), K.node(("a",))])
    return left, right
