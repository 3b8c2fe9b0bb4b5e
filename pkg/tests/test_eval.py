"""Leftmost-outermost evaluation with separated op / non-op step counts."""

from hypothesis import given, settings, strategies as st

from hoint.eval import evaluate, numeric_readback
from hoint.parser import parse_term
from hoint.terms import (App, Base, Lam, Var, decode_num, encode_num,
                         is_value, list_nat_term, make_app, nat_term,
                         set_bit_limit, get_bit_limit, term_to_list_nat,
                         term_to_nat)

from conftest import corpus_text


def _double(sig):
    return parse_term(corpus_text("double.hot"), sig)


def test_double_values_and_cost(sig):
    dbl = _double(sig)
    for n in range(0, 9):
        r = evaluate(App(dbl, nat_term(n)), sig)
        assert r.status == "value"
        assert term_to_nat(r.term) == 2 * n
        assert r.non_op == 3 * (n + 1)
        assert r.op_steps == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=40))
def test_double_random(n):
    from hoint.terms import default_signature
    sig = default_signature()
    r = evaluate(App(_double(sig), nat_term(n)), sig)
    assert term_to_nat(r.term) == 2 * n


def test_map_values(sig):
    mp = parse_term(corpus_text("map.hot"), sig)
    g = parse_term("fun (w : Nat) -> S(S(w))", sig)
    for xs in ([], [0], [1, 2], [3, 0, 2]):
        t = App(App(mp, g), list_nat_term(xs))
        r = evaluate(t, sig)
        assert r.status == "value"
        assert term_to_list_nat(r.term) == [x + 2 for x in xs]


def test_beta_counts_one_non_op(sig):
    t = App(Lam("x", Var("x"), Base("Nat")), nat_term(1))
    r = evaluate(t, sig)
    assert (r.non_op, r.op_steps) == (1, 0)


def test_op_fires_once_with_recursive_readback(sig):
    # cut(3) computed inside the readback of the outer +: one op step total
    t = parse_term("+ (cut D1(D1(Eps))) D1(Eps)", sig)
    r = evaluate(t, sig)
    assert (r.non_op, r.op_steps) == (0, 1)
    assert decode_num(r.term) == 2


def test_op_values(sig):
    cases = [
        ("# D1(Eps) D0(D1(Eps))", 2 ** (1 * 2)),
        ("* D1(Eps) D0(D1(Eps))", 2 ** (1 + 2)),
        ("- D0(D1(Eps)) D1(Eps)", 1),        # 2 - 1
        ("- D1(Eps) D0(D1(Eps))", 0),        # 1 - 2, proper subtraction
        ("cut D1(D0(D1(Eps)))", 2),          # 5 >> 1
        ("chkbd D1(D0(D1(Eps))) D1(Eps)", 0),  # |5| > |1|
    ]
    for src, want in cases:
        r = evaluate(parse_term(src, sig), sig)
        assert r.status == "value", src
        assert decode_num(r.term) == want, src


def test_stuck_op_totalizes_to_zero(sig):
    # open operand that is not a numeral: the op still fires, yielding 0
    r = evaluate(parse_term("+ x D1(Eps)", sig), sig)
    assert r.status == "value"
    assert decode_num(r.term) == 0
    assert (r.non_op, r.op_steps) == (0, 1)


def test_no_reduction_under_lambda(sig):
    inner_redex = Lam("x", App(Lam("y", Var("y"), Base("Nat")), Var("x")),
                      Base("Nat"))
    r = evaluate(inner_redex, sig)
    assert r.status == "normal"          # lambdas are not values here
    assert r.non_op == 0
    assert not is_value(inner_redex, sig)


def test_fuel_exhaustion(sig):
    omega = parse_term(corpus_text("omega.hot"), sig)
    r = evaluate(omega, sig, fuel=10)
    assert r.status == "fuel-exhausted"
    assert r.non_op == 10


def test_resource_limit_reported(sig):
    old = get_bit_limit()
    try:
        set_bit_limit(64)
        big = encode_num(2 ** 40)
        t = make_app(parse_term("fun (a : D) -> fun (b : D) -> # a b", sig),
                     [big, big])
        r = evaluate(t, sig)
        assert r.status == "resource-limit"
    finally:
        set_bit_limit(old)


def test_trace_structure(sig):
    r = evaluate(App(_double(sig), nat_term(2)), sig, trace=True)
    assert len(r.trace) == r.steps == r.non_op + r.op_steps
    assert all(e.rule in {"beta", "case", "letrec", "op"} for e in r.trace)
    assert r.trace[0].rule == "letrec"
    assert all(isinstance(e.position, str) for e in r.trace)


def test_numeric_readback(sig):
    assert numeric_readback(encode_num(37), sig) == 37
    assert numeric_readback(parse_term("cut D1(D1(Eps))", sig), sig) == 1
    assert numeric_readback(Var("x"), sig) is None
