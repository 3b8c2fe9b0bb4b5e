"""Term representation, numeral codecs, dyadic arithmetic, resource caps."""

import pytest
from hypothesis import given, strategies as st

from hoint.terms import (App, Cons, Lam, Op, Var, Base, Arrow, type_order,
                         alpha_eq, decode_num, default_signature, encode_num,
                         free_vars, get_bit_limit, is_value, list_nat_term,
                         make_app, nat_term, nsize, num_chkbd, num_cut,
                         num_min, num_monus, num_smash, num_szsmash, pretty,
                         set_bit_limit, spine, subst, term_to_list_nat,
                         term_to_nat, value_size, ResourceLimit)
from hoint.parser import parse_term


def test_encode_decode_round_trip_small():
    for n in range(0, 300):
        assert decode_num(encode_num(n)) == n


@given(st.integers(min_value=0, max_value=10**9))
def test_encode_decode_round_trip_random(n):
    assert decode_num(encode_num(n)) == n


def test_numeral_shape_least_significant_bit_outermost():
    # 0 is the empty word; 3 = 11b nests its low bit outermost
    assert alpha_eq(encode_num(0), Cons("Eps"))
    assert alpha_eq(encode_num(3),
                    App(Cons("D1"), App(Cons("D1"), Cons("Eps"))))
    assert alpha_eq(encode_num(2),
                    App(Cons("D0"), App(Cons("D1"), Cons("Eps"))))


def test_nsize_is_bit_length():
    assert [nsize(n) for n in (0, 1, 2, 3, 4, 7, 8)] == [0, 1, 2, 2, 3, 3, 4]


def test_dyadic_op_values():
    assert num_smash(3, 5) == 2 ** (2 * 3)
    assert num_smash(0, 5) == 0          # zero-guarded
    assert num_szsmash(3, 5) == 2 ** (2 + 3)
    assert num_cut(13) == 6
    assert num_monus(3, 5) == 0
    assert num_monus(5, 3) == 2
    assert num_chkbd(9, 15) == 9         # |9| = |15| = 4
    assert num_chkbd(16, 15) == 0        # |16| = 5 > 4
    assert num_min(4, 9) == 4
    assert num_min(4, 9, 2) == 2


def test_smash_respects_bit_limit():
    old = get_bit_limit()
    try:
        set_bit_limit(64)
        with pytest.raises(ResourceLimit):
            num_smash(2 ** 10, 2 ** 10)
    finally:
        set_bit_limit(old)


def test_nat_and_list_codecs():
    assert term_to_nat(nat_term(4)) == 4
    assert term_to_list_nat(list_nat_term([3, 0, 2])) == [3, 0, 2]


def test_value_recognition_and_size(sig):
    v = list_nat_term([1, 2])
    assert is_value(v, sig)
    # C S(Z) (C S(S(Z)) Nil): 2 cons + 2+3 nat constructors + Nil
    assert value_size(v) == 8
    assert not is_value(App(Lam("x", Var("x"), Base("Nat")), nat_term(0)),
                        sig)


def test_spine_and_make_app():
    t = make_app(Op("+"), [Var("a"), Var("b")])
    head, args = spine(t)
    assert isinstance(head, Op) and head.name == "+"
    assert [a.name for a in args] == ["a", "b"]


def test_free_vars_and_subst_capture_avoidance():
    # (\y. x y) with x := y must rename the binder, not capture
    t = Lam("y", App(Var("x"), Var("y")), Base("Nat"))
    assert free_vars(t) == {"x"}
    r = subst(t, "x", Var("y"))
    assert free_vars(r) == {"y"}
    assert isinstance(r, Lam) and r.var != "y"


def test_alpha_equivalence():
    a = Lam("x", Var("x"), Base("Nat"))
    b = Lam("z", Var("z"), Base("D"))
    # binder names and annotations are both ignored; structure decides
    assert alpha_eq(a, b)
    assert not alpha_eq(a, Lam("z", App(Var("z"), Var("z")), Base("Nat")))


def test_type_order():
    n = Base("Nat")
    assert type_order(n) == 0
    assert type_order(Arrow(n, n)) == 1
    assert type_order(Arrow(Arrow(n, n), n)) == 2


def test_pretty_parse_round_trip(sig):
    sources = [
        "fun (x : Nat) -> S(x)",
        "case x of Z -> Z | S(y) -> y",
        "letRec (f : Nat -> Nat) = fun (x : Nat) -> f x",
        "# D1(Eps) D0(D1(Eps))",
    ]
    for src in sources:
        t = parse_term(src, sig)
        again = parse_term(pretty(t), sig)
        assert alpha_eq(t, again), src


def test_signature_contents(sig):
    for c in ("Z", "S", "Nil", "C", "Eps", "D0", "D1"):
        assert sig.is_cons(c)
    for op in ("+", "-", "#", "*", "cut", "chkbd"):
        assert sig.is_op(op)
    assert sig.op_arity("cut") == 1
    assert sig.op_arity("#") == 2
