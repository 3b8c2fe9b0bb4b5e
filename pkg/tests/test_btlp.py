"""Bounded-loop imperative language: parsing, well-formedness, interpreter."""

import pytest

from hoint.btlp import (Arg, ArgLam, BtlpError, Call, HostFun, check_program,
                        parse_btlp, proc_order, run_proc)
from hoint.terms import nsize

from conftest import corpus_text


def test_parse_mult_structure():
    procs = parse_btlp(corpus_text("mult.btlp"))
    assert len(procs) == 1
    p = procs[0]
    assert p.name == "mult"
    assert [par.name for par in p.params] == ["x", "y"]
    assert set(p.locals) == {"z", "b"}
    assert p.ret == "z"
    assert proc_order(p) == 0


def test_parse_sumup_types():
    p = parse_btlp(corpus_text("sumup.btlp"))[0]
    assert p.name == "SumUp"
    assert str(p.params[0].ty) == "(D -> D) -> D"
    assert str(p.params[1].ty) == "D"
    assert proc_order(p) == 2


def test_mult_values_and_assigns():
    procs = parse_btlp(corpus_text("mult.btlp"))
    check_program(procs)
    for x in range(8):
        for y in range(8):
            r = run_proc(procs, [x, y])
            assert r.value == nsize(x) * y, (x, y)
            assert r.assigns == 2 + nsize(x), (x, y)


def test_sumup_against_direct_sum():
    procs = parse_btlp(corpus_text("sumup.btlp"))
    check_program(procs)
    F1 = HostFun(lambda g: g(0) + 1, "F1")
    for x in range(8):
        want = sum(i + 1 for i in range(nsize(x)))
        assert run_proc(procs, [F1, x]).value == want, x


def test_loop_bound_zeroes_oversized_stores():
    tight = parse_btlp("""
Procedure t(x^D)
  Var z;
  Loop x with x do { z := x # x; }
  Return z
""")
    roomy = parse_btlp("""
Procedure t(x^D)
  Var z, b;
  b := x # x;
  Loop x with b do { z := x # x; }
  Return z
""")
    x = 2
    # |x#x| = |x|^2 + 1 = 5 exceeds |x| = 2: the tight loop stores 0
    assert run_proc(tight, [x]).value == 0
    assert run_proc(roomy, [x]).value == 2 ** 4
    # the zeroed assignment still counts toward the complexity measure
    assert run_proc(tight, [x]).assigns == nsize(x)


def test_if_comparison_sugar():
    procs = parse_btlp("""
Procedure absdiff(x^D, y^D)
  Var z;
  If x < y { z := y - x; } else { z := x - y; }
  Return z
""")
    for x in range(6):
        for y in range(6):
            assert run_proc(procs, [x, y]).value == abs(x - y)


def test_empty_body_returns_zero_without_assigns():
    procs = parse_btlp("Procedure p(x^D) Var z; Return z")
    r = run_proc(procs, [9])
    assert (r.value, r.assigns) == (0, 0)


def test_guard_assignment_rejected():
    with pytest.raises(BtlpError):
        procs = parse_btlp("""
Procedure bad(x^D)
  Var z;
  Loop x with x do { x := x + x; }
  Return z
""")
        check_program(procs)


def test_bound_assignment_rejected():
    with pytest.raises(BtlpError):
        procs = parse_btlp("""
Procedure bad(x^D, b^D)
  Var z;
  Loop x with b do { b := b + b; }
  Return z
""")
        check_program(procs)


def test_unbound_variable_rejected():
    with pytest.raises(BtlpError):
        procs = parse_btlp("""
Procedure bad(x^D)
  Var z;
  z := w + x;
  Return z
""")
        check_program(procs)


def test_call_between_procedures():
    procs = parse_btlp("""
Procedure inc(a^D)
  Var r;
  r := a + 1;
  Return r

Procedure main(x^D)
  Var z;
  z := inc(x) + inc(x);
  Return z
""")
    check_program(procs)
    assert run_proc(procs, [5], entry="main").value == 12
