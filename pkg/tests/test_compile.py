"""Imperative-to-term compilation and the compiled-state evaluator."""

import pytest

from hoint.btlp import parse_btlp
from hoint.compile import (CompileError, compile_proc, compiled_apply,
                           compiled_run, sample_functionals)
from hoint.eval import evaluate
from hoint.terms import (App, Base, Lam, decode_num, encode_num, nsize)
from hoint.transform import flatten, localize

from conftest import corpus_text


def _compiled(name):
    return compile_proc(localize(flatten(parse_btlp(corpus_text(name)))))


def test_compiled_mult_shape():
    cp = _compiled("mult.btlp")
    assert cp.name == "mult"
    assert cp.num_params == ("x", "y")
    assert cp.fun_params == ()
    assert len(cp.slots) >= 4                  # x, y, z, b at least
    assert cp.tuple_cons == f"Tup{len(cp.slots)}"
    assert cp.slots[cp.ret_index] == "z"


def test_compiled_mult_values_and_cost():
    cp = _compiled("mult.btlp")
    for x in range(8):
        for y in range(8):
            v, res = compiled_run(cp, [x, y])
            assert v == nsize(x) * y, (x, y)
            assert res.status == "value"
    _, r = compiled_run(cp, [5, 6])
    assert (r.non_op, r.op_steps) == (30, 1)   # frozen cost regression pin


def test_compiled_sumup_values():
    cp = _compiled("sumup.btlp")
    fns = sample_functionals()
    for name, (host, term) in sorted(fns.items()):
        for x in range(6):
            want = sum(host(lambda z, i=i: i) for i in range(nsize(x)))
            got, _ = compiled_run(cp, [x], fun_args=[term], fuel=2_000_000)
            assert got == want, (name, x)


def test_sample_functionals_host_term_agreement(sig):
    D = Base("D")
    for name, (host, term) in sample_functionals().items():
        for k in range(4):
            const = Lam("z", encode_num(k), D)
            r = evaluate(App(term, const), sig)
            assert r.status == "value", name
            assert decode_num(r.term) == host(lambda z: k), (name, k)


def test_compiled_apply_arity_errors():
    cp = _compiled("mult.btlp")
    with pytest.raises(CompileError):
        compiled_apply(cp, [1])
    with pytest.raises(CompileError):
        compiled_apply(cp, [1, 2], fun_args=[encode_num(0)])


def test_compile_requires_flat_input():
    procs = parse_btlp("""
Procedure inc(a^D)
  Var r;
  r := a + 1;
  Return r

Procedure main(x^D)
  Var z;
  z := inc(x);
  Return z
""")
    from hoint.transform import IProc, annotate
    ann = annotate(procs[1])
    nested = IProc(ann.name, ann.params, (annotate(procs[0]),),
                   ann.locals, ann.body, ann.ret)
    with pytest.raises(CompileError):
        compile_proc(nested)