"""Annotation, loop merging/unnesting, call inlining, localization."""

import pytest

from hoint.btlp import HostFun, parse_btlp, run_proc
from hoint.transform import (IAnnot, IBarrier, IIf, ILoop, TransformError,
                             annotate, count_loops, flatten,
                             has_nested_loops, iproc_pretty, localize,
                             proc_call_count, run_iproc)

from conftest import corpus_text

NESTED = """
Procedure nest(x^D, y^D)
  Var z;
  Loop x with y do {
    Loop y with y do {
      z := z + 1;
    }
  }
  Return z
"""

SEQ = """
Procedure twice(x^D)
  Var z;
  Loop x with x do { z := z + 1; }
  Loop x with x do { z := z + 1; }
  Return z
"""


def _walk(items):
    for it in items:
        yield it
        if isinstance(it, (IAnnot, IBarrier)):
            yield from _walk(it.body)
        elif isinstance(it, ILoop):
            yield from _walk(it.body)
        elif isinstance(it, IIf):
            yield from _walk(it.then)
            yield from _walk(it.els)


def test_annotate_preserves_mult_semantics():
    procs = parse_btlp(corpus_text("mult.btlp"))
    ann = [annotate(p) for p in procs]
    for x in range(6):
        for y in range(6):
            ref = run_proc(procs, [x, y])
            got = run_iproc(ann, [x, y])
            assert (got.value, got.assigns) == (ref.value, ref.assigns)


def test_annotate_preserves_sumup_semantics():
    procs = parse_btlp(corpus_text("sumup.btlp"))
    ann = [annotate(p) for p in procs]
    F = HostFun(lambda g: g(g(0)), "F2")
    for x in range(6):
        ref = run_proc(procs, [F, x])
        got = run_iproc(ann, [F, x])
        assert (got.value, got.assigns) == (ref.value, ref.assigns)


def test_flatten_structure_mult():
    flat = flatten(parse_btlp(corpus_text("mult.btlp")))
    assert count_loops(flat) == 1
    assert not has_nested_loops(flat)
    assert proc_call_count(flat) == 0


def test_flatten_structure_sumup():
    flat = flatten(parse_btlp(corpus_text("sumup.btlp")))
    assert count_loops(flat) == 1
    assert not has_nested_loops(flat)
    assert proc_call_count(flat) == 0


def test_flatten_merges_sequential_loops():
    procs = parse_btlp(SEQ)
    flat = flatten(procs)
    assert count_loops(flat) == 1
    for x in range(8):
        assert run_iproc(flat, [x]).value == run_proc(procs, [x]).value


def test_flatten_unnests_nested_loops():
    procs = parse_btlp(NESTED)
    flat = flatten(procs)
    assert count_loops(flat) == 1
    assert not has_nested_loops(flat)
    for x in range(8):
        for y in range(8):
            assert run_iproc(flat, [x, y]).value \
                == run_proc(procs, [x, y]).value, (x, y)


def test_flatten_inlines_calls():
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
    flat = flatten(procs, entry="main")
    assert proc_call_count(flat) == 0
    for x in range(8):
        assert run_iproc(flat, [x]).value \
            == run_proc(procs, [x], entry="main").value


def test_localize_removes_annotations_and_barriers():
    for name in ("mult.btlp", "sumup.btlp"):
        loc = localize(flatten(parse_btlp(corpus_text(name))))
        for it in _walk(loc.body):
            assert not isinstance(it, (IAnnot, IBarrier)), name


def test_localize_preserves_semantics():
    procs = parse_btlp(corpus_text("sumup.btlp"))
    flat = flatten(procs)
    loc = localize(flat)
    F = HostFun(lambda g: g(1) + g(0), "F3")
    for x in range(8):
        ref = run_proc(procs, [F, x])
        assert run_iproc(flat, [F, x]).value == ref.value
        assert run_iproc(loc, [F, x]).value == ref.value


def test_pretty_printers_smoke():
    flat = flatten(parse_btlp(corpus_text("sumup.btlp")))
    txt = iproc_pretty(flat)
    assert "proc SumUp" in txt and "loop" in txt
    assert "]_" in txt                     # annotation blocks survive flatten
    loc_txt = iproc_pretty(localize(flat))
    assert "chkbd" in loc_txt
    assert "]_" not in loc_txt
