"""Completed naturals, interpretation levels, grids, pre-fixpoint checks."""

import pytest

from hoint.domain import (Fun, Grid, InterpSettings, TOP, check_letrec,
                          check_monotone, dom_apply, dom_le, interp,
                          letrec_nodes, nadd, nle, nmax, nmin, nmonus, nmul,
                          resolve_path, show_dom, sup_interp, top_at)
from hoint.parser import parse_term
from hoint.terms import (Arrow, Base, LetRec, default_signature, encode_num,
                         list_nat_term, nat_term, value_size)

from conftest import corpus_text

N = Base("Nat")


def test_completed_arithmetic():
    assert nadd(TOP, 1) is TOP and nadd(2, 3) == 5
    assert nmul(TOP, 3) is TOP
    assert nmul(TOP, 0) == 0 and nmul(0, TOP) == 0   # zero absorbs
    assert nmax(TOP, 2) is TOP and nmax(4, 2) == 4
    assert nmin(TOP, 2) == 2 and nmin(1, 5) == 1
    assert nmonus(TOP, 5) is TOP and nmonus(5, TOP) == 0
    assert nmonus(7, 3) == 4 and nmonus(3, 7) == 0
    assert nle(3, TOP) and not nle(TOP, 3) and nle(TOP, TOP)


def test_value_levels_count_constructors(sig):
    for v in (nat_term(3), encode_num(5), list_nat_term([1, 2])):
        assert interp(v, sig) == value_size(v)


def test_double_least_fixpoint_goldens(sig):
    # branch recurrence F(X) = max(5+X+F(X-1), 4+X) for X >= 1, F(0) = 3
    dbl = parse_term(corpus_text("double.hot"), sig)
    f = interp(dbl, sig)
    assert [dom_apply(f, k) for k in (0, 1, 2, 3)] == [3, 9, 16, 24]
    assert dom_apply(f, TOP) is TOP


def test_application_level_is_function_application(sig):
    dbl = parse_term(corpus_text("double.hot"), sig)
    from hoint.terms import App
    whole = interp(App(dbl, nat_term(2)), sig)
    assert whole == dom_apply(interp(dbl, sig), interp(nat_term(2), sig))


def test_unproductive_letrec_hits_fuel_top(sig):
    om = parse_term("letRec (f : D -> D) = f", sig)
    f = interp(om, sig)
    assert dom_apply(f, 5) is TOP
    assert dom_apply(f, TOP) is TOP


def test_sup_interp_values():
    assert dom_apply(sup_interp("+"), 3, 4) == 7
    assert dom_apply(sup_interp("-"), 3, 4) == 3          # monus keeps left
    assert dom_apply(sup_interp("#"), 3, 4) == 12
    assert dom_apply(sup_interp("*"), 3, 4) == 7
    assert [dom_apply(sup_interp("cut"), k) for k in (0, 1, 2, 5)] \
        == [0, 1, 1, 4]
    assert dom_apply(sup_interp("chkbd"), 9, 4) == 4


def test_sup_interps_monotone_on_grid():
    grid = Grid()
    two = Arrow(N, Arrow(N, N))
    for op in ("+", "-", "#", "*", "chkbd"):
        assert check_monotone(sup_interp(op), two, grid) is None, op
    assert check_monotone(sup_interp("cut"), Arrow(N, N), grid) is None


def test_dom_le_reports_first_failing_point():
    grid = Grid()
    double_x = Fun(lambda x: nmul(2, x), "2X")
    ident = Fun(lambda x: x, "X")
    assert dom_le(ident, double_x, Arrow(N, N), grid) is None
    w = dom_le(double_x, ident, Arrow(N, N), grid)
    assert w is not None
    assert w.args == [1] and w.lhs == 2 and w.rhs == 1


def test_check_letrec_candidate_verdicts(sig):
    dbl = parse_term(corpus_text("double.hot"), sig)
    node = letrec_nodes(dbl)[0]
    settings = InterpSettings()
    good = Fun(lambda x: nadd(nmul(6, nmul(x, x)), 5), "6X^2+5")
    rep = check_letrec(node, good, sig, settings)
    assert rep.verdict == "holds-on-grid"
    bad = Fun(lambda x: x, "X")
    rep2 = check_letrec(node, bad, sig, settings)
    assert rep2.verdict == "fail"
    assert rep2.witness is not None


def test_letrec_nodes_and_paths(sig):
    t = parse_term(corpus_text("fold_app.hot"), sig)
    assert len(letrec_nodes(t)) == 1
    assert isinstance(resolve_path(t, "0"), LetRec)


def test_grid_samples():
    grid = Grid()
    assert TOP in grid.samples(N)
    fns = grid.samples(Arrow(N, N))
    assert len(fns) >= 9
    # order-2 sample sets carry bottom and top elements
    hi = grid.samples(Arrow(Arrow(N, N), N))
    assert len(hi) >= 2


def test_show_dom():
    assert show_dom(TOP) == "Top"
    assert show_dom(7) == "7"
