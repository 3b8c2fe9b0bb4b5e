"""Higher-order polynomial parsing, evaluation, composition, certification."""

import json

import pytest

from hoint.domain import (Fun, Grid, TOP, check_monotone, dom_apply)
from hoint.parser import parse_term
from hoint.poly import (PolyError, certify, load_candidates, parse_poly,
                        poly_compose, poly_eval, poly_pretty)
from hoint.terms import Arrow, Base

from conftest import corpus_text

N = Base("Nat")


def _eval(src: str):
    return poly_eval(parse_poly(src).poly)


def test_quadratic_value():
    f = _eval("\\X:N. 6*X^2 + 5")
    assert dom_apply(f, 2) == 29
    assert dom_apply(f, 0) == 5
    assert dom_apply(f, TOP) is TOP


def test_second_order_value():
    q2 = _eval("\\X1:N->N. \\X0:N. X1 (X1 4) + X1 X0")
    ident = Fun(lambda x: x, "X")
    assert dom_apply(q2, ident, 3) == 7


def test_power_sugar_equals_spelled_product():
    a = _eval("\\X:N. X^3")
    b = _eval("\\X:N. X*X*X")
    for k in (0, 1, 2, 5):
        assert dom_apply(a, k) == dom_apply(b, k)


def test_join_and_max_flagged_extended():
    assert not parse_poly("\\X:N. X + 1").uses_join
    assert parse_poly("\\X:N. max(X, 3)").uses_join
    assert parse_poly("\\X:N. X ⊔ 3").uses_join


def test_composition_values():
    inc = parse_poly("\\X:N. X + 1").poly
    dbl = parse_poly("\\X:N. 2*X").poly
    assert dom_apply(poly_eval(poly_compose(inc, dbl)), 3) == 7
    p1 = parse_poly("\\X:N. 6*X^2 + 5").poly
    assert dom_apply(poly_eval(poly_compose(p1, p1)), 1) == 731


def test_beta_substitution_compatibility():
    # (\X. X + 2) 3 evaluates like the redex contractum
    v = _eval("(\\X:N. X + 2) 3")
    assert v == 5


def test_poly_eval_monotone_on_grid():
    grid = Grid()
    for src, ty in [("\\X:N. 6*X^2 + 5", Arrow(N, N)),
                    ("\\X:N. max(X, 3)", Arrow(N, N)),
                    ("\\G:N->N. \\X:N. (5 + (G X)) * (2*X)^2",
                     Arrow(Arrow(N, N), Arrow(N, N)))]:
        assert check_monotone(_eval(src), ty, grid) is None, src


def test_pretty_round_trip():
    for src in ("\\X:N. 6*X^2 + 5",
                "\\G:N->N. \\X:N. (5 + (G X)) * (2*X)^2",
                "\\X:N. max(X, 3)"):
        p = parse_poly(src).poly
        again = parse_poly(poly_pretty(p)).poly
        f, g = poly_eval(p), poly_eval(again)
        probe = [0, 1, 2, 5]
        if src.startswith("\\G"):
            h = Fun(lambda x: x, "X")
            assert all(dom_apply(f, h, k) == dom_apply(g, h, k)
                       for k in probe)
        else:
            assert all(dom_apply(f, k) == dom_apply(g, k) for k in probe)


def test_candidate_path_validation(sig):
    t = parse_term(corpus_text("double.hot"), sig)
    with pytest.raises(PolyError):
        load_candidates(t, {"candidates": [{"path": "0.0",
                                            "poly": "\\X:N. X"}]}, sig)


def test_candidate_gate_form(sig):
    t = parse_term(corpus_text("fold_app.hot"), sig)
    spec = {"candidates": [{"path": "0",
                            "gate": {"var": "G", "le": "\\X:N. X + 3"},
                            "then": "\\Y:N. 7*Y + 4", "else": "top"}]}
    cands = load_candidates(t, spec, sig)
    assert len(cands) == 1


def test_certify_double_green_and_red(sig):
    t = parse_term(corpus_text("double.hot"), sig)
    good = load_candidates(t, json.loads(corpus_text("double.json")), sig)
    rep = certify(t, sig, good, parse_poly("\\X:N. 6*X^2 + 5"))
    assert rep.verdict == "holds-on-grid"
    assert rep.order == 1
    j = rep.to_json()
    assert j["verdict"] == "holds-on-grid"
    assert json.dumps(j)                     # serializable

    bad = load_candidates(t, {"candidates": [{"path": "",
                                              "poly": "\\X:N. X"}]}, sig)
    rep2 = certify(t, sig, bad, None)
    assert rep2.verdict == "fail"
    assert rep2.to_json()["letrec_checks"][0]["witness"]


def test_certify_bound_witness(sig):
    # candidate passes but the whole-term bound is too small
    t = parse_term(corpus_text("double.hot"), sig)
    good = load_candidates(t, json.loads(corpus_text("double.json")), sig)
    rep = certify(t, sig, good, parse_poly("\\X:N. X"))
    assert rep.verdict == "fail"
    assert rep.bound_witness is not None
