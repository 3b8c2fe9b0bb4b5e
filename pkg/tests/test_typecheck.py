"""Bidirectional type inference over the signature's base types."""

import pytest

from hoint.parser import parse_term
from hoint.terms import Arrow, Base, default_signature, nat_term
from hoint.typecheck import TypecheckError, infer

from conftest import corpus_text

NAT = Base("Nat")


def _ty(src, sig):
    return infer(parse_term(src, sig), sig)


def test_corpus_term_types(sig):
    assert str(infer(parse_term(corpus_text("double.hot"), sig), sig)) \
        == "Nat -> Nat"
    assert str(infer(parse_term(corpus_text("map.hot"), sig), sig)) \
        == "(Nat -> Nat) -> [Nat] -> [Nat]"
    assert str(infer(parse_term(corpus_text("fold.hot"), sig), sig)) \
        == "(Nat -> Nat) -> Nat -> Nat"
    assert str(infer(parse_term(corpus_text("fold_app.hot"), sig), sig)) \
        == "Nat -> Nat"


def test_constructor_and_op_types(sig):
    assert _ty("S(Z)", sig) == NAT or str(_ty("S(Z)", sig)) == "Nat"
    assert str(_ty("fun (x : D) -> + x x", sig)) == "D -> D"
    assert str(_ty("cut Eps", sig)) == "D"


def test_values_infer(sig):
    assert str(infer(nat_term(3), sig)) == "Nat"


def test_unbound_variable_rejected(sig):
    with pytest.raises(TypecheckError):
        _ty("fun (x : Nat) -> y", sig)


def test_constructor_arity_rejected(sig):
    with pytest.raises(TypecheckError):
        _ty("S(Z, Z)", sig)


def test_case_branch_type_mismatch_rejected(sig):
    with pytest.raises(TypecheckError):
        _ty("fun (x : Nat) -> case x of Z -> Z | S(y) -> Eps", sig)


def test_case_pattern_wrong_family_rejected(sig):
    with pytest.raises(TypecheckError):
        _ty("fun (x : Nat) -> case x of Eps -> Z", sig)


def test_application_type_mismatch_rejected(sig):
    with pytest.raises(TypecheckError):
        _ty("(fun (f : Nat -> Nat) -> f Z) Z", sig)


def test_op_operand_type_rejected(sig):
    # + is dyadic-only; Nat constructors cannot feed it
    with pytest.raises(TypecheckError):
        _ty("+ Z Z", sig)


def test_letrec_annotation_required_for_interp_paths(sig):
    t = parse_term("letRec (f : Nat -> Nat) = fun (x : Nat) -> f x", sig)
    assert str(infer(t, sig)) == "Nat -> Nat"


def test_higher_order_arrow_types(sig):
    src = "fun (F : (D -> D) -> D) -> F (fun (z : D) -> z)"
    assert str(_ty(src, sig)) == "((D -> D) -> D) -> D"
