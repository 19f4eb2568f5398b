"""Syntax layer: parsing, rendering, sugar, fragments, structural metrics."""

import pytest
from hypothesis import given, strategies as st

from navex.expr import (
    Compose, Converse, Coproj1, Coproj2, Difference, Diversity, EdgeLabel,
    Empty, Fragment, FragmentError, Identity, Intersect, ParseError, Proj1,
    Proj2, TransClosure, Union,
    EMPTY, IDENTITY, DIVERSITY,
    base_closure, condition_depth, is_downward, label_union, labels_used,
    operators_used, parse, power, render, simplify_empty, size, star,
    subexpressions,
)

a, b, c, d = EdgeLabel("a"), EdgeLabel("b"), EdgeLabel("c"), EdgeLabel("d")


# ---------------------------------------------------------------------------
# structural equality and hashing

def test_equality_is_structural():
    assert parse("a . b") == parse("a . b")
    assert parse("a . b") is not parse("a . b")
    assert hash(parse("a . b")) == hash(parse("a . b"))
    assert parse("a . b") != parse("b . a")
    assert Proj1(a) != Proj2(a)
    assert EMPTY != IDENTITY


def test_expressions_usable_as_dict_keys():
    table = {parse("pi1(a)+"): 1, parse("pi2(a)+"): 2}
    assert table[TransClosure(Proj1(a))] == 1
    assert table[TransClosure(Proj2(a))] == 2


# ---------------------------------------------------------------------------
# parsing

def test_parse_atoms():
    assert parse("0") == EMPTY
    assert parse("id") == IDENTITY
    assert parse("di") == DIVERSITY
    assert parse("A") == Union(IDENTITY, DIVERSITY)
    assert parse("a") == a
    assert parse("idx") == EdgeLabel("idx")  # keywords only match whole names


def test_parse_functional_forms():
    assert parse("conv(a)") == Converse(a)
    assert parse("pi1(a)") == Proj1(a)
    assert parse("pi2(a)") == Proj2(a)
    assert parse("copi1(a)") == Coproj1(a)
    assert parse("copi2(a)") == Coproj2(a)


def test_parse_precedence():
    assert parse("a | b & c . d+") == Union(a, Intersect(b, Compose(c, TransClosure(d))))
    assert parse("a \\ b | c") == Union(Difference(a, b), c)
    # difference binds looser than intersection
    assert parse("a & b \\ c") == Difference(Intersect(a, b), c)
    assert parse("a \\ b & c") == Difference(a, Intersect(b, c))
    assert parse("a . b . c") == Compose(Compose(a, b), c)
    assert parse("a | b | c") == Union(Union(a, b), c)
    assert parse("(a | b) . c") == Compose(Union(a, b), c)


def test_parse_sugar_star_is_union_with_identity():
    assert parse("a*") == Union(IDENTITY, TransClosure(a))
    assert star(a) == Union(IDENTITY, TransClosure(a))


def test_parse_sugar_power_expands_right_nested():
    # a^3 unfolds by composing a onto a^2, grounding out at the identity
    expected = Compose(a, Compose(a, Compose(a, IDENTITY)))
    assert power(a, 3) == expected
    assert parse("a^3") == expected
    assert parse("a^1") == Compose(a, IDENTITY)
    assert parse("a^0") == IDENTITY
    assert parse("(a . b)^2") == Compose(Compose(a, b), Compose(Compose(a, b), IDENTITY))


def test_parse_big_union_requires_alphabet():
    assert parse("E", alphabet=["b", "a"]) == Union(a, b)
    assert parse("E", alphabet=["a"]) == a
    assert parse("E+", alphabet=[]) == TransClosure(EMPTY)
    with pytest.raises(ParseError):
        parse("E")
    assert label_union([]) == EMPTY
    assert label_union(["c", "a", "b"]) == Union(Union(a, b), c)


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError) as exc:
        parse("a |")
    assert exc.value.position == 3
    with pytest.raises(ParseError):
        parse("(a")
    with pytest.raises(ParseError):
        parse("pi1 a")       # functional keyword needs parentheses
    with pytest.raises(ParseError):
        parse("a^-1")        # exponent must be non-negative
    with pytest.raises(ParseError):
        parse("a ? b")
    with pytest.raises(ParseError):
        parse("")
    with pytest.raises(ParseError):
        parse("a b")


def test_render_round_trips_hand_picked():
    for text in [
        "a", "0", "id", "di", "a . b | c", "(a | b) . c", "a+", "(a . b)+",
        "pi1(a . b) . copi2(a)", "a \\ (b & c)", "a \\ b & c", "conv(a)+",
        "a . (b . c)", "(a \\ b) \\ c", "a \\ (b \\ c)",
    ]:
        e = parse(text)
        assert parse(render(e)) == e


_atoms = st.sampled_from([EMPTY, IDENTITY, DIVERSITY, a, b, EdgeLabel("lbl_1")])
_exprs = st.recursive(
    _atoms,
    lambda inner: st.one_of(
        st.builds(Converse, inner),
        st.builds(TransClosure, inner),
        st.builds(Proj1, inner),
        st.builds(Proj2, inner),
        st.builds(Coproj1, inner),
        st.builds(Coproj2, inner),
        st.builds(Compose, inner, inner),
        st.builds(Union, inner, inner),
        st.builds(Intersect, inner, inner),
        st.builds(Difference, inner, inner),
    ),
    max_leaves=12,
)


@given(_exprs)
def test_render_parse_round_trip(e):
    assert parse(render(e)) == e


@given(_exprs)
def test_size_counts_operator_applications(e):
    ops = sum(
        1 for s in subexpressions(e)
        if not isinstance(s, (Empty, Identity, Diversity, EdgeLabel))
    )
    assert size(e) == ops


def test_size_and_labels():
    assert size(a) == 0
    assert size(parse("pi1(a . b)")) == 2
    assert size(parse("a | a")) == 1
    assert labels_used(parse("pi1(a . b) \\ c")) == {"a", "b", "c"}
    assert labels_used(parse("id | di")) == set()


# ---------------------------------------------------------------------------
# fragments and closure

def test_fragment_construction():
    f = Fragment.from_string("tc,pi")
    assert set(f) == {"tc", "pi1", "pi2"}
    assert Fragment.from_string("copi") == Fragment.of("copi1", "copi2")
    assert str(Fragment.of()) == "(basic)"
    assert Fragment.of("tc") <= Fragment.of("tc", "cap")
    with pytest.raises(FragmentError):
        Fragment.of("bogus")


def test_operators_used():
    assert operators_used(parse("pi1(a) & b")) == Fragment.of("pi1", "cap")
    assert operators_used(parse("a . b")) == Fragment.of()
    assert operators_used(parse("conv(di)+")) == Fragment.of("conv", "di", "tc")


def test_base_closure_golden():
    assert base_closure(Fragment.of()) == Fragment.of()
    assert base_closure(Fragment.of("minus")) == Fragment.of("cap", "minus")
    assert base_closure(Fragment.of("conv", "minus")) == Fragment.of(
        "conv", "pi1", "pi2", "copi1", "copi2", "cap", "minus")
    assert base_closure(Fragment.of("di", "cap")) == Fragment.of(
        "di", "cap", "pi1", "pi2")
    assert base_closure(Fragment.of("copi1")) == Fragment.of("copi1", "pi1")
    assert base_closure(Fragment.of("pi2", "conv")) == Fragment.of(
        "pi1", "pi2", "conv")
    assert base_closure(Fragment.of("tc")) == Fragment.of("tc")


@given(st.sets(st.sampled_from(
    ["di", "conv", "tc", "pi1", "pi2", "copi1", "copi2", "cap", "minus"])))
def test_base_closure_is_a_closure_operator(flags):
    f = Fragment.of(*flags)
    closed = base_closure(f)
    assert f <= closed
    assert base_closure(closed) == closed
    bigger = base_closure(closed | Fragment.of("tc"))
    assert closed <= bigger


# ---------------------------------------------------------------------------
# empty-subexpression simplification

def test_simplify_empty_rules():
    cases = {
        "0 . a": "0", "a . 0": "0", "0 | a": "a", "a | 0": "a",
        "0+": "0", "conv(0)": "0", "pi1(0)": "0", "pi2(0)": "0",
        "copi1(0)": "id", "copi2(0)": "id", "0 & a": "0", "a & 0": "0",
        "a \\ 0": "a", "0 \\ a": "0",
        "copi1(a . 0) | b": "id | b",
        "(0 | a)+ . b": "a+ . b",
    }
    for before, after in cases.items():
        assert simplify_empty(parse(before)) == parse(after)


@given(_exprs)
def test_simplify_empty_never_grows(e):
    out = simplify_empty(e)
    assert size(out) <= size(e)
    if out is not e:
        assert size(out) < size(e) or out in (EMPTY, IDENTITY)


@given(_exprs)
def test_simplify_empty_idempotent_on_empty_free(e):
    out = simplify_empty(e)
    if out != EMPTY:
        reduced_again = simplify_empty(out)
        assert reduced_again == out


def test_simplify_empty_preserves_identity_when_unchanged():
    e = parse("pi1(a . b)+")
    assert simplify_empty(e) is e


# ---------------------------------------------------------------------------
# downward fragment and condition depth

def test_is_downward():
    assert is_downward(parse("pi1(a) . b+ \\ copi2(c)"))
    assert not is_downward(parse("conv(a)"))
    assert not is_downward(parse("di . a"))


def test_condition_depth():
    assert condition_depth(parse("id")) == 0
    assert condition_depth(parse("a . b")) == 0
    assert condition_depth(parse("pi1(a)")) == 1
    assert condition_depth(parse("pi1(pi2(a) . b)")) == 2
    assert condition_depth(parse("pi1(a) . pi2(b)")) == 1
    assert condition_depth(parse("(pi1(a . pi1(b)))+")) == 2


def test_condition_depth_rejects_other_operators():
    for text in ["a & b", "a \\ b", "conv(a)", "di", "copi1(a)"]:
        with pytest.raises(FragmentError):
            condition_depth(parse(text))
