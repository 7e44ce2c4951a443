import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import language_upto, random_tree, shuffle_by_positions
from ptrecon.errors import InvalidTreeError, LanguageTooLarge, TreeSyntaxError
from ptrecon.ptree import (Operator, ProcessTree, activity, concat_sets, enumerate_language,
                           is_normalized, loop, normalize_loop, parse_tree, sequence,
                           serialize_tree, shuffle_sets, tau, xor)

CHOICE_LOOP_LANG_1 = {
    ("a", "b", "d"), ("a", "c", "d"), ("b", "a", "d"), ("c", "a", "d"),
    ("a", "b", "d", "d"), ("a", "c", "d", "d"), ("b", "a", "d", "d"), ("c", "a", "d", "d"),
}


def test_parse_choice_loop(choice_loop_tree):
    assert choice_loop_tree.operator is Operator.SEQUENCE
    par, lp = choice_loop_tree.children
    assert par.operator is Operator.PARALLEL
    assert par.children[0] == activity("a")
    assert par.children[1] == xor(activity("b"), activity("c"))
    assert lp == loop(activity("d"), tau())
    assert not choice_loop_tree.is_annotated


def test_parse_single_leaf():
    assert parse_tree("'a'") == activity("a")
    assert parse_tree("  tau ") == tau()


def test_parse_annotated_loop():
    t = parse_tree("*( 'a':10000, tau:9000 ):1000")
    assert t == loop(activity("a", 10000), tau(9000), weight=1000)


def test_serialize_leaves():
    assert serialize_tree(activity("a")) == "'a'"
    assert serialize_tree(tau()) == "tau"


def test_serialize_annotated_roundtrip():
    text = ("->( 'R':3, X( tau:1, 'L':2 ):3, *( tau:8, 'A':4 ):3, "
            "X( 'D':1, 'E':1, 'B':1 ):3, X( tau:1, 'U':2 ):3 ):3")
    tree = parse_tree(text)
    assert serialize_tree(tree) == text
    assert parse_tree(serialize_tree(tree)) == tree


def test_labels_with_quotes_roundtrip():
    t = sequence(activity("it's"), activity("back\\slash"), activity("a, b"))
    assert parse_tree(serialize_tree(t)) == t


@pytest.mark.parametrize("text, fragment", [
    ("*( 'a' )", "loop needs at least 2"),
    ("->( 'a':1, 'b' )", "all nodes"),
    ("'a':-1", "negative weight"),
    ("X()", "without children"),
    ("->( 'a', 'b'", "expected ')'"),
    ("'tau'", "reserved"),
    ("Y('a')", "expected a tree node"),
    ("'a' 'b'", "trailing"),
    ("''", "empty"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(TreeSyntaxError) as info:
        parse_tree(text)
    assert fragment in str(info.value)
    assert info.value.position >= 0


def test_syntax_error_position():
    with pytest.raises(TreeSyntaxError) as info:
        parse_tree("->( 'a', ? )")
    assert info.value.position == 9


def test_tau_prefix_is_not_keyword():
    with pytest.raises(TreeSyntaxError):
        parse_tree("taux")


def test_mixed_annotation_rejected_by_constructor():
    with pytest.raises(InvalidTreeError):
        sequence(activity("a", 1), activity("b"))


def test_normalize_multi_redo():
    t = loop(activity("a"), activity("b"), activity("c"))
    assert normalize_loop(t) == loop(activity("a"), xor(activity("b"), activity("c")))


def test_normalize_keeps_binary_loop():
    t = loop(activity("a"), activity("b"))
    assert normalize_loop(t) is t


def test_normalize_weights():
    t = parse_tree("*( 'a':5, 'b':2, 'c':1 ):3")
    assert normalize_loop(t) == parse_tree("*( 'a':5, X( 'b':2, 'c':1 ):3 ):3")


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_normalize_preserves_bounded_language(k):
    t = loop(activity("a"), activity("b"), activity("c"))
    assert enumerate_language(normalize_loop(t), k) == enumerate_language(t, k)


def test_shuffle_example():
    assert shuffle_sets({("a", "b")}, {("c", "d")}) == {
        ("a", "b", "c", "d"), ("a", "c", "b", "d"), ("c", "a", "b", "d"),
        ("a", "c", "d", "b"), ("c", "a", "d", "b"), ("c", "d", "a", "b"),
    }


def test_concat_example():
    assert concat_sets({("a", "b")}, {("c", "d")}) == {("a", "b", "c", "d")}


def test_shuffle_with_empty():
    assert shuffle_sets({("a", "b")}, {()}) == {("a", "b")}


def test_nary_shuffle_is_true_interleaving():
    result = shuffle_sets({("a",)}, {("b",)}, {("c",)})
    assert len(result) == 6


def test_language_base_cases():
    assert enumerate_language(activity("a"), 0) == {("a",)}
    assert enumerate_language(tau(), 0) == {()}


def test_language_choice_loop(choice_loop_tree):
    assert enumerate_language(choice_loop_tree, 1) == CHOICE_LOOP_LANG_1


def test_language_cap():
    t = parse_tree("+( 'a', 'b', 'c', 'd', 'e', 'f' )")
    with pytest.raises(LanguageTooLarge):
        enumerate_language(t, 0, cap=100)


traces = st.lists(st.sampled_from("abc"), max_size=4).map(tuple)


@given(traces, traces)
def test_shuffle_matches_position_oracle(a, b):
    assert shuffle_sets({a}, {b}) == shuffle_by_positions(a, b)


def _small_trees():
    leaves = st.one_of(st.sampled_from("abc").map(activity), st.just(tau()))

    def extend(children):
        return st.one_of(
            st.lists(children, min_size=1, max_size=3).map(lambda c: sequence(*c)),
            st.lists(children, min_size=1, max_size=3).map(lambda c: xor(*c)),
            st.lists(children, min_size=1, max_size=2).map(
                lambda c: ProcessTree(Operator.PARALLEL, children=tuple(c))),
            st.lists(children, min_size=2, max_size=3).map(lambda c: loop(*c)),
        )

    return st.recursive(leaves, extend, max_leaves=5)


small_trees = _small_trees()


@settings(max_examples=60, deadline=None)
@given(small_trees)
def test_roundtrip_property(tree):
    assert parse_tree(serialize_tree(tree)) == tree
    weighted = tree.with_weights(range(sum(1 for _ in tree.nodes())))
    assert parse_tree(serialize_tree(weighted)) == weighted


@settings(max_examples=60, deadline=None)
@given(small_trees, small_trees)
def test_operator_recursion(q1, q2):
    l1, l2 = enumerate_language(q1, 1), enumerate_language(q2, 1)
    assert enumerate_language(sequence(q1, q2), 1) == {a + b for a in l1 for b in l2}
    assert enumerate_language(xor(q1, q2), 1) == l1 | l2
    expected = set()
    for a in l1:
        for b in l2:
            expected |= shuffle_by_positions(a, b)
    par = ProcessTree(Operator.PARALLEL, children=(q1, q2))
    assert enumerate_language(par, 1) == expected


@settings(max_examples=60, deadline=None)
@given(small_trees, st.integers(0, 2))
def test_normalize_preserves_language_property(tree, k):
    norm = normalize_loop(tree)
    assert is_normalized(norm)
    assert enumerate_language(norm, k) == enumerate_language(tree, k)


def test_bounded_language_is_subset_of_full_language():
    rng = random.Random(5)
    for _ in range(40):
        tree = random_tree(rng, max_leaves=5)
        try:
            lang = enumerate_language(tree, 1, cap=2000)
        except LanguageTooLarge:
            continue
        longest = max((len(t) for t in lang), default=0)
        assert lang <= language_upto(tree, longest)
