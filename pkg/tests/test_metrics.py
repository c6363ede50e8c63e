import pytest
from hypothesis import given

from rfmrank.errors import ContractViolation
from rfmrank.metrics import MetricWeights, crossing_rate, precision_recall, similarity
from rfmrank.treebank import ParseTree, parse_tree

from conftest import tree_pairs


def brute_spans(tree, labeled):
    """Spans listed node by node from leaf positions; tokens are named t<i>."""
    out = []

    def walk(node):
        idx = []
        for c in node.children:
            idx.extend([int(c[1:])] if isinstance(c, str) else walk(c))
        span = (min(idx), max(idx) + 1)
        out.append((node.label,) + span if labeled else span)
        return idx

    walk(tree)
    return out


def brute_pr(cand, gold, labeled):
    c, g = brute_spans(cand, labeled), brute_spans(gold, labeled)
    pool = list(g)
    matched = 0
    for s in c:
        if s in pool:
            pool.remove(s)
            matched += 1
    return matched / len(c), matched / len(g)


def brute_cross(cand, gold):
    c, g = brute_spans(cand, False), brute_spans(gold, False)
    bad = 0
    for a, b in c:
        for x, y in g:
            overlap = max(a, x) < min(b, y)
            nested = (a <= x and y <= b) or (x <= a and b <= y)
            if overlap and not nested:
                bad += 1
                break
    return bad / len(c)


def test_identical_trees():
    t = parse_tree("(S (A t0 t1) (B t2))")
    assert precision_recall(t, t) == (1.0, 1.0)
    assert crossing_rate(t, t) == 0.0
    assert similarity(t, t, MetricWeights(1, 1, 1)) == 3.0


# candidate spans {(0,3),(0,2)}, gold {(0,3),(1,3)}
CAND = parse_tree("(S (X t0 t1) t2)")
GOLD = parse_tree("(S t0 (Y t1 t2))")


def test_fixture_precision_recall():
    assert precision_recall(CAND, GOLD, labeled=False) == (0.5, 0.5)
    assert brute_pr(CAND, GOLD, False) == (0.5, 0.5)


def test_fixture_crossing():
    # (0,2) crosses gold (1,3); the root nests everything
    assert crossing_rate(CAND, GOLD) == 0.5
    assert brute_cross(CAND, GOLD) == 0.5


def test_root_never_crosses():
    cand = parse_tree("(X t0 t1 (Z t2))")
    gold = parse_tree("(S (A t0) (B t1 t2))")
    assert crossing_rate(cand, gold) == 0.0


def test_fixture_similarity_without_crossing():
    assert similarity(CAND, GOLD, MetricWeights(0, 1, 1)) == 1.0


def test_crossing_only_weight():
    cand = parse_tree("(X (A t0 t1) (B t2 t3))")
    gold = parse_tree("(S t0 (Y t1 t2) t3)")
    # (0,4) nests gold; (0,2),(2,4) both cross (1,3)
    assert crossing_rate(cand, gold) == pytest.approx(2 / 3)
    assert similarity(cand, gold, MetricWeights(1, 0, 0)) == pytest.approx(1 / 3)


def test_flat_candidate():
    flat = parse_tree("(S t0 t1 t2 t3)")
    gold = parse_tree("(S (A t0 t1) (B (C t2) t3))")
    assert crossing_rate(flat, gold) == 0.0
    k = 4
    assert precision_recall(flat, gold) == (1.0, 1 / k)


def test_yield_mismatch():
    with pytest.raises(ContractViolation):
        precision_recall(parse_tree("(S a b)"), parse_tree("(S a)"))
    with pytest.raises(ContractViolation):
        crossing_rate(parse_tree("(S a b)"), parse_tree("(S a)"))


def test_weights_validation():
    with pytest.raises(ContractViolation):
        MetricWeights(0, 0, 0)
    with pytest.raises(ContractViolation):
        MetricWeights(-1, 1, 1)


@given(tree_pairs())
def test_matches_brute_force(pair):
    a, b = pair
    for labeled in (False, True):
        assert precision_recall(a, b, labeled) == brute_pr(a, b, labeled)
    assert crossing_rate(a, b) == brute_cross(a, b)


@given(tree_pairs())
def test_precision_recall_swap_symmetry(pair):
    a, b = pair
    p_ab, r_ab = precision_recall(a, b)
    p_ba, r_ba = precision_recall(b, a)
    assert p_ab == r_ba and r_ab == p_ba


def _relabel(tree, label):
    return ParseTree(label, tuple(c if isinstance(c, str) else _relabel(c, label + "x")
                                  for c in tree.children))


@given(tree_pairs())
def test_crossing_relabel_invariant(pair):
    a, b = pair
    assert crossing_rate(_relabel(a, "Q"), _relabel(b, "R")) == crossing_rate(a, b)


@given(tree_pairs())
def test_self_match_is_argmax(pair):
    c, t = pair
    w = MetricWeights(0.5, 1.0, 2.0)
    assert similarity(t, t, w) >= similarity(c, t, w)
