"""Bracket comparison between a candidate parse and a gold parse."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import ContractViolation
from .treebank import ParseTree, labeled_spans


@dataclass(frozen=True)
class MetricWeights:
    w_cross: float = 1.0
    w_recall: float = 1.0
    w_precision: float = 1.0
    labeled: bool = False

    def __post_init__(self):
        ws = (self.w_cross, self.w_recall, self.w_precision)
        if any(w < 0 for w in ws) or sum(ws) <= 0:
            raise ContractViolation(f"metric weights must be >= 0 with a positive sum, got {ws}")


def _spans(tree: ParseTree, labeled: bool) -> Counter:
    spans = labeled_spans(tree)
    if labeled:
        return spans
    out: Counter = Counter()
    for (_, i, j), c in spans.items():
        out[i, j] += c
    return out


def _check(candidate, gold):
    if len(candidate.leaves()) != len(gold.leaves()):
        raise ContractViolation("candidate and gold trees have different yield lengths")


def precision_recall(candidate: ParseTree, gold: ParseTree, labeled: bool = False):
    """Return ``(precision, recall)`` by multiset intersection of spans."""
    _check(candidate, gold)
    cand = _spans(candidate, labeled)
    ref = _spans(gold, labeled)
    matched = sum((cand & ref).values())
    return matched / sum(cand.values()), matched / sum(ref.values())


def _crosses(a, b):
    (i, j), (k, l) = a, b
    return i < k < j < l or k < i < l < j


def crossing_rate(candidate: ParseTree, gold: ParseTree) -> float:
    """Fraction of candidate spans crossing at least one gold span. Labels ignored."""
    _check(candidate, gold)
    cand = _spans(candidate, False)
    ref = list(_spans(gold, False))
    crossing = sum(c for span, c in cand.items() if any(_crosses(span, g) for g in ref))
    return crossing / sum(cand.values())


def similarity(candidate: ParseTree, gold: ParseTree, w: MetricWeights = MetricWeights()) -> float:
    p, r = precision_recall(candidate, gold, w.labeled)
    return w.w_cross * (1.0 - crossing_rate(candidate, gold)) + w.w_recall * r + w.w_precision * p
