"""Reference distribution over selected candidate parses.

Each selected parse is scored against gold (similarity plus a small
epsilon so nothing gets zero mass), scores are rescaled to sum to 1 within
their sentence, and the result is divided by the number of sentences so
every sentence carries the same total probability.
"""

from __future__ import annotations

import math
from typing import Dict, Mapping, Sequence

from .errors import ContractViolation
from .metrics import MetricWeights, similarity
from .treebank import Corpus

DEFAULT_EPSILON = 1e-6


class ReferenceDistribution:
    def __init__(self, by_sentence: Dict[str, Dict[int, float]], per_sentence_mass: float = 1.0):
        self.by_sentence = by_sentence
        self.per_sentence_mass = per_sentence_mass

    @property
    def probs(self) -> Dict[tuple, float]:
        return {(sid, k): p for sid, ps in self.by_sentence.items() for k, p in ps.items()}

    def __getitem__(self, key):
        sid, k = key
        return self.by_sentence[sid][k]

    def __contains__(self, sid):
        return sid in self.by_sentence

    def sentence(self, sid) -> Dict[int, float]:
        return self.by_sentence[sid]

    def __len__(self):
        return len(self.by_sentence)

    def to_text(self) -> str:
        return "".join(
            f"{sid}\t{k}\t{p:.17g}\n"
            for sid, ps in self.by_sentence.items()
            for k, p in ps.items()
        )


def reference_from_scores(scores: Mapping[str, Mapping[int, float]]) -> ReferenceDistribution:
    """Normalise raw positive per-parse scores into a reference distribution."""
    n_sent = len(scores)
    out = {}
    for sid, per in scores.items():
        if not per:
            raise ContractViolation(f"sentence {sid!r} has no selected candidates")
        if any(v <= 0 for v in per.values()):
            raise ContractViolation(f"sentence {sid!r} has a non-positive score")
        mass = math.fsum(per.values())
        out[sid] = {k: (v / mass) / n_sent for k, v in per.items()}
    return ReferenceDistribution(out, 1.0)


def build_reference(
    corpus: Corpus,
    selection: Mapping[str, Sequence[int]],
    w: MetricWeights = MetricWeights(),
    epsilon: float = DEFAULT_EPSILON,
) -> ReferenceDistribution:
    """``selection`` maps sentence id to the candidate indices in the sample."""
    if epsilon <= 0:
        raise ContractViolation("epsilon must be positive")
    scores = {}
    for sid, idxs in selection.items():
        rec = corpus[sid]
        scores[sid] = {k: similarity(rec.candidates[k], rec.gold, w) + epsilon for k in idxs}
    return reference_from_scores(scores)


def best_by_reference(ref: ReferenceDistribution, sid: str) -> int:
    per = ref.sentence(sid)  # KeyError for unknown ids
    best, best_p = None, -1.0
    for k in sorted(per):
        if per[k] > best_p:
            best, best_p = k, per[k]
    return best
