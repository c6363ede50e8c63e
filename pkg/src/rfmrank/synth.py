"""Seeded synthetic corpora standing in for a real treebank plus grammar.

Candidates are random binary-branching trees.  Node labels come from a
per-corpus random "grammar" keyed on span geometry (width, split point) and
tokens carry a fixed random lexical tag; with probability
``1 - label_fidelity`` a node gets a uniformly random label instead.  This
keeps rule features informative about bracketing, as rule names are in a
real grammar.  Heads percolate from a random daughter.

A hidden random field over ``RULE`` features scores the candidates; with
probability ``1 - noise`` the best-scoring candidate is designated,
otherwise a uniformly random one.  Gold is the designated candidate with a
single phrase relabelled and heads removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .errors import ContractViolation
from .features import FeatureKey, RULE, instantiate_templates
from .treebank import Corpus, ParseTree, SentenceRecord, format_tree

# truncating either tuple keeps a PP label among the first three
PHRASE_LABELS = (
    "S/s1", "NP/np1", "PP/p1", "VP/vp1", "AP/a1", "PP/p2",
    "S/s2", "NP/np2", "VP/vp2", "A1/app1", "P1/pn1", "N1/n",
)
LEXICAL_LABELS = ("W/n", "W/v", "W/a", "W/p")


@dataclass(frozen=True)
class SynthSpec:
    sentences: int = 100
    tokens: Tuple[int, int] = (6, 12)
    candidates: Tuple[int, int] = (2, 30)
    hidden_features: int = 200
    noise: float = 0.3
    seed: int = 0
    vocabulary: int = 60
    label_fidelity: float = 0.9
    phrase_labels: int = len(PHRASE_LABELS)
    lexical_labels: int = len(LEXICAL_LABELS)

    def __post_init__(self):
        lo, hi = self.tokens
        clo, chi = self.candidates
        if self.sentences < 0 or lo < 1 or hi < lo or clo < 1 or chi < clo:
            raise ContractViolation("synth ranges must be non-empty and counts >= 1")
        if not (1 <= self.phrase_labels <= len(PHRASE_LABELS)
                and 1 <= self.lexical_labels <= len(LEXICAL_LABELS)):
            raise ContractViolation("label counts out of range")
        if self.hidden_features < 1 or self.vocabulary < 1:
            raise ContractViolation("hidden_features and vocabulary must be >= 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ContractViolation("noise must lie in [0, 1]")
        if not 0.0 <= self.label_fidelity <= 1.0:
            raise ContractViolation("label_fidelity must lie in [0, 1]")


MAX_WIDTH = 8


class _Grammar:
    def __init__(self, rng, phrase, lexical, vocab, fidelity):
        self.rng = rng
        self.phrase = phrase
        self.lexical = lexical
        self.fidelity = fidelity
        self.rules = {
            (w, left): phrase[rng.integers(len(phrase))]
            for w in range(2, MAX_WIDTH + 1)
            for left in range(1, MAX_WIDTH)
        }
        self.lexicon = {v: lexical[rng.integers(len(lexical))] for v in vocab}

    def tree(self, tokens, start, end) -> ParseTree:
        rng = self.rng
        if end - start == 1:
            tok = tokens[start]
            if rng.random() < self.fidelity:
                lab = self.lexicon[tok]
            else:
                lab = self.lexical[rng.integers(len(self.lexical))]
            return ParseTree(lab, (tok,), tok)
        split = int(rng.integers(start + 1, end))
        left = self.tree(tokens, start, split)
        right = self.tree(tokens, split, end)
        if rng.random() < self.fidelity:
            lab = self.rules[min(end - start, MAX_WIDTH), min(split - start, MAX_WIDTH - 1)]
        else:
            lab = self.phrase[rng.integers(len(self.phrase))]
        return ParseTree(lab, (left, right), (left, right)[rng.integers(2)].head)


def _bracketing(tree: ParseTree):
    out = []

    def walk(node, i):
        j = i
        for c in node.children:
            j = j + 1 if isinstance(c, str) else walk(c, j)
        out.append((i, j))
        return j

    walk(tree, 0)
    return tuple(sorted(out))


def _relabel_one(rng, tree: ParseTree, phrase) -> ParseTree:
    """Copy with one random phrase node relabelled and heads dropped."""
    phrase_nodes = [n for n in tree.subtrees() if any(not isinstance(c, str) for c in n.children)]
    target = phrase_nodes[rng.integers(len(phrase_nodes))] if phrase_nodes else None

    def copy(node):
        if isinstance(node, str):
            return node
        lab = node.label
        if node is target:
            choices = [l for l in phrase if l != lab]
            if choices:
                lab = choices[rng.integers(len(choices))]
        return ParseTree(lab, tuple(copy(c) for c in node.children))

    return copy(tree)


def hidden_model(rng, n_features: int, phrase=PHRASE_LABELS,
                 lexical=LEXICAL_LABELS) -> Dict[str, float]:
    """Standard-normal weights over a random subset of all binary RULE keys."""
    keys = [
        FeatureKey(RULE, p, (a, b)).serialize()
        for p in phrase
        for a in phrase + lexical
        for b in phrase + lexical
    ]
    pick = rng.choice(len(keys), size=min(n_features, len(keys)), replace=False)
    weights = rng.normal(0.0, 1.0, size=len(pick))
    return {keys[i]: float(w) for i, w in zip(sorted(pick), weights)}


def hidden_score(hidden: Dict[str, float], tree: ParseTree) -> float:
    return sum(hidden.get(k, 0.0) * c for k, c in instantiate_templates(tree, {RULE}).items())


def generate(spec: SynthSpec) -> Tuple[Corpus, Dict[str, float]]:
    """Return the corpus and the hidden model's weights."""
    rng = np.random.default_rng(spec.seed)
    phrase = PHRASE_LABELS[: spec.phrase_labels]
    lexical = LEXICAL_LABELS[: spec.lexical_labels]
    hidden = hidden_model(rng, spec.hidden_features, phrase, lexical)
    vocab = [f"w{i}" for i in range(spec.vocabulary)]
    grammar = _Grammar(rng, phrase, lexical, vocab, spec.label_fidelity)
    width = len(str(max(spec.sentences - 1, 0)))
    records: List[SentenceRecord] = []
    for s in range(spec.sentences):
        n_tok = int(rng.integers(spec.tokens[0], spec.tokens[1] + 1))
        tokens = tuple(vocab[i] for i in rng.integers(len(vocab), size=n_tok))
        want = int(rng.integers(spec.candidates[0], spec.candidates[1] + 1))
        cands, seen_shape, seen_text = [], set(), set()
        attempts = 0
        while len(cands) < want and attempts < 50 * want:
            attempts += 1
            tree = grammar.tree(tokens, 0, n_tok)
            text = format_tree(tree)
            shape = _bracketing(tree)
            # distinct bracketings keep the reference argmax unique when possible
            if text in seen_text or (shape in seen_shape and attempts < 25 * want):
                continue
            seen_text.add(text)
            seen_shape.add(shape)
            cands.append(tree)
        scores = np.array([hidden_score(hidden, c) for c in cands])
        if rng.random() < spec.noise:
            designated = int(rng.integers(len(cands)))
        else:
            designated = int(np.argmax(scores))
        gold = _relabel_one(rng, cands[designated], phrase)
        records.append(SentenceRecord(f"s{s:0{width}d}", tokens, gold, tuple(cands)))
    return Corpus(tuple(records)), hidden


def split(corpus: Corpus, heldout_fraction: float = 0.2) -> Tuple[Corpus, Corpus]:
    """Deterministic head/tail split into training and held-out corpora."""
    n_held = int(round(len(corpus) * heldout_fraction))
    cut = len(corpus) - n_held
    return Corpus(corpus.records[:cut]), Corpus(corpus.records[cut:])
