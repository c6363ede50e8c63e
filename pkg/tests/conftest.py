import random

import pytest
from hypothesis import strategies as st

from rfmrank.treebank import Corpus, ParseTree, SentenceRecord, parse_tree

UNIMPEDED = (
    "(AP/a1^unimpeded (A1/app1^unimpeded unimpeded "
    "(PP/p1^by (P1/pn1^by by (N1/n^traffic traffic)))))"
)

LABELS = ["S", "NP", "VP", "PP/p1", "PP", "AP/a1", "N1/n", "X:y", "A.b-c+d"]


@pytest.fixture
def unimpeded():
    return parse_tree(UNIMPEDED)


def random_tree(rng: random.Random, tokens, labels=LABELS, heads=True, max_arity=3):
    """Random tree over ``tokens`` with an arbitrary mix of unary chains and n-ary nodes."""

    def build(lo, hi, depth=0):
        label = rng.choice(labels)
        head = rng.choice(tokens[lo:hi]) if heads and rng.random() < 0.7 else None
        width = hi - lo
        if width == 1:
            if depth < 3 and rng.random() < 0.3:
                return ParseTree(label, (build(lo, hi, depth + 1),), head)
            return ParseTree(label, (tokens[lo],), head)
        arity = rng.randint(1, min(max_arity, width))
        if arity == 1 and depth >= 3:
            arity = 2
        cuts = sorted(rng.sample(range(lo + 1, hi), arity - 1))
        bounds = [lo] + cuts + [hi]
        kids = []
        for a, b in zip(bounds, bounds[1:]):
            if b - a == 1 and rng.random() < 0.4:
                kids.append(tokens[a])
            else:
                kids.append(build(a, b, depth + 1))
        return ParseTree(label, tuple(kids), head)

    return build(0, len(tokens))


def random_corpus(rng: random.Random, n_sent, max_tokens=8, max_cands=4):
    recs = []
    for s in range(n_sent):
        n = rng.randint(1, max_tokens)
        toks = tuple(f"t{i}" for i in range(n))
        gold = random_tree(rng, toks, heads=False)
        cands = tuple(random_tree(rng, toks) for _ in range(rng.randint(1, max_cands)))
        recs.append(SentenceRecord(f"s{s}", toks, gold, cands))
    return Corpus(tuple(recs))


@st.composite
def trees(draw, min_tokens=1, max_tokens=8):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_tokens, max_tokens))
    rng = random.Random(seed)
    return random_tree(rng, tuple(f"t{i}" for i in range(n)))


@st.composite
def tree_pairs(draw, max_tokens=8):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_tokens))
    rng = random.Random(seed)
    toks = tuple(f"t{i}" for i in range(n))
    return random_tree(rng, toks), random_tree(rng, toks)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
