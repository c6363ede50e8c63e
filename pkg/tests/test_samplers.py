import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfmrank.errors import ContractViolation, FormatError
from rfmrank.features import extract_local_trees
from rfmrank.reference import build_reference, reference_from_scores
from rfmrank.samplers import (PCFG, RAND, REF, SampleConfig, SplitMix64, backbone_for,
                              read_manifest, sample_pcfg, sample_rand, sample_ref, select,
                              sentence_seed, train_pcfg, write_manifest)
from rfmrank.treebank import SentenceRecord, parse_tree

from conftest import random_corpus, random_tree


def record(n_cands, n_tok=4, seed=0):
    rng = random.Random(seed)
    toks = tuple(f"t{i}" for i in range(n_tok))
    return SentenceRecord("s", toks, random_tree(rng, toks, heads=False),
                          tuple(random_tree(rng, toks) for _ in range(n_cands)))


def test_splitmix_reference_vector():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_below_range():
    rng = SplitMix64(7)
    assert all(0 <= rng.below(3) < 3 for _ in range(1000))
    with pytest.raises(ValueError):
        rng.below(0)


def test_sentence_seed_stable():
    assert sentence_seed(1, "abc") == sentence_seed(1, "abc")
    assert sentence_seed(1, "abc") != sentence_seed(2, "abc")
    assert sentence_seed(1, "abc") != sentence_seed(1, "abd")


def test_rand_exhaustive():
    rec = record(5)
    assert sample_rand(rec, 5, 3) == list(range(5))
    assert sample_rand(rec, 100, 3) == list(range(5))
    assert sample_rand(rec, None, 3) == list(range(5))


def test_rand_frequency():
    rec = record(2)
    hits = Counter(sample_rand(rec, 1, s)[0] for s in range(10000))
    assert abs(hits[0] / 10000 - 0.5) <= 0.02


def test_rand_deterministic():
    rec = record(20)
    assert sample_rand(rec, 7, 11) == sample_rand(rec, 7, 11)


@given(st.integers(1, 25), st.integers(1, 30), st.integers(0, 2**64 - 1))
def test_rand_distinct_valid(size, n, seed):
    out = sample_rand(record(size), n, seed)
    assert len(out) == min(n, size) == len(set(out))
    assert all(0 <= k < size for k in out)


def test_pcfg_single_observation():
    bb = train_pcfg([parse_tree("(S (NP a) (VP b))")])
    assert bb.prob("S", ("NP", "VP")) == 1.0


def test_pcfg_two_expansions():
    bb = train_pcfg([parse_tree("(S (NP a) (VP b))"), parse_tree("(S (VP a) (NP b))")])
    assert bb.prob("S", ("NP", "VP")) == 0.5
    assert bb.prob("S", ("VP", "NP")) == 0.5
    assert bb.prob("S", ("X",)) == 1e-9


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_pcfg_counting_oracle(seed):
    rng = random.Random(seed)
    trees = [random_tree(rng, ("t0", "t1", "t2", "t3")) for _ in range(10)]
    counts = {}
    for t in trees:
        stack = [t]
        while stack:
            node = stack.pop()
            kids = [c for c in node.children if not isinstance(c, str)]
            key = (node.label, tuple(c.label for c in kids))
            counts[key] = counts.get(key, 0) + 1
            stack.extend(kids)
    per_parent = Counter()
    for (p, _), c in counts.items():
        per_parent[p] += c
    bb = train_pcfg(trees)
    for (p, kids), c in counts.items():
        assert bb.prob(p, kids) == pytest.approx(c / per_parent[p], rel=1e-15)


def test_pcfg_dominance():
    toks = ("a", "b")
    good = parse_tree("(S (NP a) (VP b))")
    bad = parse_tree("(S (VP a) (NP b))")
    bb = train_pcfg([good])
    rec = SentenceRecord("s", toks, good, (bad, good))
    assert sample_pcfg(rec, bb, 1) == [1]
    assert sample_pcfg(rec, bb, 2) == [0, 1]


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_pcfg_sort_oracle(seed, n):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 8, max_cands=10)
    bb = backbone_for(corpus)
    for rec in corpus:
        scores = [bb.log_score(c) for c in rec.candidates]
        want = sorted(sorted(range(len(scores)), key=lambda k: (-scores[k], k))[:n])
        assert sample_pcfg(rec, bb, n) == want
        assert set(sample_pcfg(rec, bb, n)) <= set(sample_pcfg(rec, bb, n + 1))


def test_pcfg_empty_training():
    with pytest.raises(ContractViolation):
        train_pcfg([])


def test_ref_sampler():
    rec = record(3)
    ref = reference_from_scores({"s": {0: 0.2, 1: 0.5, 2: 0.3}})
    assert sample_ref(rec, ref, 1) == [1]
    assert sample_ref(rec, ref, 2) == [1, 2]
    assert sample_ref(rec, ref, 3) == [0, 1, 2]
    with pytest.raises(KeyError):
        sample_ref(rec, reference_from_scores({"s": {0: 1.0}}), 1)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_ref_sort_oracle(seed, n):
    corpus = random_corpus(random.Random(seed), 6, max_cands=10)
    ref = build_reference(corpus, {r.id: list(range(len(r.candidates))) for r in corpus})
    for rec in corpus:
        per = ref.sentence(rec.id)
        want = sorted(sorted(per, key=lambda k: (-per[k], k))[:n])
        got = sample_ref(rec, ref, n)
        assert got == want
        assert set(got) <= set(sample_ref(rec, ref, n + 1))


def test_select_dispatch():
    corpus = random_corpus(random.Random(1), 5, max_cands=6)
    for strat in (RAND, PCFG):
        sel = select(corpus, SampleConfig(2, strat, 4))
        assert list(sel) == list(corpus.ids())
        assert all(len(v) == min(2, len(corpus[s].candidates)) for s, v in sel.items())
    with pytest.raises(ContractViolation):
        select(corpus, SampleConfig(2, REF))


def test_config_validation():
    with pytest.raises(ContractViolation):
        SampleConfig(0)
    with pytest.raises(ContractViolation):
        SampleConfig(1, "bogus")


def test_manifest_roundtrip(tmp_path):
    sel = {"a": [0, 2], "b": [1]}
    p = tmp_path / "m.tsv"
    write_manifest(sel, p)
    assert p.read_text() == "a\t0,2\nb\t1\n"
    assert read_manifest(p) == sel
    p.write_text("a\t0\na\t1\n")
    with pytest.raises(FormatError):
        read_manifest(p)
    p.write_text("a\tx\n")
    with pytest.raises(FormatError):
        read_manifest(p)


def test_backbone_uses_gold():
    corpus = random_corpus(random.Random(2), 4)
    bb = backbone_for(corpus)
    gold_rules = {(lt.parent, lt.child_labels) for r in corpus for lt in extract_local_trees(r.gold)}
    assert set(bb.rule_probs) == gold_rules
