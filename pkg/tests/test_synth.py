import pytest

from rfmrank.errors import ContractViolation
from rfmrank.synth import SynthSpec, generate, hidden_score, split
from rfmrank.treebank import corpus_to_text, parse_corpus


def test_structure_minimal():
    corpus, _ = generate(SynthSpec(sentences=1, candidates=(2, 2)))
    text = corpus_to_text(corpus)
    assert text.count("#SENT") == 1
    assert text.count("\nparse: ") == 2


def test_deterministic():
    a = corpus_to_text(generate(SynthSpec(sentences=20, seed=3))[0])
    b = corpus_to_text(generate(SynthSpec(sentences=20, seed=3))[0])
    c = corpus_to_text(generate(SynthSpec(sentences=20, seed=4))[0])
    assert a == b and a != c


def test_reread_validates():
    corpus, _ = generate(SynthSpec(sentences=100, seed=1))
    again = parse_corpus(corpus_to_text(corpus).splitlines())
    assert again == corpus and len(again) == 100


def test_ranges_respected():
    spec = SynthSpec(sentences=50, tokens=(3, 5), candidates=(2, 4), seed=2)
    corpus, _ = generate(spec)
    for rec in corpus:
        assert 3 <= len(rec.tokens) <= 5
        assert 1 <= len(rec.candidates) <= 4
        assert rec.gold.head is None


def test_noise_free_gold_is_hidden_argmax():
    spec = SynthSpec(sentences=30, noise=0.0, seed=6, label_fidelity=1.0)
    corpus, hidden = generate(spec)
    for rec in corpus:
        scores = [hidden_score(hidden, c) for c in rec.candidates]
        best = rec.candidates[scores.index(max(scores))]
        # gold differs from the designated parse by one relabelled phrase at most
        assert best.strip_heads().leaves() == rec.gold.leaves()
        diff = sum(a.label != b.label for a, b in zip(best.subtrees(), rec.gold.subtrees()))
        assert diff <= 1


@pytest.mark.parametrize("kw", [dict(tokens=(3, 2)), dict(candidates=(0, 3)), dict(noise=1.5),
                                dict(hidden_features=0), dict(phrase_labels=99),
                                dict(label_fidelity=-0.1)])
def test_spec_validation(kw):
    with pytest.raises(ContractViolation):
        SynthSpec(**kw)


def test_split_disjoint():
    corpus, _ = generate(SynthSpec(sentences=10))
    a, b = split(corpus, 0.3)
    assert len(a) == 7 and len(b) == 3
    assert not set(a.ids()) & set(b.ids())
