import random

import numpy as np
import pytest

from rfmrank.errors import ContractViolation, IntegrityError
from rfmrank.features import RULE, build_feature_table, featurize
from rfmrank.reference import best_by_reference, build_reference
from rfmrank.rfm import Model
from rfmrank.samplers import PCFG, RAND, SampleConfig
from rfmrank.search import (Evaluator, Experiment, FeatureCache, SearchSchedule,
                            exact_match_accuracy, format_n, parse_n, search, truncated_selection)
from rfmrank.synth import SynthSpec, generate, split
from rfmrank.trainer import TrainerConfig
from rfmrank.treebank import Corpus, SentenceRecord, parse_tree

from conftest import random_corpus


@pytest.fixture(scope="module")
def small_synth():
    corpus, _ = generate(SynthSpec(sentences=60, candidates=(3, 8), seed=5))
    return split(corpus, 0.25)


def full_ref(corpus):
    return build_reference(corpus, truncated_selection(corpus, None))


def test_n_text():
    assert format_n(None) == "all" and format_n(3) == "3"
    assert parse_n("all") is None and parse_n(" 10 ") == 10
    with pytest.raises(ValueError):
        parse_n("0")


@pytest.mark.parametrize("bad", [(), (2, 1), (1, 1), (None, 2), (0, 1)])
def test_bad_schedule(bad):
    with pytest.raises(ContractViolation):
        SearchSchedule(bad)


def test_negative_patience():
    with pytest.raises(ContractViolation):
        SearchSchedule((1,), -1)


def test_overlap_rejected(small_synth):
    train, held = small_synth
    with pytest.raises(IntegrityError):
        search(train, Corpus(train.records[:2]))


def test_schedule_all_trains_once(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(None, RAND), SearchSchedule((None,), 0),
               TrainerConfig(iterations=4))
    assert len(r.steps) == 1 and r.chosen_n is None
    assert r.steps[0].sample_parses == sum(len(x.candidates) for x in train)


def test_saturation_halts(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(None, PCFG), SearchSchedule((50, 60, 70), 1),
               TrainerConfig(iterations=4))
    assert len(r.steps) == 2
    assert r.steps[0].heldout_accuracy == r.steps[1].heldout_accuracy
    assert r.halted_early and r.chosen_n == 50


def test_patience_zero_runs_everything(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(None, PCFG), SearchSchedule((50, 60, 70), 0),
               TrainerConfig(iterations=2))
    assert [s.n for s in r.steps] == [50, 60, 70] and not r.halted_early


def test_pcfg_sizes_monotone_and_deterministic(small_synth):
    train, held = small_synth
    args = (train, held, SampleConfig(None, PCFG), SearchSchedule((1, 2, 3, None), 0),
            TrainerConfig(iterations=4))
    a, b = search(*args), search(*args)
    sizes = [s.sample_parses for s in a.steps]
    assert sizes == sorted(sizes)
    assert a.to_csv() == b.to_csv()
    assert a.chosen_n in (1, 2, 3, None)


def test_runs_average(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(1, RAND, 0), SearchSchedule((1,), 0),
               TrainerConfig(iterations=2), runs=3)
    exp = Experiment(train, held, trainer=TrainerConfig(iterations=2))
    accs = [exp.run(SampleConfig(1, RAND, s)).heldout_accuracy for s in range(3)]
    assert r.steps[0].heldout_accuracy == pytest.approx(np.mean(accs))
    with pytest.raises(ContractViolation):
        search(train, held, runs=0)


def test_csv_columns(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(None, RAND), SearchSchedule((1, 2), 0),
               TrainerConfig(iterations=2))
    lines = r.to_csv().splitlines()
    assert lines[0] == "n,sample_parses,features,heldout_accuracy,best_iteration"
    assert len(lines) == 3


def test_best_step_model_scores_its_accuracy(small_synth):
    train, held = small_synth
    r = search(train, held, SampleConfig(None, RAND), SearchSchedule((1, 3, None), 0),
               TrainerConfig(iterations=6))
    ref = full_ref(held)
    best = max(r.steps, key=lambda s: s.heldout_accuracy)
    assert exact_match_accuracy(r.model, held, ref, None) == pytest.approx(best.heldout_accuracy)


def test_self_consistent_model_scores_100():
    # each sentence: candidate 0 matches gold, candidate 1 is flat; one discriminating feature
    recs = []
    for s in range(4):
        gold = parse_tree("(S (A t0 t1) t2)")
        recs.append(SentenceRecord(f"s{s}", ("t0", "t1", "t2"), gold,
                                   (parse_tree("(S (A t0 t1) t2)"), parse_tree("(S t0 t1 t2)"))))
    corpus = Corpus(tuple(recs))
    ref = full_ref(corpus)
    table = build_feature_table([r.candidates[0] for r in corpus], {RULE}, 1)
    model = Model(table, np.ones(len(table)), {RULE})
    assert exact_match_accuracy(model, corpus, ref) == 100.0
    ev = Evaluator(corpus, ref, cache=FeatureCache({RULE}))
    assert ev.accuracy(model) == 100.0


def test_random_weights_chance_level():
    # identical features for every candidate: ties resolve to index 0
    rng = random.Random(9)
    corpus = random_corpus(rng, 40, max_cands=5)
    ref = full_ref(corpus)
    table = build_feature_table([parse_tree("(Q a)")], {RULE}, 1)
    model = Model(table, [rng.gauss(0, 1)], {RULE})
    expect = 100.0 * np.mean([best_by_reference(ref, r.id) == 0 for r in corpus])
    assert exact_match_accuracy(model, corpus, ref) == pytest.approx(expect)
    assert Evaluator(corpus, ref, cache=FeatureCache({RULE})).accuracy(model) == pytest.approx(expect)


def test_max_parses_one():
    corpus = random_corpus(random.Random(3), 30, max_cands=6)
    ref = full_ref(corpus)
    table = build_feature_table([c for r in corpus for c in r.candidates], min_count=1)
    model = Model(table, np.random.default_rng(0).normal(size=len(table)))
    expect = 100.0 * np.mean([best_by_reference(ref, r.id) == 0 for r in corpus])
    assert exact_match_accuracy(model, corpus, ref, max_parses=1) == pytest.approx(expect)


@pytest.mark.parametrize("max_parses", [None, 1, 3])
def test_evaluator_matches_loop(max_parses):
    corpus = random_corpus(random.Random(4), 30, max_cands=6)
    ref = full_ref(corpus)
    table = build_feature_table([c for r in corpus for c in r.candidates], min_count=1)
    for seed in range(5):
        model = Model(table, np.random.default_rng(seed).normal(size=len(table)))
        ev = Evaluator(corpus, ref, max_parses)
        assert ev.accuracy(model) == pytest.approx(
            exact_match_accuracy(model, corpus, ref, max_parses))


def test_single_sentence_agreement():
    corpus = random_corpus(random.Random(1), 1)
    ref = full_ref(corpus)
    rec = corpus.records[0]
    table = build_feature_table(list(rec.candidates), min_count=1)
    target = best_by_reference(ref, rec.id)
    fv = featurize(rec.candidates[target], table)
    # weight only features unique to the target
    others = set().union(*[featurize(c, table).counts for k, c in enumerate(rec.candidates)
                           if k != target])
    w = np.zeros(len(table))
    unique = [i for i in fv.counts if i not in others]
    if unique:
        w[unique] = 1.0
        assert exact_match_accuracy(Model(table, w), corpus, ref) == 100.0


def test_experiment_best_iteration_is_evaluated(small_synth):
    train, held = small_synth
    exp = Experiment(train, held, trainer=TrainerConfig(iterations=5), eval_every=2)
    step = exp.run(SampleConfig(3, RAND))
    assert step.best_iteration in (2, 4, 5)
    assert 0.0 <= step.heldout_accuracy <= 100.0


def test_reject_bad_eval_every(small_synth):
    train, held = small_synth
    with pytest.raises(ContractViolation):
        Experiment(train, held, eval_every=0)
