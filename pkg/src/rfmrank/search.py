"""Informative-sample search: grow the per-sentence sample size until the
held-out exact-match accuracy stops improving."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ContractViolation, IntegrityError
from .features import (ALL_TEMPLATES, FeatureTable, build_feature_table,
                       default_pp_predicate, instantiate_templates)
from .metrics import MetricWeights
from .reference import DEFAULT_EPSILON, ReferenceDistribution, best_by_reference, build_reference
from .rfm import Model, Sample, SampleEntry, counts_matrix, select_best
from .samplers import PCFG, RAND, REF, SampleConfig, backbone_for, select
from .trainer import TrainerConfig, train
from .treebank import Corpus

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1, 2, 3, 5, 10, 100, 1000, None)
DEFAULT_MAX_PARSES = 100


def format_n(n: Optional[int]) -> str:
    return "all" if n is None else str(n)


def parse_n(text: str) -> Optional[int]:
    text = text.strip().lower()
    if text in ("all", "inf", "*"):
        return None
    value = int(text)
    if value < 1:
        raise ValueError("sample size must be >= 1")
    return value


def check_schedule(n_values: Sequence[Optional[int]]) -> None:
    if not n_values:
        raise ContractViolation("empty schedule")
    if None in n_values[:-1]:
        raise ContractViolation("'all' may only close the schedule")
    finite = [n for n in n_values if n is not None]
    if any(n < 1 for n in finite) or any(b <= a for a, b in zip(finite, finite[1:])):
        raise ContractViolation("schedule must be strictly increasing positive integers")


@dataclass(frozen=True)
class SearchSchedule:
    n_values: tuple = DEFAULT_SCHEDULE
    patience: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(self.n_values))
        check_schedule(self.n_values)
        if self.patience < 0:
            raise ContractViolation("patience must be >= 0")


class FeatureCache:
    """Template instantiations per (sentence id, candidate index), computed once."""

    def __init__(self, templates=ALL_TEMPLATES, is_pp=default_pp_predicate):
        self.templates = frozenset(templates)
        self.is_pp = is_pp
        self._store: Dict[tuple, Counter] = {}

    def get(self, corpus: Corpus, sid: str, k: int) -> Counter:
        key = (sid, k)
        inst = self._store.get(key)
        if inst is None:
            inst = instantiate_templates(corpus[sid].candidates[k], self.templates, self.is_pp)
            self._store[key] = inst
        return inst


def make_sample(corpus: Corpus, selection: Dict[str, List[int]], table: FeatureTable,
                ref: ReferenceDistribution, cache: FeatureCache) -> Sample:
    entries = [
        SampleEntry(sid, k, table.vectorize(cache.get(corpus, sid, k)), ref[sid, k])
        for sid, idxs in selection.items()
        for k in idxs
    ]
    return Sample(entries, len(table))


def truncated_selection(corpus: Corpus, max_parses: Optional[int]) -> Dict[str, List[int]]:
    return {
        rec.id: list(range(len(rec.candidates) if max_parses is None
                           else min(max_parses, len(rec.candidates))))
        for rec in corpus
    }


def build_sample(corpus: Corpus, selection: Dict[str, List[int]], cache: FeatureCache,
                 min_count: int = 2, weights: MetricWeights = MetricWeights(),
                 epsilon: float = DEFAULT_EPSILON):
    """Reference distribution, cut-off feature table and sample for ``selection``."""
    ref = build_reference(corpus, selection, weights, epsilon)
    insts = [cache.get(corpus, sid, k) for sid, idxs in selection.items() for k in idxs]
    table = build_feature_table((), cache.templates, min_count, instantiations=insts)
    return make_sample(corpus, selection, table, ref, cache), table


class Evaluator:
    """Exact-match scoring of a fixed test corpus under changing models."""

    def __init__(self, testset: Corpus, ref: ReferenceDistribution,
                 max_parses: Optional[int] = DEFAULT_MAX_PARSES,
                 cache: Optional[FeatureCache] = None):
        self.testset = testset
        self.ref = ref
        self.max_parses = max_parses
        self.cache = cache or FeatureCache()
        self.targets = {rec.id: best_by_reference(ref, rec.id) for rec in testset}
        self._table = None

    def bind(self, table: FeatureTable):
        """Vectorize every truncated candidate list against ``table``."""
        sel = truncated_selection(self.testset, self.max_parses)
        rows, owner = [], []
        for j, (sid, idxs) in enumerate(sel.items()):
            for k in idxs:
                rows.append(table.vectorize(self.cache.get(self.testset, sid, k)))
                owner.append(j)
        self._matrix = counts_matrix(rows, len(table))
        self._owner = np.array(owner, dtype=np.int64)
        self._starts = np.searchsorted(self._owner, np.arange(len(sel)))
        self._target = np.array([self.targets[sid] for sid in sel], dtype=np.int64)
        self._table = table

    def predictions(self, model: Model) -> np.ndarray:
        """Model-best candidate index per sentence."""
        if self._table is not model.table:
            self.bind(model.table)
        scores = self._matrix @ model.weights if len(model) else np.zeros(self._matrix.shape[0])
        # first maximum per sentence, matching select_best's tie rule
        best_pos = np.empty(len(self._starts), dtype=np.int64)
        bounds = np.append(self._starts, len(scores))
        for j in range(len(self._starts)):
            seg = scores[bounds[j]:bounds[j + 1]]
            best_pos[j] = int(np.argmax(seg))
        return best_pos

    def verdicts(self, model: Model) -> np.ndarray:
        return self.predictions(model) == self._target

    def accuracy(self, model: Model) -> float:
        v = self.verdicts(model)
        return 100.0 * float(v.mean()) if v.size else 0.0


def exact_match_accuracy(model: Model, testset: Corpus, ref: ReferenceDistribution,
                         max_parses: Optional[int] = DEFAULT_MAX_PARSES,
                         cache: Optional[FeatureCache] = None) -> float:
    """Percentage of sentences whose model-best candidate is the reference-best one."""
    if not len(testset):
        return 0.0
    cache = cache or FeatureCache(model.templates)
    hits = 0
    for rec in testset:
        limit = len(rec.candidates) if max_parses is None else min(max_parses, len(rec.candidates))
        fvs = [model.table.vectorize(cache.get(testset, rec.id, k)) for k in range(limit)]
        hits += select_best(model, fvs) == best_by_reference(ref, rec.id)
    return 100.0 * hits / len(testset)


@dataclass
class StepRecord:
    n: Optional[int]
    sample_parses: int
    features: int
    heldout_accuracy: float
    best_iteration: int
    model: Model = field(repr=False, default=None)


@dataclass
class SearchResult:
    chosen_n: Optional[int]
    model: Model
    steps: List[StepRecord]
    halted_early: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sample_parses", "features", "heldout_accuracy", "best_iteration"])
        for s in self.steps:
            w.writerow([format_n(s.n), s.sample_parses, s.features,
                        f"{s.heldout_accuracy:.6f}", s.best_iteration])
        return buf.getvalue()

    def save_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


class Experiment:
    """Training corpus, held-out evaluator and the knobs shared by every step."""

    def __init__(self, corpus: Corpus, heldout: Corpus, *, templates=ALL_TEMPLATES,
                 is_pp=default_pp_predicate, min_count: int = 2,
                 weights: MetricWeights = MetricWeights(), epsilon: float = DEFAULT_EPSILON,
                 trainer: TrainerConfig = TrainerConfig(), eval_every: int = 2,
                 heldout_max_parses: Optional[int] = None):
        overlap = set(corpus.ids()) & set(heldout.ids())
        if overlap:
            raise IntegrityError(
                f"{len(overlap)} sentence ids occur in both training and held-out data, "
                f"e.g. {sorted(overlap)[0]!r}"
            )
        if eval_every < 1:
            raise ContractViolation("eval_every must be >= 1")
        self.corpus = corpus
        self.heldout = heldout
        self.templates = frozenset(templates)
        self.min_count = min_count
        self.weights = weights
        self.epsilon = epsilon
        self.trainer = trainer
        self.eval_every = eval_every
        self.cache = FeatureCache(self.templates, is_pp)
        self.held_cache = FeatureCache(self.templates, is_pp)
        held_ref = build_reference(heldout, truncated_selection(heldout, None), weights, epsilon)
        self.evaluator = Evaluator(heldout, held_ref, heldout_max_parses, self.held_cache)
        self._backbone = None
        self._full_ref = None

    def selection(self, cfg: SampleConfig) -> Dict[str, List[int]]:
        if cfg.strategy == PCFG:
            if self._backbone is None:
                self._backbone = backbone_for(self.corpus)
            return select(self.corpus, cfg, backbone=self._backbone)
        if cfg.strategy == REF:
            if self._full_ref is None:
                self._full_ref = build_reference(
                    self.corpus, truncated_selection(self.corpus, None), self.weights, self.epsilon
                )
            return select(self.corpus, cfg, ref=self._full_ref)
        return select(self.corpus, cfg)

    def build(self, selection):
        return build_sample(self.corpus, selection, self.cache, self.min_count, self.weights,
                            self.epsilon)

    def run(self, cfg: SampleConfig, trainer: Optional[TrainerConfig] = None) -> StepRecord:
        """Train on one sample and report its best held-out iteration."""
        trainer = trainer or self.trainer
        selection = self.selection(cfg)
        sample, table = self.build(selection)
        best = {"acc": -1.0, "it": 0, "model": None}
        last = trainer.iterations
        seen = set()

        def consider(it, model):
            seen.add(it)
            acc = self.evaluator.accuracy(model)
            if acc > best["acc"]:
                best.update(acc=acc, it=it, model=model)

        def on_iter(it, model):
            if it % self.eval_every == 0 or it == last:
                consider(it, model)

        model, trace = train(sample, table, trainer, self.templates, on_iter)
        final = trace.records[-1].iteration
        if final not in seen:  # converged early on an unevaluated iteration
            consider(final, model)
        return StepRecord(cfg.n, len(sample), len(table), best["acc"], best["it"], best["model"])


def search(corpus: Corpus, heldout: Corpus, strategy: SampleConfig = SampleConfig(None, RAND),
           schedule: SearchSchedule = SearchSchedule(), trainer: TrainerConfig = TrainerConfig(),
           weights: MetricWeights = MetricWeights(), *, runs: int = 1,
           progress: Optional[Callable[[StepRecord], None]] = None, **experiment_kw) -> SearchResult:
    """Walk ``schedule`` and return the model from the best held-out step.

    A step is non-improving when its accuracy does not beat the best seen so
    far; the search halts after ``patience`` consecutive such steps
    (``patience=0`` never halts early).  With ``runs > 1`` the RAND strategy
    is repeated under consecutive seeds and accuracies averaged.
    """
    exp = experiment_kw.pop("experiment", None) or Experiment(
        corpus, heldout, weights=weights, trainer=trainer, **experiment_kw)
    if runs < 1:
        raise ContractViolation("runs must be >= 1")
    steps: List[StepRecord] = []
    best: Optional[StepRecord] = None
    stale = 0
    halted = False
    for n in schedule.n_values:
        reps = runs if strategy.strategy == RAND else 1
        outs = [exp.run(SampleConfig(n, strategy.strategy, strategy.seed + r)) for r in range(reps)]
        top = max(outs, key=lambda s: s.heldout_accuracy)
        step = StepRecord(n, outs[0].sample_parses, outs[0].features,
                          float(np.mean([s.heldout_accuracy for s in outs])),
                          outs[0].best_iteration, top.model)
        if reps > 1:
            step.sample_parses = int(round(np.mean([s.sample_parses for s in outs])))
            step.features = int(round(np.mean([s.features for s in outs])))
        steps.append(step)
        if progress is not None:
            progress(step)
        log.info("n=%s parses=%d features=%d acc=%.2f", format_n(n), step.sample_parses,
                 step.features, step.heldout_accuracy)
        if best is None or step.heldout_accuracy > best.heldout_accuracy:
            best, stale = step, 0
        else:
            stale += 1
            if schedule.patience and stale >= schedule.patience:
                halted = n != schedule.n_values[-1]
                break
    return SearchResult(best.n, best.model, steps, halted)
