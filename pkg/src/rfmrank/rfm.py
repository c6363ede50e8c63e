"""Random field model: parse weights, partition function and parse selection.

Everything is computed in log space; ``psi`` and ``partition`` exponentiate
on demand.  The partition function sums over the training sample, never
over a full parse forest.
"""

from __future__ import annotations

import math
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .errors import ContractViolation, FormatError
from .features import ALL_TEMPLATES, FeatureKey, FeatureTable, FeatureVector

MODEL_MAGIC = "#RFM v1"


class Model:
    """Feature table plus one weight per feature id."""

    def __init__(self, table: FeatureTable, weights=None, templates=ALL_TEMPLATES):
        self.table = table
        if weights is None:
            weights = np.zeros(len(table))
        self.weights = np.array(weights, dtype=np.float64)
        self.templates = frozenset(templates)
        if self.weights.shape != (len(table),):
            raise ContractViolation(
                f"{len(self.weights)} weights for a table of {len(table)} features"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ContractViolation("model weights must be finite")

    def __len__(self):
        return len(self.table)

    def with_weights(self, weights) -> "Model":
        return Model(self.table, weights, self.templates)

    def norm(self) -> float:
        return float(np.linalg.norm(self.weights))


class SampleEntry(NamedTuple):
    sentence_id: str
    candidate: int
    fv: FeatureVector
    ref_prob: float


class Sample:
    """Selected candidate parses with their feature vectors and reference mass.

    The sparse count matrix (rows = entries) and per-row totals are built
    once and cached; the trainer works on those arrays.
    """

    def __init__(self, entries: Iterable[SampleEntry], n_features: Optional[int] = None,
                 check: bool = True):
        self.entries: List[SampleEntry] = list(entries)
        if n_features is None:
            n_features = 1 + max((max(e.fv.counts, default=-1) for e in self.entries), default=-1)
        self.n_features = n_features
        self._matrix = None
        if check and self.entries:
            total = math.fsum(e.ref_prob for e in self.entries)
            if any(e.ref_prob < 0 for e in self.entries) or abs(total - 1.0) > 1e-9:
                raise ContractViolation(f"reference probabilities must sum to 1, got {total}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ref_probs(self) -> np.ndarray:
        return np.array([e.ref_prob for e in self.entries], dtype=np.float64)

    @property
    def totals(self) -> np.ndarray:
        return np.array([e.fv.total for e in self.entries], dtype=np.int64)

    def matrix(self) -> sparse.csr_matrix:
        if self._matrix is None:
            self._matrix = counts_matrix([e.fv for e in self.entries], self.n_features)
        return self._matrix

    def sentences(self):
        """Map sentence id to the list of entry positions, in entry order."""
        groups = {}
        for pos, e in enumerate(self.entries):
            groups.setdefault(e.sentence_id, []).append(pos)
        return groups


def counts_matrix(fvs: Sequence[FeatureVector], n_features: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(fvs) + 1, dtype=np.int64)
    for r, fv in enumerate(fvs):
        indptr[r + 1] = indptr[r] + len(fv.counts)
    indices = np.fromiter((i for fv in fvs for i in fv.counts), dtype=np.int64, count=indptr[-1])
    data = np.fromiter((c for fv in fvs for c in fv.counts.values()), dtype=np.float64,
                       count=indptr[-1])
    if indices.size and indices.max() >= n_features:
        raise ContractViolation("feature id outside the table")
    return sparse.csr_matrix((data, indices, indptr), shape=(len(fvs), n_features))


def log_psi(model: Model, fv: FeatureVector) -> float:
    w = model.weights
    return math.fsum(w[i] * c for i, c in fv.counts.items())


def psi(model: Model, fv: FeatureVector) -> float:
    return math.exp(log_psi(model, fv))


def log_scores(model: Model, sample: Sample) -> np.ndarray:
    """Per-entry log psi for the whole sample."""
    if len(model) == 0:
        return np.zeros(len(sample))
    return sample.matrix() @ model.weights


def log_partition(model: Model, sample: Sample) -> float:
    if not len(sample):
        raise ContractViolation("partition function over an empty sample")
    return float(logsumexp(log_scores(model, sample)))


def partition(model: Model, sample: Sample) -> float:
    return math.exp(log_partition(model, sample))


def probability(model: Model, fv: FeatureVector, z: float) -> float:
    return math.exp(log_psi(model, fv) - math.log(z))


def sample_probabilities(model: Model, sample: Sample) -> np.ndarray:
    s = log_scores(model, sample)
    return np.exp(s - logsumexp(s))


def select_best(model: Model, candidates: Sequence[FeatureVector]) -> int:
    """Index of the highest-weight candidate; ties go to the lowest index."""
    if not candidates:
        raise ContractViolation("select_best needs at least one candidate")
    best, best_score = 0, -math.inf
    for k, fv in enumerate(candidates):
        s = log_psi(model, fv)
        if s > best_score:
            best, best_score = k, s
    return best


# -- model files -------------------------------------------------------------

def _template_tag(templates):
    return ",".join(sorted(templates))


def model_to_text(model: Model) -> str:
    lines = [f"{MODEL_MAGIC} features={len(model)} templates={_template_tag(model.templates)}"]
    lines.extend(f"{k}\t{w:.17g}" for k, w in zip(model.table.keys, model.weights))
    return "\n".join(lines) + "\n"


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(MODEL_MAGIC):
        raise FormatError("missing '#RFM v1' header", 1, path)
    fields = dict(f.split("=", 1) for f in lines[0][len(MODEL_MAGIC):].split() if "=" in f)
    templates = ALL_TEMPLATES
    if "templates" in fields:
        templates = frozenset(t for t in fields["templates"].split(",") if t)
    keys, weights = [], []
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        key, sep, w = line.rpartition("\t")
        if not sep:
            raise FormatError("expected '<key>\\t<weight>'", lineno, path)
        FeatureKey.parse(key)
        try:
            weights.append(float(w))
        except ValueError:
            raise FormatError(f"bad weight {w!r}", lineno, path) from None
        keys.append(key)
    if "features" in fields and int(fields["features"]) != len(keys):
        raise FormatError(f"header says {fields['features']} features, found {len(keys)}", 1, path)
    if keys != sorted(keys):
        raise FormatError("feature lines must be sorted by key", None, path)
    return Model(FeatureTable(keys), weights, templates)
