"""Small synthetic samples shared by trainer, kernel and acceptance tests."""

import numpy as np

from rfmrank.features import FeatureTable, FeatureVector
from rfmrank.rfm import Sample, SampleEntry


def feature_table(k):
    return FeatureTable([f"RULE|F{i:03d}|" for i in range(k)])


def two_parse_sample(er=0.7):
    """Parse A fires the single feature once, parse B fires nothing."""
    entries = [SampleEntry("s", 0, FeatureVector({0: 1}), er),
               SampleEntry("s", 1, FeatureVector({}), 1.0 - er)]
    return Sample(entries, 1), feature_table(1)


def random_sample(rng: np.random.Generator, max_sentences=10, max_features=20, max_cands=6,
                  max_count=3, density=0.3):
    """Random sample with per-sentence equal reference mass."""
    k = int(rng.integers(1, max_features + 1))
    n_sent = int(rng.integers(1, max_sentences + 1))
    entries = []
    for s in range(n_sent):
        n = int(rng.integers(1, max_cands + 1))
        raw = rng.random(n) + 1e-3
        raw = raw / raw.sum() / n_sent
        for c in range(n):
            on = np.flatnonzero(rng.random(k) < density)
            counts = {int(i): int(rng.integers(1, max_count + 1)) for i in on}
            entries.append(SampleEntry(f"s{s}", c, FeatureVector(counts), float(raw[c])))
    total = sum(e.ref_prob for e in entries)
    entries = [e._replace(ref_prob=e.ref_prob / total) for e in entries]
    return Sample(entries, k), feature_table(k)
