"""Per-sentence candidate selection: uniform random, PCFG top-n, reference top-n."""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from .errors import ContractViolation, FormatError
from .features import extract_local_trees
from .reference import ReferenceDistribution
from .treebank import Corpus, ParseTree, SentenceRecord

RAND = "rand"
PCFG = "pcfg"
REF = "ref"
STRATEGIES = (RAND, PCFG, REF)

UNSEEN_RULE_PROB = 1e-9
_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 stream (Steele, Lea & Flood); bit-identical on every platform."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection, no modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next()
            if x < limit:
                return x % bound


def sentence_seed(seed: int, sid: str) -> int:
    """Stable per-sentence seed (Python's ``hash`` is salted per process)."""
    digest = hashlib.blake2b(sid.encode("utf-8"), digest_size=8).digest()
    return (seed ^ int.from_bytes(digest, "little")) & _MASK64


@dataclass(frozen=True)
class SampleConfig:
    n: Optional[int]  # None selects every candidate
    strategy: str = RAND
    seed: int = 0

    def __post_init__(self):
        if self.n is not None and self.n < 1:
            raise ContractViolation("n must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ContractViolation(f"unknown strategy {self.strategy!r}")


def _cap(n, size):
    return size if n is None else min(n, size)


def sample_rand(record: SentenceRecord, n: Optional[int], seed: int) -> List[int]:
    """``min(n, |candidates|)`` distinct indices, uniformly, via partial Fisher-Yates."""
    size = len(record.candidates)
    k = _cap(n, size)
    if k == size:
        return list(range(size))
    rng = SplitMix64(seed)
    pool = list(range(size))
    for i in range(k):
        j = i + rng.below(size - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:k])


class PcfgBackbone:
    def __init__(self, rule_probs: Mapping[tuple, float], unseen: float = UNSEEN_RULE_PROB):
        self.rule_probs = dict(rule_probs)
        self.unseen = unseen
        self._log = {r: math.log(p) for r, p in self.rule_probs.items()}
        self._log_unseen = math.log(unseen)

    def prob(self, parent: str, children: Sequence[str]) -> float:
        return self.rule_probs.get((parent, tuple(children)), self.unseen)

    def log_score(self, tree: ParseTree) -> float:
        return math.fsum(
            self._log.get((lt.parent, lt.child_labels), self._log_unseen)
            for lt in extract_local_trees(tree)
        )


def train_pcfg(trees: Iterable[ParseTree]) -> PcfgBackbone:
    """Relative-frequency rule probabilities over depth-one local trees."""
    rules: Counter = Counter()
    parents: Counter = Counter()
    seen_any = False
    for tree in trees:
        seen_any = True
        for lt in extract_local_trees(tree):
            rules[lt.parent, lt.child_labels] += 1
            parents[lt.parent] += 1
    if not seen_any:
        raise ContractViolation("train_pcfg needs at least one tree")
    return PcfgBackbone({r: c / parents[r[0]] for r, c in rules.items()})


def _top_n(scores: Sequence[float], n):
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    return sorted(order[: _cap(n, len(scores))])


def sample_pcfg(record: SentenceRecord, backbone: PcfgBackbone, n: Optional[int]) -> List[int]:
    return _top_n([backbone.log_score(c) for c in record.candidates], n)


def sample_ref(record: SentenceRecord, ref: ReferenceDistribution, n: Optional[int]) -> List[int]:
    per = ref.sentence(record.id)
    missing = [k for k in range(len(record.candidates)) if k not in per]
    if missing:
        raise KeyError(f"reference lacks candidates {missing} of sentence {record.id!r}")
    return _top_n([per[k] for k in range(len(record.candidates))], n)


def backbone_for(corpus: Corpus) -> PcfgBackbone:
    """Train on gold trees; fall back to every candidate when no gold exists."""
    golds = [rec.gold for rec in corpus]
    if golds:
        return train_pcfg(golds)
    return train_pcfg(c for rec in corpus for c in rec.candidates)


def select(corpus: Corpus, cfg: SampleConfig, backbone: Optional[PcfgBackbone] = None,
           ref: Optional[ReferenceDistribution] = None) -> Dict[str, List[int]]:
    """Apply one strategy to every record of ``corpus``."""
    out = {}
    if cfg.strategy == PCFG and backbone is None:
        backbone = backbone_for(corpus)
    for rec in corpus:
        if cfg.strategy == RAND:
            out[rec.id] = sample_rand(rec, cfg.n, sentence_seed(cfg.seed, rec.id))
        elif cfg.strategy == PCFG:
            out[rec.id] = sample_pcfg(rec, backbone, cfg.n)
        else:
            if ref is None:
                raise ContractViolation("REF sampling needs a reference distribution")
            out[rec.id] = sample_ref(rec, ref, cfg.n)
    return out


# -- sample manifests ----------------------------------------------------------

def manifest_to_text(selection: Mapping[str, Sequence[int]]) -> str:
    return "".join(f"{sid}\t{','.join(map(str, idxs))}\n" for sid, idxs in selection.items())


def write_manifest(selection, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest_to_text(selection))


def read_manifest(path) -> Dict[str, List[int]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            sid, sep, idxs = line.partition("\t")
            if not sep or sid in out:
                raise FormatError("expected '<id>\\t<indices>' with unique ids", lineno, path)
            try:
                out[sid] = [int(x) for x in idxs.split(",") if x]
            except ValueError:
                raise FormatError(f"bad index list {idxs!r}", lineno, path) from None
    return out
