"""Feature templates over depth-one local trees.

Three templates are available:

``RULE``
    the local tree of rule names, terminals suppressed;
``PP_HEAD``
    the local tree decorated with the head word of one of its PP daughters;
``HEAD_LEX``
    the local tree with the parent decorated with its own head word.

Keys serialize as ``RULE|parent|c1,c2`` / ``PPH|parent|c1,c2|head`` /
``HLEX|parent^head|c1,c2``.  Labels never contain ``|``, ``,`` or ``^`` so
the split is unambiguous even for heads containing those characters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

from .errors import ContractViolation, FormatError
from .treebank import ParseTree

RULE = "RULE"
PP_HEAD = "PP_HEAD"
HEAD_LEX = "HEAD_LEX"
ALL_TEMPLATES = frozenset({RULE, PP_HEAD, HEAD_LEX})

_TAGS = {RULE: "RULE", PP_HEAD: "PPH", HEAD_LEX: "HLEX"}


class LocalTree(NamedTuple):
    parent: str
    parent_head: Optional[str]
    children: Tuple[Tuple[str, Optional[str]], ...]  # (label, head), terminals dropped

    @property
    def child_labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.children)


@dataclass(frozen=True, order=True)
class FeatureKey:
    template: str
    parent_label: str
    child_labels: Tuple[str, ...]
    anchor_head: Optional[str] = None

    def __post_init__(self):
        if self.template not in ALL_TEMPLATES:
            raise ContractViolation(f"unknown template {self.template!r}")
        if (self.template == RULE) != (self.anchor_head is None):
            raise ContractViolation("only RULE keys lack an anchor head")

    def serialize(self) -> str:
        kids = ",".join(self.child_labels)
        if self.template == RULE:
            return f"RULE|{self.parent_label}|{kids}"
        if self.template == PP_HEAD:
            return f"PPH|{self.parent_label}|{kids}|{self.anchor_head}"
        return f"HLEX|{self.parent_label}^{self.anchor_head}|{kids}"

    @classmethod
    def parse(cls, text: str) -> "FeatureKey":
        tag, sep, rest = text.partition("|")
        if not sep:
            raise FormatError(f"bad feature key {text!r}")
        if tag == "RULE":
            parent, _, kids = rest.partition("|")
            return cls(RULE, parent, _split_kids(kids))
        if tag == "PPH":
            parts = rest.split("|", 2)
            if len(parts) != 3:
                raise FormatError(f"bad feature key {text!r}")
            return cls(PP_HEAD, parts[0], _split_kids(parts[1]), parts[2])
        if tag == "HLEX":
            anchored, _, kids = rest.rpartition("|")
            parent, _, head = anchored.partition("^")
            return cls(HEAD_LEX, parent, _split_kids(kids), head)
        raise FormatError(f"bad feature key {text!r}")

    def __str__(self):
        return self.serialize()


def _split_kids(text):
    return tuple(text.split(",")) if text else ()


def default_pp_predicate(label: str) -> bool:
    return label.startswith("PP")


def pp_prefix_predicate(prefix: str) -> Callable[[str], bool]:
    return lambda label: label.startswith(prefix)


def extract_local_trees(parse: ParseTree) -> list:
    """One depth-one local tree per internal node, in pre-order."""
    return [
        LocalTree(
            node.label,
            node.head,
            tuple((c.label, c.head) for c in node.children if not isinstance(c, str)),
        )
        for node in parse.subtrees()
    ]


def instantiate_templates(
    parse: ParseTree,
    templates: Iterable[str] = ALL_TEMPLATES,
    is_pp: Callable[[str], bool] = default_pp_predicate,
) -> Counter:
    """Multiset of serialized feature keys fired by ``parse``."""
    templates = frozenset(templates)
    out: Counter = Counter()
    for lt in extract_local_trees(parse):
        kids = ",".join(lt.child_labels)
        if RULE in templates:
            out[f"RULE|{lt.parent}|{kids}"] += 1
        if PP_HEAD in templates:
            for label, head in lt.children:
                if head is not None and is_pp(label):
                    out[f"PPH|{lt.parent}|{kids}|{head}"] += 1
        if HEAD_LEX in templates and lt.parent_head is not None:
            out[f"HLEX|{lt.parent}^{lt.parent_head}|{kids}"] += 1
    return out


def instantiate_keys(parse, templates=ALL_TEMPLATES, is_pp=default_pp_predicate) -> Counter:
    """Like :func:`instantiate_templates` but keyed by :class:`FeatureKey`."""
    return Counter(
        {FeatureKey.parse(k): c for k, c in instantiate_templates(parse, templates, is_pp).items()}
    )


@dataclass(frozen=True)
class FeatureVector:
    counts: Dict[int, int]
    total: int = field(default=None)

    def __post_init__(self):
        if self.total is None:
            object.__setattr__(self, "total", sum(self.counts.values()))

    def __len__(self):
        return len(self.counts)


class FeatureTable:
    """Dense ids over serialized feature keys, ordered lexicographically."""

    def __init__(self, keys: Sequence[str], min_count: int = 1):
        self.keys = tuple(keys)
        self.index = {k: i for i, k in enumerate(self.keys)}
        self.min_count = min_count
        if len(self.index) != len(self.keys):
            raise ContractViolation("duplicate feature keys")

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self.index

    def __eq__(self, other):
        return isinstance(other, FeatureTable) and self.keys == other.keys

    def feature_key(self, i: int) -> FeatureKey:
        return FeatureKey.parse(self.keys[i])

    def vectorize(self, instantiations: Counter) -> FeatureVector:
        """Map a serialized-key multiset onto table ids, dropping unknown keys."""
        index = self.index
        counts = {index[k]: c for k, c in instantiations.items() if k in index}
        return FeatureVector(dict(sorted(counts.items())))


def build_feature_table(
    parses: Sequence[ParseTree],
    templates: Iterable[str] = ALL_TEMPLATES,
    min_count: int = 1,
    is_pp: Callable[[str], bool] = default_pp_predicate,
    instantiations: Optional[Sequence[Counter]] = None,
) -> FeatureTable:
    """Keep keys occurring at least ``min_count`` times over all ``parses``.

    ``instantiations`` may carry precomputed multisets (one per parse) to
    skip re-walking trees.
    """
    if min_count < 1:
        raise ContractViolation("min_count must be positive")
    if instantiations is None:
        if not parses:
            raise ContractViolation("cannot build a feature table from an empty sample")
        instantiations = [instantiate_templates(p, templates, is_pp) for p in parses]
    elif not instantiations:
        raise ContractViolation("cannot build a feature table from an empty sample")
    totals: Counter = Counter()
    for inst in instantiations:
        totals.update(inst)
    return FeatureTable(sorted(k for k, c in totals.items() if c >= min_count), min_count)


def featurize(
    parse: ParseTree,
    table: FeatureTable,
    templates: Iterable[str] = ALL_TEMPLATES,
    is_pp: Callable[[str], bool] = default_pp_predicate,
) -> FeatureVector:
    return table.vectorize(instantiate_templates(parse, templates, is_pp))
