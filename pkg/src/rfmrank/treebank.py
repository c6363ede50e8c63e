"""Corpus of sentences with gold trees and candidate parses.

The on-disk format is line oriented::

    #SENT s1
    tokens: unimpeded by traffic
    gold: (AP (A1 unimpeded (PP (P1 by (N1 traffic)))))
    parse: (AP/a1^unimpeded (A1/app1^unimpeded unimpeded (PP/p1^by ...)))
    parse: ...

Blank lines separate records.  Heads hang off labels after a ``^`` and may
be omitted anywhere.  Span indices are 0-based and end-exclusive.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Tuple, Union

from .errors import ContractViolation, FormatError, IntegrityError

LABEL_RE = re.compile(r"[A-Za-z0-9_/:+.\-]+\Z")
_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


@dataclass(frozen=True)
class ParseTree:
    label: str
    children: Tuple[Union["ParseTree", str], ...]
    head: Optional[str] = None

    def __post_init__(self):
        if not self.children:
            raise ContractViolation(f"node {self.label!r} has no children")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    def leaves(self) -> list:
        out = []
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, str):
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def subtrees(self) -> Iterator["ParseTree"]:
        """Internal nodes in pre-order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(c for c in reversed(node.children) if not isinstance(c, str))

    def num_internal(self) -> int:
        return sum(1 for _ in self.subtrees())

    def strip_heads(self) -> "ParseTree":
        return ParseTree(
            self.label,
            tuple(c if isinstance(c, str) else c.strip_heads() for c in self.children),
        )

    def __str__(self):
        return format_tree(self)


def format_tree(tree: ParseTree) -> str:
    parts = []

    def emit(node):
        if isinstance(node, str):
            parts.append(node)
            return
        parts.append("(" + node.label + ("^" + node.head if node.head is not None else ""))
        for child in node.children:
            parts.append(" ")
            emit(child)
        parts.append(")")

    emit(tree)
    return "".join(parts)


def _split_label(text: str, line):
    label, sep, head = text.partition("^")
    if not LABEL_RE.match(label):
        raise FormatError(f"bad label {label!r}", line)
    if sep and not head:
        raise FormatError(f"empty head after {label!r}^", line)
    return label, (head if sep else None)


def parse_tree(text: str, line: Optional[int] = None) -> ParseTree:
    """Parse one bracketed tree. ``line`` is only used for error messages."""
    toks = _TOKEN_RE.findall(text)
    if not toks or toks[0] != "(":
        raise FormatError("tree must start with '('", line)
    # (label, head, children) frames
    stack: list = []
    result = None
    i = 0
    while i < len(toks):
        tok = toks[i]
        if result is not None:
            raise FormatError(f"trailing material after tree: {tok!r}", line)
        if tok == "(":
            if i + 1 >= len(toks) or toks[i + 1] in "()":
                raise FormatError("missing label after '('", line)
            label, head = _split_label(toks[i + 1], line)
            stack.append((label, head, []))
            i += 2
            continue
        if tok == ")":
            if not stack:
                raise FormatError("unbalanced ')'", line)
            label, head, children = stack.pop()
            if not children:
                raise FormatError(f"node {label!r} has no children", line)
            node = ParseTree(label, tuple(children), head)
            if stack:
                stack[-1][2].append(node)
            else:
                result = node
        else:
            if not stack:
                raise FormatError(f"token {tok!r} outside brackets", line)
            stack[-1][2].append(tok)
        i += 1
    if stack:
        raise FormatError("unbalanced '(': missing ')'", line)
    return result


def labeled_spans(tree: ParseTree) -> Counter:
    """Multiset of ``(label, start, end)``, one per internal node."""
    spans: Counter = Counter()

    def walk(node, start):
        pos = start
        for child in node.children:
            pos = pos + 1 if isinstance(child, str) else walk(child, pos)
        spans[node.label, start, pos] += 1
        return pos

    walk(tree, 0)
    return spans


@dataclass(frozen=True)
class SentenceRecord:
    id: str
    tokens: Tuple[str, ...]
    gold: ParseTree
    candidates: Tuple[ParseTree, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise IntegrityError(f"sentence {self.id!r} has no candidate parses")
        if tuple(self.gold.leaves()) != self.tokens:
            raise IntegrityError(f"sentence {self.id!r}: gold yield differs from tokens")
        for k, cand in enumerate(self.candidates):
            if tuple(cand.leaves()) != self.tokens:
                raise IntegrityError(
                    f"sentence {self.id!r}: candidate {k} yield differs from tokens"
                )


@dataclass(frozen=True)
class Corpus:
    records: Tuple[SentenceRecord, ...] = ()
    _by_id: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        by_id = {}
        for rec in self.records:
            if rec.id in by_id:
                raise IntegrityError(f"duplicate sentence id {rec.id!r}")
            by_id[rec.id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, sid: str) -> SentenceRecord:
        return self._by_id[sid]

    def __contains__(self, sid):
        return sid in self._by_id

    def ids(self):
        return list(self._by_id)

    def subset(self, ids: Iterable[str]) -> "Corpus":
        return Corpus(tuple(self._by_id[i] for i in ids))


def _iter_blocks(lines: Iterable[str]):
    block, start = [], None
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            if block:
                yield start, block
                block = []
            continue
        if line.startswith("#SENT") and block:
            yield start, block
            block = []
        if not block:
            start = lineno
        block.append((lineno, line))
    if block:
        yield start, block


def _parse_block(block, path) -> SentenceRecord:
    lineno, first = block[0]
    if not first.startswith("#SENT "):
        raise FormatError("record must start with '#SENT <id>'", lineno, path)
    sid = first[len("#SENT "):].strip()
    if not sid or len(sid.split()) != 1:
        raise FormatError("sentence id must be a single non-empty word", lineno, path)
    tokens = gold = None
    cands = []
    for lineno, line in block[1:]:
        key, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"expected 'key: value', got {line!r}", lineno, path)
        value = value.strip()
        if key == "tokens":
            if tokens is not None:
                raise FormatError("duplicate tokens line", lineno, path)
            tokens = tuple(value.split())
            if any(t in ("(", ")") or "(" in t or ")" in t for t in tokens):
                raise FormatError("tokens may not contain parentheses", lineno, path)
        elif key == "gold":
            if gold is not None:
                raise FormatError("duplicate gold line", lineno, path)
            gold = _tree(value, lineno, path)
        elif key == "parse":
            cands.append(_tree(value, lineno, path))
        else:
            raise FormatError(f"unknown field {key!r}", lineno, path)
    start = block[0][0]
    if tokens is None:
        raise FormatError(f"sentence {sid!r} lacks a tokens line", start, path)
    if gold is None:
        raise FormatError(f"sentence {sid!r} lacks a gold line", start, path)
    if not cands:
        raise FormatError(f"sentence {sid!r} has no parse lines", start, path)
    return SentenceRecord(sid, tokens, gold, tuple(cands))


def _tree(value, lineno, path):
    try:
        return parse_tree(value, lineno)
    except FormatError as err:
        if path is None or err.path is not None:
            raise
        raise FormatError(err.message, lineno, path) from None


def parse_corpus(lines: Iterable[str], path=None) -> Corpus:
    records, seen = [], {}
    for start, block in _iter_blocks(lines):
        rec = _parse_block(block, path)
        if rec.id in seen:
            raise IntegrityError(
                f"duplicate sentence id {rec.id!r} (lines {seen[rec.id]} and {start})"
            )
        seen[rec.id] = start
        records.append(rec)
    return Corpus(tuple(records))


def read_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, path)


def corpus_to_text(corpus: Corpus) -> str:
    out = []
    for rec in corpus:
        out.append(f"#SENT {rec.id}")
        out.append("tokens: " + " ".join(rec.tokens))
        out.append("gold: " + format_tree(rec.gold))
        out.extend("parse: " + format_tree(c) for c in rec.candidates)
        out.append("")
    return "\n".join(out)


def write_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(corpus_to_text(corpus), encoding="utf-8")

