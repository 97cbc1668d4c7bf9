"""LIWC-style category dictionaries and normalized category-frequency features."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Corpus, UserDocument
from .stats import FeatureMatrix

logger = logging.getLogger(__name__)

__all__ = ["LexiconError", "Lexicon", "CategoryFeatureVector", "load_lexicon", "parse_lexicon",
           "match_token", "extract_features", "feature_matrix"]

WILDCARD = "*"

_ASCII_LOWER = str.maketrans({chr(c): chr(c + 32) for c in range(ord("A"), ord("Z") + 1)})


def _fold(s: str) -> str:
    # case-insensitive for ASCII letters only; other scripts compare exactly
    return s.translate(_ASCII_LOWER)


class LexiconError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)
        self.lineno = lineno


@dataclass(frozen=True)
class Lexicon:
    categories: dict[int, str]
    entries: tuple[tuple[str, frozenset[int]], ...]
    _exact: dict = field(init=False, repr=False, compare=False)
    _prefix: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((p, frozenset(c)) for p, c in self.entries))
        if len(set(self.categories.values())) != len(self.categories):
            raise LexiconError("category names must be unique")
        exact: dict[str, frozenset[int]] = {}
        prefix: dict[int, dict[str, frozenset[int]]] = {}
        seen = set()
        for pattern, cats in self.entries:
            if pattern in seen:
                raise LexiconError(f"duplicate pattern {pattern!r}")
            seen.add(pattern)
            unknown = cats - self.categories.keys()
            if unknown:
                raise LexiconError(f"pattern {pattern!r} references unknown categories {sorted(unknown)}")
            stem = _fold(pattern.rstrip(WILDCARD)) if pattern.endswith(WILDCARD) else None
            if stem is None:
                key = _fold(pattern)
                exact[key] = exact.get(key, frozenset()) | cats
            else:
                if not stem:
                    raise LexiconError("wildcard pattern with empty stem")
                bucket = prefix.setdefault(len(stem), {})
                bucket[stem] = bucket.get(stem, frozenset()) | cats
        object.__setattr__(self, "_exact", exact)
        object.__setattr__(self, "_prefix", dict(sorted(prefix.items())))

    @property
    def category_ids(self) -> list[int]:
        return sorted(self.categories)

    @property
    def category_names(self) -> list[str]:
        return [self.categories[i] for i in self.category_ids]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class CategoryFeatureVector:
    user_id: str
    values: dict[str, float]
    doc_length: int


def parse_lexicon(lines: Iterable[str]) -> Lexicon:
    """Parse the ``.dic`` layout: ``%`` / ``id<TAB>name`` lines / ``%`` / ``word<TAB>id...`` lines."""
    categories: dict[int, str] = {}
    entries: dict[str, set[int]] = {}
    state = "start"
    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n").lstrip("﻿")
        if not line.strip():
            continue
        if state == "start":
            if line.strip() != "%":
                raise LexiconError("dictionary must start with a '%' line", lineno)
            state = "header"
        elif state == "header":
            if line.strip() == "%":
                if not categories:
                    raise LexiconError("header defines no categories", lineno)
                state = "entries"
                continue
            parts = line.split()
            if len(parts) != 2 or not parts[0].isdigit():
                raise LexiconError(f"malformed header line {line!r} (expected 'id<TAB>name')", lineno)
            cid = int(parts[0])
            if cid in categories:
                raise LexiconError(f"category id {cid} defined twice", lineno)
            categories[cid] = parts[1]
        else:
            parts = line.split("\t") if "\t" in line else line.split()
            parts = [p.strip() for p in parts if p.strip()]
            word, ids = parts[0], parts[1:]
            if WILDCARD in word.rstrip(WILDCARD) or word.count(WILDCARD) > 1:
                raise LexiconError(f"only a single trailing wildcard is supported: {word!r}", lineno)
            if not word.rstrip(WILDCARD):
                raise LexiconError("empty pattern", lineno)
            if not ids:
                raise LexiconError(f"entry {word!r} lists no categories", lineno)
            cats = set()
            for tok in ids:
                if not tok.isdigit():
                    raise LexiconError(f"non-numeric category id {tok!r}", lineno)
                cid = int(tok)
                if cid not in categories:
                    raise LexiconError(f"entry {word!r} references undefined category {cid}", lineno)
                cats.add(cid)
            if word in entries:
                logger.warning("line %d: duplicate pattern %r merged", lineno, word)
            entries.setdefault(word, set()).update(cats)
    if state != "entries":
        raise LexiconError("unterminated header (missing closing '%')", lineno or None)
    return Lexicon(categories, tuple((w, frozenset(c)) for w, c in entries.items()))


def load_lexicon(path: str | Path) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_lexicon(fh)
        except LexiconError as exc:
            raise LexiconError(f"{path}: {exc}") from None


def match_token(lexicon: Lexicon, token: str) -> frozenset[int]:
    """Union of the categories of every exact or prefix entry matching ``token``."""
    key = _fold(token)
    cats = lexicon._exact.get(key, frozenset())
    for length, stems in lexicon._prefix.items():
        if length > len(key):
            break
        hit = stems.get(key[:length])
        if hit:
            cats = cats | hit
    return cats


def _counts(tokens: Iterable[str], lexicon: Lexicon) -> tuple[dict[int, int], int]:
    counts = dict.fromkeys(lexicon.categories, 0)
    memo: dict[str, frozenset[int]] = {}
    n = 0
    for tok in tokens:
        n += 1
        cats = memo.get(tok)
        if cats is None:
            cats = memo[tok] = match_token(lexicon, tok)
        for c in cats:
            counts[c] += 1
    return counts, n


def extract_features(doc: UserDocument, lexicon: Lexicon) -> CategoryFeatureVector:
    """Per-category share of the document's tokens; an empty document gives all zeros."""
    counts, n = _counts(doc.tokens, lexicon)
    values = {lexicon.categories[c]: (counts[c] / n if n else 0.0) for c in lexicon.category_ids}
    return CategoryFeatureVector(doc.user_id, values, n)


def feature_matrix(corpus: Corpus, lexicon: Lexicon) -> FeatureMatrix:
    """LIWC feature table for a corpus, one column per category in id order."""
    names = lexicon.category_names
    rows = []
    for doc in corpus.documents:
        vec = extract_features(doc, lexicon)
        rows.append([vec.values[c] for c in names])
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return FeatureMatrix(tuple(corpus.user_ids), tuple(names), values)
