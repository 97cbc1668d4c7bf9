"""Microblog corpus ingestion: cleaning, segmentation, filtering and per-user aggregation.

Every user's messages are collapsed into one token document. The cleaned
text length in UTF-8 bytes is tracked so that users with too little text
can be dropped before feature extraction.
"""
from __future__ import annotations

import csv
import functools
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

__all__ = [
    "CorpusError",
    "RawMessage",
    "UserDocument",
    "Corpus",
    "SegmenterConfig",
    "clean_message",
    "segment",
    "filter_tokens",
    "aggregate_users",
    "filter_users",
    "high_risk_subset",
    "load_wordlist",
    "read_messages",
    "read_scores",
    "read_corpus",
    "write_corpus",
]

DEFAULT_MIN_BYTES = 20 * 1024


class CorpusError(ValueError):
    """Raised for invalid corpus input or segmenter configuration."""


@dataclass(frozen=True)
class RawMessage:
    user_id: str
    text: str
    is_retweet: bool = False

    def __post_init__(self):
        if not self.user_id:
            raise CorpusError("RawMessage.user_id must be non-empty")


@dataclass(frozen=True)
class UserDocument:
    user_id: str
    tokens: tuple[str, ...]
    raw_byte_length: int = 0
    score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if any(t == "" for t in self.tokens):
            raise CorpusError(f"empty token in document {self.user_id!r}")
        if self.raw_byte_length < 0:
            raise CorpusError("raw_byte_length must be >= 0")

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[UserDocument, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for doc in self.documents:
            if doc.user_id in seen:
                raise CorpusError(f"duplicate user_id {doc.user_id!r} in corpus")
            seen.add(doc.user_id)

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def user_ids(self) -> list[str]:
        return [d.user_id for d in self.documents]

    @property
    def scores(self) -> list[float | None]:
        return [d.score for d in self.documents]

    def with_scores(self, scores: Mapping[str, float]) -> "Corpus":
        docs = [replace(d, score=float(scores[d.user_id])) if d.user_id in scores else d
                for d in self.documents]
        n = sum(d.user_id in scores for d in self.documents)
        return Corpus(docs, _append(self.provenance, f"scores attached to {n}/{len(docs)} users"))


def _append(provenance: str, step: str) -> str:
    return f"{provenance}; {step}" if provenance else step


@dataclass(frozen=True)
class SegmenterConfig:
    """How message text is turned into tokens.

    ``mode`` is ``"pre_segmented"`` (split on whitespace) or ``"max_match"``
    (forward maximum matching against a word list). The word list comes from
    ``dictionary_path`` or, for in-memory use, ``dictionary``.
    """

    mode: str = "pre_segmented"
    dictionary_path: str | None = None
    stopword_path: str | None = None
    dictionary: frozenset[str] | None = None
    stopwords: frozenset[str] | None = None

    def __post_init__(self):
        if self.mode not in ("pre_segmented", "max_match"):
            raise CorpusError(f"unknown segmenter mode {self.mode!r}")

    @functools.cached_property
    def _lookup(self) -> tuple[frozenset[str], int]:
        words = self.words()
        return words, max(len(w) for w in words)

    def words(self) -> frozenset[str]:
        if self.dictionary is not None:
            words = frozenset(self.dictionary)
        elif self.dictionary_path is not None:
            words = load_wordlist(self.dictionary_path)
        else:
            raise CorpusError("max_match segmentation requires a dictionary")
        if not words:
            raise CorpusError("max_match segmentation requires a dictionary with at least one entry")
        return words

    def stopword_set(self) -> frozenset[str]:
        if self.stopwords is not None:
            return frozenset(self.stopwords)
        if self.stopword_path is not None:
            return load_wordlist(self.stopword_path)
        return frozenset()


@functools.lru_cache(maxsize=16)
def load_wordlist(path: str | Path) -> frozenset[str]:
    """Read a UTF-8 word list, one entry per line; blank lines are ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            return frozenset(line.strip() for line in fh if line.strip())
    except OSError as exc:
        raise CorpusError(f"cannot read word list {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# cleaning

_RETWEET = re.compile(r"//\s*@")
_REPLY = re.compile(r"^\s*回复\s*@[^:：\s]+\s*[:：]")
_HASHTAG = re.compile(r"#([^#\n]{1,100})#")
_URL = re.compile(r"(?:https?://|www\.)[A-Za-z0-9\-._~:/?#\[\]@!$&'()*+,;=%]+")
_MENTION = re.compile(r"@[\w\-]{1,30}[:：]?")
_EMOTICON = re.compile(r"\[[^\[\]\s]{1,8}\]")
_SPACE = re.compile(r"\s+")


def clean_message(raw: RawMessage | str, keep_hashtag_text: bool = False) -> str:
    """Strip microblog markup so only the author's own words remain.

    Removes everything from a ``//@`` repost delimiter onward, reply
    prefixes (``回复@name:``), ``#topic#`` hashtags, URLs, @-mentions and
    bracketed emoticon codes such as ``[哈哈]``, then collapses whitespace.
    Messages flagged ``is_retweet`` are someone else's text and clean to "".

    >>> clean_message("今天天气 //@someone: 转发内容")
    '今天天气'
    >>> clean_message("hello http://t.cn/abc world")
    'hello world'
    """
    if isinstance(raw, RawMessage):
        if raw.is_retweet:
            return ""
        text = raw.text
    else:
        text = raw
    m = _RETWEET.search(text)
    if m:
        text = text[:m.start()]
    text = _REPLY.sub(" ", text)
    text = _HASHTAG.sub((lambda m: f" {m.group(1)} ") if keep_hashtag_text else " ", text)
    text = _URL.sub(" ", text)
    text = _MENTION.sub(" ", text)
    text = _EMOTICON.sub(" ", text)
    return _SPACE.sub(" ", text).strip()


# ---------------------------------------------------------------------------
# segmentation

def _is_ascii_alnum(ch: str) -> bool:
    return ch.isascii() and ch.isalnum()


def _max_match(chunk: str, words: frozenset[str], max_len: int) -> list[str]:
    out = []
    i, n = 0, len(chunk)
    while i < n:
        for j in range(min(n, i + max_len), i, -1):
            if chunk[i:j] in words:
                out.append(chunk[i:j])
                i = j
                break
        else:
            # unmatched: ASCII letter/digit runs stay whole, anything else is one char
            j = i + 1
            if _is_ascii_alnum(chunk[i]):
                while j < n and _is_ascii_alnum(chunk[j]):
                    j += 1
            out.append(chunk[i:j])
            i = j
    return out


def segment(text: str, config: SegmenterConfig | None = None) -> list[str]:
    """Split ``text`` into tokens.

    In ``max_match`` mode each whitespace-separated chunk is segmented by
    forward maximum matching; characters not covered by any dictionary word
    become single-character tokens (ASCII alphanumeric runs are kept whole).
    Joining the result reproduces the non-whitespace input exactly.

    >>> segment("中国人民", SegmenterConfig("max_match", dictionary=frozenset({"中国", "人民"})))
    ['中国', '人民']
    """
    config = config or SegmenterConfig()
    if config.mode == "pre_segmented":
        return text.split()
    words, max_len = config._lookup
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_max_match(chunk, words, max_len))
    return tokens


def filter_tokens(tokens: Iterable[str], stopwords: frozenset[str] | set[str] = frozenset()) -> list[str]:
    """Drop stopwords and single-character tokens, preserving order."""
    return [t for t in tokens if len(t) > 1 and t not in stopwords]


# ---------------------------------------------------------------------------
# aggregation and filtering

def aggregate_users(
    messages: Iterable[RawMessage],
    config: SegmenterConfig | None = None,
    scores: Mapping[str, float] | None = None,
    keep_hashtag_text: bool = False,
) -> Corpus:
    """Collapse messages into one filtered token document per user.

    Users appear in order of first occurrence and each user's messages keep
    their input order. ``raw_byte_length`` counts UTF-8 bytes of the cleaned
    text, before tokenization.
    """
    config = config or SegmenterConfig()
    stopwords = config.stopword_set()
    tokens: dict[str, list[str]] = {}
    nbytes: dict[str, int] = {}
    n_messages = 0
    for msg in messages:
        n_messages += 1
        text = clean_message(msg, keep_hashtag_text=keep_hashtag_text)
        bucket = tokens.setdefault(msg.user_id, [])
        nbytes[msg.user_id] = nbytes.get(msg.user_id, 0) + len(text.encode("utf-8"))
        if text:
            bucket.extend(filter_tokens(segment(text, config), stopwords))
    scores = scores or {}
    docs = [
        UserDocument(uid, toks, nbytes[uid], float(scores[uid]) if uid in scores else None)
        for uid, toks in tokens.items()
    ]
    prov = f"{n_messages} messages aggregated into {len(docs)} users (segmenter={config.mode})"
    return Corpus(docs, prov)


def filter_users(corpus: Corpus, min_bytes: int = DEFAULT_MIN_BYTES, require_score: bool = False) -> Corpus:
    """Drop users whose cleaned text is shorter than ``min_bytes`` (and unscored users if asked)."""
    if min_bytes < 0:
        raise CorpusError("min_bytes must be >= 0")
    kept = [d for d in corpus.documents if d.raw_byte_length >= min_bytes]
    if require_score:
        kept = [d for d in kept if d.score is not None]
    step = f"filter_users(min_bytes={min_bytes}, require_score={require_score}): {len(corpus)} -> {len(kept)}"
    logger.info(step)
    return Corpus(kept, _append(corpus.provenance, step))


def high_risk_subset(corpus: Corpus) -> Corpus:
    """Users scoring strictly above mean + one sample standard deviation."""
    if len(corpus) < 2:
        raise CorpusError("high_risk_subset needs at least 2 documents")
    missing = [d.user_id for d in corpus.documents if d.score is None]
    if missing:
        raise CorpusError(f"high_risk_subset requires scores; unscored user {missing[0]!r}")
    scores = [d.score for d in corpus.documents]
    n = len(scores)
    mean = math.fsum(scores) / n
    sd = math.sqrt(math.fsum((s - mean) ** 2 for s in scores) / (n - 1))
    threshold = mean + sd
    kept = [d for d in corpus.documents if d.score > threshold]
    step = f"high_risk_subset(threshold={threshold:.6g}): {n} -> {len(kept)}"
    return Corpus(kept, _append(corpus.provenance, step))


# ---------------------------------------------------------------------------
# file formats

def read_messages(path: str | Path) -> list[RawMessage]:
    """Read JSON-lines messages: ``{"user_id": ..., "text": ..., ["is_retweet": bool]}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(RawMessage(str(obj["user_id"]), str(obj["text"]), bool(obj.get("is_retweet", False))))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed message record ({exc})") from exc
    return out


def read_scores(path: str | Path) -> dict[str, float]:
    """Read a ``user_id,score`` CSV into a mapping."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"user_id", "score"} <= set(reader.fieldnames):
            raise CorpusError(f"{path}: score file needs a 'user_id,score' header")
        scores = {}
        for lineno, row in enumerate(reader, 2):
            try:
                scores[row["user_id"]] = float(row["score"])
            except (TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad score {row.get('score')!r}") from exc
    return scores


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.documents:
            obj = {"user_id": d.user_id, "tokens": list(d.tokens), "raw_byte_length": d.raw_byte_length}
            if d.score is not None:
                obj["score"] = d.score
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_corpus(path: str | Path, provenance: str | None = None) -> Corpus:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                docs.append(UserDocument(str(obj["user_id"]), obj["tokens"], int(obj.get("raw_byte_length", 0)),
                                         None if obj.get("score") is None else float(obj["score"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed corpus record ({exc})") from exc
    return Corpus(docs, provenance if provenance is not None else f"read from {Path(path).name}")


def documents_by_id(corpus: Corpus) -> dict[str, UserDocument]:
    return {d.user_id: d for d in corpus.documents}


def subset(corpus: Corpus, user_ids: Sequence[str], note: str = "") -> Corpus:
    by_id = documents_by_id(corpus)
    return Corpus([by_id[u] for u in user_ids], _append(corpus.provenance, note or f"subset of {len(user_ids)} users"))
