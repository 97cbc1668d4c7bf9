"""Synthetic corpora with planted topics and a score driven by one topic's share.

Topic vocabularies are disjoint ASCII pseudo-words (``t3w07``), so messages
can be fed through the ``pre_segmented`` path unchanged.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, RawMessage, SegmenterConfig, aggregate_users

__all__ = ["PlantedCorpus", "planted_topic_corpus", "topic_word_names", "planted_lexicon_text", "write_fixture",
           "bundled_fixture"]


def topic_word_names(n_topics: int, words_per_topic: int) -> list[list[str]]:
    return [[f"t{k}w{j:02d}" for j in range(words_per_topic)] for k in range(n_topics)]


@dataclass
class PlantedCorpus:
    messages: list[RawMessage]
    scores: dict[str, float]
    theta: np.ndarray
    topic_words: list[list[str]]
    planted_topic: int
    user_ids: list[str]

    def corpus(self) -> Corpus:
        return aggregate_users(self.messages, SegmenterConfig("pre_segmented"), self.scores)

    def write(self, directory: str | Path, messages_name: str = "messages.jsonl",
              scores_name: str = "scores.csv", user_ids: list[str] | None = None) -> tuple[Path, Path]:
        """Write messages (JSON lines) and scores (CSV), optionally for a subset of users."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        keep = set(self.user_ids if user_ids is None else user_ids)
        mpath, spath = directory / messages_name, directory / scores_name
        with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
            for m in self.messages:
                if m.user_id in keep:
                    fh.write(json.dumps({"user_id": m.user_id, "text": m.text}, ensure_ascii=False) + "\n")
        with open(spath, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "score"])
            for u in self.user_ids:
                if u in keep:
                    w.writerow([u, repr(self.scores[u])])
        return mpath, spath


def planted_topic_corpus(
    n_users: int = 500,
    n_topics: int = 5,
    words_per_topic: int = 20,
    doc_length: int = 150,
    planted_topic: int = 0,
    intercept: float = 20.0,
    slope: float = 8.0,
    noise_sd: float = 2.0,
    doc_concentration: float = 1.0,
    pure: bool = False,
    tokens_per_message: int = 15,
    id_prefix: str = "u",
    markup: bool = False,
    seed: int = 0,
) -> PlantedCorpus:
    """Draw users from an LDA-like generative process with disjoint topic vocabularies.

    Each user's topic mixture is Dirichlet(``doc_concentration``) (or a single
    topic, cycling through topics, when ``pure``); words within a topic follow
    Zipf-like weights. Scores are ``intercept + slope * theta[planted] + N(0, noise_sd)``.
    With ``markup`` some messages get microblog decorations (mentions, URLs,
    emoticon codes, repost tails) that cleaning must strip.
    """
    rng = np.random.default_rng(seed)
    vocab = topic_word_names(n_topics, words_per_topic)
    weights = 1.0 / np.arange(1, words_per_topic + 1)
    weights /= weights.sum()
    if pure:
        theta = np.zeros((n_users, n_topics))
        theta[np.arange(n_users), np.arange(n_users) % n_topics] = 1.0
    else:
        theta = rng.dirichlet(np.full(n_topics, doc_concentration), size=n_users)
    width = len(str(n_users - 1))
    user_ids = [f"{id_prefix}{i:0{width}d}" for i in range(n_users)]
    messages = []
    for i, uid in enumerate(user_ids):
        topics = rng.choice(n_topics, size=doc_length, p=theta[i])
        picks = rng.choice(words_per_topic, size=doc_length, p=weights)
        tokens = [vocab[k][j] for k, j in zip(topics, picks)]
        for start in range(0, doc_length, tokens_per_message):
            text = " ".join(tokens[start:start + tokens_per_message])
            if markup:
                text = _decorate(text, rng)
            messages.append(RawMessage(uid, text))
    noise = rng.normal(0.0, noise_sd, size=n_users)
    y = intercept + slope * theta[:, planted_topic] + noise
    scores = {u: float(s) for u, s in zip(user_ids, y)}
    return PlantedCorpus(messages, scores, theta, vocab, planted_topic, user_ids)


_DECORATIONS = (
    lambda t, i: f"@friend{i}: {t}",
    lambda t, i: f"{t} http://t.cn/A{i}x",
    lambda t, i: f"{t} [哈哈]",
    lambda t, i: f"#话题{i}# {t}",
    lambda t, i: f"{t} //@someone{i}: t9w99 t9w98 转发内容",
)


def _decorate(text: str, rng: np.random.Generator) -> str:
    k = int(rng.integers(0, 2 * len(_DECORATIONS)))
    return _DECORATIONS[k](text, k) if k < len(_DECORATIONS) else text


def write_fixture(directory: str | Path, seed: int = 7) -> Path:
    """Write the small bundled experiment fixture (target + pretraining corpora,
    lexicon, config) and return the config path."""
    directory = Path(directory)
    target = planted_topic_corpus(n_users=60, n_topics=3, words_per_topic=12, doc_length=80,
                                  tokens_per_message=10, markup=True, seed=seed)
    target.write(directory)
    pre = planted_topic_corpus(n_users=30, n_topics=3, words_per_topic=12, doc_length=80, tokens_per_message=10,
                               id_prefix="p", markup=True, seed=seed + 1)
    pre.write(directory, "pretrain.jsonl", "pretrain_scores.csv")
    (directory / "lexicon.dic").write_text(planted_lexicon_text(target.topic_words), encoding="utf-8")
    cfg = directory / "config.toml"
    cfg.write_text("""seed = 11
output_dir = "out"

[corpus]
messages = "messages.jsonl"
scores = "scores.csv"
min_bytes = 0
pretrain_messages = "pretrain.jsonl"

[lexicon]
path = "lexicon.dic"

[topics]
k_list = [2, 3]
iterations = 150
infer_iterations = 60
infer_burn_in = 20

[evaluation]
feature_sets = ["liwc", "trained", "inferred", "liwc+trained", "liwc+inferred"]
cv_folds = 5
""", encoding="utf-8")
    return cfg


def bundled_fixture() -> Path:
    """Directory of the fixture shipped with the package (made by ``write_fixture(dir, seed=7)``).

    Copy it somewhere writable before running: its config writes to ``out/``
    next to itself.
    """
    return Path(__file__).resolve().parent / "data" / "fixture"


def planted_lexicon_text(topic_words: list[list[str]]) -> str:
    """A small ``.dic`` file: one category per topic (exact words from the first half
    of its vocabulary) plus a wildcard category covering every pseudo-word."""
    lines = ["%"]
    for k in range(len(topic_words)):
        lines.append(f"{k + 1}\ttopic{k}words")
    anything = len(topic_words) + 1
    lines += [f"{anything}\tpseudoword", "%", f"t*\t{anything}"]
    for k, words in enumerate(topic_words):
        for w in words[: len(words) // 2]:
            lines.append(f"{w}\t{k + 1}")
    return "\n".join(lines) + "\n"
