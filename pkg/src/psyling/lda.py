"""Latent Dirichlet allocation by collapsed Gibbs sampling.

Two ways of getting document-topic proportions are supported: estimate them
while training on the documents themselves (:func:`train`), or freeze a model
trained elsewhere and sample only the new document's assignments
(:func:`infer`).

Randomness comes from one ``numpy.random.Generator`` per run. Initial
assignments draw one integer per token, then every sweep draws one uniform
per token; tokens are visited documents-first in corpus order, positions in
order within a document.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .corpus import Corpus, UserDocument
from .stats import FeatureMatrix

logger = logging.getLogger(__name__)

__all__ = [
    "LDAError",
    "ModelFormatError",
    "Vocabulary",
    "TopicModel",
    "DocTopicDistribution",
    "GibbsSampler",
    "build_vocabulary",
    "default_alpha",
    "train",
    "infer",
    "infer_corpus",
    "top_words",
    "save_model",
    "load_model",
    "theta_matrix",
]

FORMAT_VERSION = 1
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
DEFAULT_INFER_ITERATIONS = 100
DEFAULT_INFER_BURN_IN = 50


def default_alpha(K: int) -> float:
    """Symmetric per-topic prior with a total concentration of 5."""
    return 5.0 / K


class LDAError(ValueError):
    pass


class ModelFormatError(LDAError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    id_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "id_of", {w: i for i, w in enumerate(self.words)})
        if len(self.id_of) != len(self.words):
            raise LDAError("vocabulary words must be unique")

    @property
    def word_of(self) -> tuple[str, ...]:
        return self.words

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.id_of

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Token ids of in-vocabulary tokens, out-of-vocabulary tokens skipped."""
        ids = self.id_of
        return np.array([ids[t] for t in tokens if t in ids], dtype=np.int64)


def build_vocabulary(corpus: Corpus, min_doc_freq: int = 1) -> Vocabulary:
    """Words occurring in at least ``min_doc_freq`` documents, ids in sorted word order."""
    if min_doc_freq < 1:
        raise LDAError("min_doc_freq must be >= 1")
    df: dict[str, int] = {}
    for doc in corpus.documents:
        for w in set(doc.tokens):
            df[w] = df.get(w, 0) + 1
    words = sorted(w for w, c in df.items() if c >= min_doc_freq)
    if not words:
        raise LDAError(f"empty vocabulary (min_doc_freq={min_doc_freq})")
    return Vocabulary(tuple(words))


@dataclass(eq=False)
class TopicModel:
    K: int
    alpha: float
    beta: float
    n_kw: np.ndarray
    vocabulary: Vocabulary
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n_kw = np.array(self.n_kw, dtype=np.int64)
        if self.K < 1:
            raise LDAError("K must be >= 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise LDAError("alpha and beta must be positive")
        if n_kw.shape != (self.K, len(self.vocabulary)):
            raise LDAError(f"n_kw has shape {n_kw.shape}, expected ({self.K}, {len(self.vocabulary)})")
        if (n_kw < 0).any():
            raise LDAError("negative topic-word counts")
        n_kw.setflags(write=False)
        self.n_kw = n_kw

    @property
    def n_k(self) -> np.ndarray:
        return self.n_kw.sum(axis=1)

    @property
    def V(self) -> int:
        return len(self.vocabulary)

    def topic_word(self) -> np.ndarray:
        """Smoothed topic-word probabilities, K x V."""
        return (self.n_kw + self.beta) / (self.n_k[:, None] + self.V * self.beta)

    def __eq__(self, other):
        if not isinstance(other, TopicModel):
            return NotImplemented
        return (self.K == other.K and self.alpha == other.alpha and self.beta == other.beta
                and self.vocabulary == other.vocabulary and np.array_equal(self.n_kw, other.n_kw)
                and self.meta == other.meta)


@dataclass(frozen=True)
class DocTopicDistribution:
    user_id: str
    theta: np.ndarray


# ---------------------------------------------------------------------------
# sampling kernels

@njit(cache=True)
def _draw(p, target):
    k = 0
    last = p.shape[0] - 1
    while k < last and p[k] <= target:
        k += 1
    return k


@njit(cache=True)
def _sweep(words, docs, z, n_dk, n_wk, n_k, alpha, beta, vbeta, u):
    K = n_k.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        n_dk[d, k] -= 1
        n_wk[w, k] -= 1
        n_k[k] -= 1
        total = 0.0
        for t in range(K):
            total += (n_dk[d, t] + alpha) * (n_wk[w, t] + beta) / (n_k[t] + vbeta)
            p[t] = total
        k = _draw(p, u[i] * total)
        z[i] = k
        n_dk[d, k] += 1
        n_wk[w, k] += 1
        n_k[k] += 1


@njit(cache=True)
def _infer_sweep(words, z, n_k_doc, base_wk, local_wk, base_k, local_k, alpha, beta, vbeta, u):
    K = base_k.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        k = z[i]
        n_k_doc[k] -= 1
        local_wk[w, k] -= 1
        local_k[k] -= 1
        total = 0.0
        for t in range(K):
            total += ((n_k_doc[t] + alpha) * (base_wk[w, t] + local_wk[w, t] + beta)
                      / (base_k[t] + local_k[t] + vbeta))
            p[t] = total
        k = _draw(p, u[i] * total)
        z[i] = k
        n_k_doc[k] += 1
        local_wk[w, k] += 1
        local_k[k] += 1


class GibbsSampler:
    """Collapsed Gibbs sampler state over integer-encoded documents.

    ``docs`` is a list of word-id arrays. Counts are kept word-major
    (``n_wk`` is V x K) for memory locality in the inner loop.
    """

    def __init__(self, docs: Sequence[np.ndarray], V: int, K: int, alpha: float, beta: float, seed: int = 0):
        if K < 1:
            raise LDAError("K must be >= 1")
        if not (alpha > 0 and beta > 0):
            raise LDAError("alpha and beta must be positive")
        self.K, self.V, self.alpha, self.beta = int(K), int(V), float(alpha), float(beta)
        self.rng = np.random.default_rng(seed)
        self.doc_lengths = np.array([len(d) for d in docs], dtype=np.int64)
        self.words = np.concatenate([np.asarray(d, dtype=np.int64) for d in docs]) if docs else np.empty(0, np.int64)
        self.docs = np.repeat(np.arange(len(docs), dtype=np.int64), self.doc_lengths)
        self.z = self.rng.integers(0, self.K, size=self.words.size).astype(np.int64)
        self.n_dk = np.zeros((len(docs), self.K), dtype=np.int64)
        self.n_wk = np.zeros((self.V, self.K), dtype=np.int64)
        np.add.at(self.n_dk, (self.docs, self.z), 1)
        np.add.at(self.n_wk, (self.words, self.z), 1)
        self.n_k = self.n_wk.sum(axis=0)
        self.iterations = 0

    def sweep(self, n: int = 1) -> None:
        for _ in range(n):
            u = self.rng.random(self.words.size)
            _sweep(self.words, self.docs, self.z, self.n_dk, self.n_wk, self.n_k,
                   self.alpha, self.beta, self.V * self.beta, u)
            self.iterations += 1

    def theta(self) -> np.ndarray:
        return (self.n_dk + self.alpha) / (self.doc_lengths[:, None] + self.K * self.alpha)

    def check_counts(self) -> None:
        """Recount from ``z`` and compare with the incremental bookkeeping."""
        n_dk = np.zeros_like(self.n_dk)
        n_wk = np.zeros_like(self.n_wk)
        np.add.at(n_dk, (self.docs, self.z), 1)
        np.add.at(n_wk, (self.words, self.z), 1)
        if not (np.array_equal(n_dk, self.n_dk) and np.array_equal(n_wk, self.n_wk)
                and np.array_equal(self.n_k, n_wk.sum(axis=0))):
            raise AssertionError("Gibbs bookkeeping inconsistent with assignments")


# ---------------------------------------------------------------------------
# training and inference

def _encode_corpus(corpus: Corpus, vocab: Vocabulary) -> list[np.ndarray]:
    encoded = []
    for doc in corpus.documents:
        ids = vocab.encode(doc.tokens)
        if ids.size == 0:
            raise LDAError(f"document {doc.user_id!r} has no in-vocabulary tokens")
        encoded.append(ids)
    return encoded


def train(
    corpus: Corpus,
    K: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    vocabulary: Vocabulary | None = None,
) -> tuple[TopicModel, list[DocTopicDistribution]]:
    """Fit LDA to ``corpus`` and return the frozen model with per-document theta.

    Theta is the smoothed estimate ``(n_dk + alpha) / (n_d + K*alpha)`` from
    the final sweep.
    """
    if K < 1:
        raise LDAError("K must be >= 1")
    if iterations < 1:
        raise LDAError("iterations must be >= 1")
    if len(corpus) == 0:
        raise LDAError("cannot train on an empty corpus")
    alpha = default_alpha(K) if alpha is None else float(alpha)
    vocab = vocabulary or build_vocabulary(corpus)
    encoded = _encode_corpus(corpus, vocab)
    sampler = GibbsSampler(encoded, len(vocab), K, alpha, beta, seed)
    sampler.sweep(iterations)
    meta = {
        "iterations": int(iterations),
        "seed": int(seed),
        "n_docs": len(corpus),
        "n_tokens": int(sampler.words.size),
        "provenance": corpus.provenance,
    }
    model = TopicModel(K, alpha, float(beta), sampler.n_wk.T.copy(), vocab, meta)
    theta = sampler.theta()
    dists = [DocTopicDistribution(d.user_id, theta[i]) for i, d in enumerate(corpus.documents)]
    logger.info("trained LDA K=%d on %d docs / %d tokens (%d iterations)",
                K, len(corpus), sampler.words.size, iterations)
    return model, dists


def infer(
    model: TopicModel,
    doc: UserDocument,
    iterations: int = DEFAULT_INFER_ITERATIONS,
    burn_in: int = DEFAULT_INFER_BURN_IN,
    seed: int | Sequence[int] = 0,
) -> DocTopicDistribution:
    """Topic proportions for an unseen document against a frozen model.

    Only the new document's assignments are resampled; the model's
    topic-word counts stay fixed, augmented by the document's own running
    assignments. Theta is averaged over the sweeps after ``burn_in``.
    Out-of-vocabulary tokens are skipped.
    """
    if not iterations > burn_in >= 0:
        raise LDAError("need iterations > burn_in >= 0")
    ids = model.vocabulary.encode(doc.tokens)
    if ids.size == 0:
        raise LDAError(f"document {doc.user_id!r} has no in-vocabulary tokens")
    K = model.K
    uniq, local = np.unique(ids, return_inverse=True)
    local = local.astype(np.int64)
    base_wk = np.ascontiguousarray(model.n_kw[:, uniq].T, dtype=np.float64)
    base_k = model.n_k.astype(np.float64)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=local.size).astype(np.int64)
    n_k_doc = np.bincount(z, minlength=K).astype(np.int64)
    local_wk = np.zeros((uniq.size, K), dtype=np.int64)
    np.add.at(local_wk, (local, z), 1)
    local_k = local_wk.sum(axis=0)
    acc = np.zeros(K)
    denom = local.size + K * model.alpha
    vbeta = model.V * model.beta
    for it in range(iterations):
        u = rng.random(local.size)
        _infer_sweep(local, z, n_k_doc, base_wk, local_wk, base_k, local_k, model.alpha, model.beta, vbeta, u)
        if it >= burn_in:
            acc += (n_k_doc + model.alpha) / denom
    theta = acc / (iterations - burn_in)
    return DocTopicDistribution(doc.user_id, theta / theta.sum())


def infer_corpus(model: TopicModel, corpus: Corpus, iterations: int = DEFAULT_INFER_ITERATIONS,
                 burn_in: int = DEFAULT_INFER_BURN_IN, seed: int = 0) -> list[DocTopicDistribution]:
    """Infer every document; document ``i`` uses the generator seeded with ``[seed, i]``."""
    return [infer(model, doc, iterations, burn_in, seed=[seed, i]) for i, doc in enumerate(corpus.documents)]


def top_words(model: TopicModel, k: int, n: int = 10) -> list[str]:
    """The ``n`` highest-count words of topic ``k``; ties go to the lexicographically smaller word."""
    if not 0 <= k < model.K:
        raise LDAError(f"topic {k} out of range for K={model.K}")
    if n < 1:
        raise LDAError("n must be >= 1")
    counts = model.n_kw[k]
    words = model.vocabulary.words
    order = sorted(range(model.V), key=lambda w: (-counts[w], words[w]))
    return [words[w] for w in order[:n]]


def theta_matrix(dists: Sequence[DocTopicDistribution], prefix: str = "topic_") -> FeatureMatrix:
    K = len(dists[0].theta) if dists else 0
    values = np.array([d.theta for d in dists], dtype=float).reshape(len(dists), K)
    return FeatureMatrix(tuple(d.user_id for d in dists), tuple(f"{prefix}{k}" for k in range(K)), values)


# ---------------------------------------------------------------------------
# persistence

def save_model(model: TopicModel, path: str | Path) -> None:
    obj = {
        "version": FORMAT_VERSION,
        "K": model.K,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocab": list(model.vocabulary.words),
        "n_kw": model.n_kw.tolist(),
        "meta": model.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path: str | Path) -> TopicModel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupted model file ({exc})") from exc
    if not isinstance(obj, dict) or "version" not in obj:
        raise ModelFormatError(f"{path}: not a topic model file (no version field)")
    version = obj["version"]
    if not isinstance(version, int):
        raise ModelFormatError(f"{path}: invalid version {version!r}")
    if version > FORMAT_VERSION:
        raise ModelFormatError(f"{path}: model format version {version} is newer than supported version {FORMAT_VERSION}")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported model format version {version}")
    missing = {"K", "alpha", "beta", "vocab", "n_kw"} - obj.keys()
    if missing:
        raise ModelFormatError(f"{path}: missing fields {sorted(missing)}")
    try:
        n_kw = np.array(obj["n_kw"], dtype=np.int64)
        return TopicModel(int(obj["K"]), float(obj["alpha"]), float(obj["beta"]), n_kw,
                          Vocabulary(tuple(obj["vocab"])), dict(obj.get("meta", {})))
    except (LDAError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: invalid model contents ({exc})") from exc
