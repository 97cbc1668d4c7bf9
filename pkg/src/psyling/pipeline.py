"""Experiment orchestration: corpus -> features -> cross-validated stepwise models -> reports.

A run evaluates every requested feature set (LIWC categories, topics trained
on the target users, topics inferred from a model trained on a separate
corpus, and the LIWC+topic combinations) for every topic count in
``k_list``. Topic models never see scores; they are fitted once per K and
the resulting theta matrices are shared by all CV folds, while stepwise
selection is re-run inside each fold.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import lda
from .config import FEATURE_SETS, ConfigError, ExperimentConfig
from .corpus import (Corpus, CorpusError, aggregate_users, filter_users, high_risk_subset, read_messages,
                     read_scores)
from .lexicon import feature_matrix, load_lexicon
from .stats import (FeatureMatrix, best_single_feature, intercept_only, kfold_cv, significant_topic_summary,
                    stepwise_select)

logger = logging.getLogger(__name__)

__all__ = ["ExperimentError", "ReportRow", "EvalReport", "load_target_corpus", "run_experiment",
           "emit_figures", "read_report"]

REPORT_FIELDS = ["feature_set", "K", "mean_rmse", "n_significant_topics", "max_abs_r", "selected_features"]


class ExperimentError(RuntimeError):
    pass


@dataclass
class ReportRow:
    feature_set: str
    K: int | None
    mean_rmse: float
    n_significant_topics: int
    max_abs_r: float
    selected_features: list[str]

    def as_csv(self) -> list[str]:
        return [self.feature_set, "" if self.K is None else str(self.K), repr(self.mean_rmse),
                str(self.n_significant_topics), repr(self.max_abs_r), ";".join(self.selected_features)]


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    baselines: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_FIELDS)
            for row in self.rows:
                w.writerow(row.as_csv())
        with open(out_dir / "baselines.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["baseline", "family", "K", "mean_rmse", "feature"])
            for b in self.baselines:
                w.writerow([b["baseline"], b["family"], "" if b["K"] is None else b["K"],
                            repr(b["mean_rmse"]), b["feature"]])
        with open(out_dir / "metadata.json", "w", encoding="utf-8") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
        return path


def read_report(path: str | Path) -> EvalReport:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_FIELDS:
            raise ExperimentError(f"{path}: unexpected report header {reader.fieldnames}")
        for r in reader:
            rows.append(ReportRow(r["feature_set"], int(r["K"]) if r["K"] else None, float(r["mean_rmse"]),
                                  int(r["n_significant_topics"]), float(r["max_abs_r"]),
                                  [s for s in r["selected_features"].split(";") if s]))
    return EvalReport(rows)


# ---------------------------------------------------------------------------
# inputs

def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"{what} not configured")
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def load_target_corpus(config: ExperimentConfig, require_score: bool = True) -> Corpus:
    messages = read_messages(_require_file(config.messages, "message file"))
    scores = read_scores(_require_file(config.scores, "score file")) if (require_score or config.scores) else None
    corpus = aggregate_users(messages, config.segmenter, scores, config.keep_hashtag_text)
    return filter_users(corpus, config.min_bytes, require_score=require_score)


def _pretrain_corpus(config: ExperimentConfig, target: Corpus) -> Corpus:
    parts: list[Corpus] = []
    if config.pretrain_high_risk:
        parts.append(high_risk_subset(target))
    if config.pretrain_messages:
        msgs = read_messages(_require_file(config.pretrain_messages, "pretraining message file"))
        scores = read_scores(_require_file(config.pretrain_scores, "pretraining score file")) \
            if config.pretrain_scores else None
        extra = aggregate_users(msgs, config.segmenter, scores, config.keep_hashtag_text)
        parts.append(filter_users(extra, config.min_bytes))
    docs = [d for c in parts for d in c.documents]
    try:
        return Corpus(docs, " + ".join(f"({c.provenance})" for c in parts))
    except CorpusError as exc:
        raise ExperimentError(f"pretraining corpus: {exc}") from exc


def _corpus_digest(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for d in corpus.documents:
        h.update(d.user_id.encode("utf-8") + b"\x00" + "\x1f".join(d.tokens).encode("utf-8") + b"\x1e")
    return h.hexdigest()


def _key(**parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode("utf-8")).hexdigest()[:20]


# ---------------------------------------------------------------------------
# topic features with a content-addressed cache

class _TopicCache:
    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)

    def model(self, key: str, build) -> lda.TopicModel:
        path = self.root / f"{key}.model.json"
        if path.exists():
            return lda.load_model(path)
        model = build()
        lda.save_model(model, path)
        return model

    def theta(self, key: str, build) -> FeatureMatrix:
        path = self.root / f"{key}.theta.csv"
        if path.exists():
            return FeatureMatrix.from_csv(path)
        theta = build()
        theta.to_csv(path)
        return theta


def _write_topic_artifacts(directory: Path, model: lda.TopicModel, theta: FeatureMatrix, n_top: int = 20) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    lda.save_model(model, directory / "model.json")
    theta.to_csv(directory / "theta.csv")
    with open(directory / "top_words.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", "rank", "word", "count"])
        for k in range(model.K):
            for rank, word in enumerate(lda.top_words(model, k, n_top)):
                w.writerow([k, rank, word, int(model.n_kw[k, model.vocabulary.id_of[word]])])


def _trained_theta(config, target, K, cache, out_dir) -> FeatureMatrix:
    alpha = lda.default_alpha(K) if config.alpha is None else config.alpha
    key = _key(kind="trained", corpus=_corpus_digest(target), K=K, alpha=alpha, beta=config.beta,
               iterations=config.iterations, seed=config.seed, min_doc_freq=config.min_doc_freq)
    mpath, tpath = cache.root / f"{key}.model.json", cache.root / f"{key}.theta.csv"
    if mpath.exists() and tpath.exists():
        model, theta = lda.load_model(mpath), FeatureMatrix.from_csv(tpath)
    else:
        vocab = lda.build_vocabulary(target, config.min_doc_freq)
        model, dists = lda.train(target, K, alpha, config.beta, config.iterations, config.seed, vocab)
        theta = lda.theta_matrix(dists)
        lda.save_model(model, mpath)
        theta.to_csv(tpath)
    _write_topic_artifacts(out_dir / "topics" / f"trained_K{K}", model, theta)
    return theta


def _inferred_theta(config, target, pretrain, K, cache, out_dir) -> FeatureMatrix:
    if config.pretrain_model:
        model = lda.load_model(_require_file(config.pretrain_model, "pretrained model"))
        if model.K != K:
            raise ExperimentError(f"pretrained model has K={model.K}, cannot provide inferred topics for K={K}")
        model_key = _key(kind="loaded", K=K, n_kw=hashlib.sha256(model.n_kw.tobytes()).hexdigest(),
                         vocab=hashlib.sha256("\n".join(model.vocabulary.words).encode("utf-8")).hexdigest())
    else:
        alpha = lda.default_alpha(K) if config.alpha is None else config.alpha
        model_key = _key(kind="pretrain", corpus=_corpus_digest(pretrain), K=K, alpha=alpha, beta=config.beta,
                         iterations=config.iterations, seed=config.seed, min_doc_freq=config.min_doc_freq)

        def fit():
            vocab = lda.build_vocabulary(pretrain, config.min_doc_freq)
            return lda.train(pretrain, K, alpha, config.beta, config.iterations, config.seed, vocab)[0]

        model = cache.model(model_key, fit)
    key = _key(kind="inferred", model=model_key, target=_corpus_digest(target),
               iterations=config.infer_iterations, burn_in=config.infer_burn_in, seed=config.seed)
    theta = cache.theta(key, lambda: lda.theta_matrix(
        lda.infer_corpus(model, target, config.infer_iterations, config.infer_burn_in, config.seed)))
    _write_topic_artifacts(out_dir / "topics" / f"inferred_K{K}", model, theta)
    return theta


# ---------------------------------------------------------------------------
# evaluation

def _cell_dir(out_dir: Path, feature_set: str, K: int | None) -> Path:
    name = feature_set.replace("+", "_plus_") + ("" if K is None else f"_K{K}")
    return out_dir / "cells" / name


def _evaluate(X: FeatureMatrix, y: np.ndarray, significance_cols: FeatureMatrix, config: ExperimentConfig,
              cell: Path) -> tuple[float, int, float, list[str]]:
    fit = partial(stepwise_select, direction=config.direction, drop_collinear=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cv = kfold_cv(X, y, config.cv_folds, config.seed, fit)
        model = fit(X, y)
        n_sig, max_r = significant_topic_summary(significance_cols, y, config.alpha_level)
    cell.mkdir(parents=True, exist_ok=True)
    dump = model.to_dict()
    dump["cv"] = {"k": cv.k, "seed": cv.seed, "fold_rmses": list(cv.fold_rmses), "mean_rmse": cv.mean_rmse}
    with open(cell / "selection.json", "w", encoding="utf-8") as fh:
        json.dump(dump, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return cv.mean_rmse, n_sig, max_r, model.selected_features


def _baseline(name, family, K, X, y, config, procedure) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cv = kfold_cv(X, y, config.cv_folds, config.seed, procedure)
        feature = procedure(X, y).selected_features
    return {"baseline": name, "family": family, "K": K, "mean_rmse": cv.mean_rmse,
            "feature": feature[0] if feature else ""}


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Run the full feature-set x K grid and write every report file under ``config.output_dir``."""
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _TopicCache(out_dir / "cache")

    target = load_target_corpus(config)
    if len(target) < config.cv_folds:
        raise ExperimentError(f"only {len(target)} scored users after filtering; need >= cv_folds={config.cv_folds}")
    y = np.array(target.scores, dtype=float)
    ordered = [fs for fs in FEATURE_SETS if fs in config.feature_sets]
    report = EvalReport(metadata={
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "n_users": len(target),
        "feature_sets": ordered,
        "k_list": list(config.k_list),
        "corpus_provenance": target.provenance,
        "corpus_digest": _corpus_digest(target),
    })
    report.baselines.append(_baseline("intercept_only", "", None,
                                      FeatureMatrix(tuple(target.user_ids), ("const",), np.zeros((len(y), 1))),
                                      y, config, intercept_only))

    def flush():
        report.write(out_dir)

    def guarded(context, fn):
        try:
            return fn()
        except Exception as exc:
            flush()
            raise ExperimentError(f"[{context}] {exc}") from exc

    liwc = None
    if config.uses_liwc():
        lex = guarded("liwc", lambda: load_lexicon(_require_file(config.lexicon_path, "lexicon")))
        liwc = feature_matrix(target, lex)
        liwc.to_csv(out_dir / "liwc_features.csv")
        report.baselines.append(_baseline("best_single", "liwc", None, liwc, y, config, best_single_feature))
        if "liwc" in ordered:
            result = guarded("liwc", lambda: _evaluate(liwc, y, liwc, config, _cell_dir(out_dir, "liwc", None)))
            report.rows.append(ReportRow("liwc", None, *result))
            flush()

    pretrain = None
    if config.uses_inferred() and not config.pretrain_model:
        pretrain = guarded("pretraining corpus", lambda: _pretrain_corpus(config, target))
        report.metadata["pretrain_provenance"] = pretrain.provenance
        report.metadata["pretrain_users"] = len(pretrain)

    topic_sets = [fs for fs in ordered if fs != "liwc"]
    for K in (config.k_list if topic_sets else []):
        families = {}
        if any(fs.endswith("trained") for fs in topic_sets):
            families["trained"] = guarded(f"trained K={K}",
                                          lambda: _trained_theta(config, target, K, cache, out_dir))
        if any(fs.endswith("inferred") for fs in topic_sets):
            families["inferred"] = guarded(f"inferred K={K}",
                                           lambda: _inferred_theta(config, target, pretrain, K, cache, out_dir))
        for family, theta in families.items():
            report.baselines.append(_baseline("best_single", family, K, theta, y, config, best_single_feature))
        for fs in topic_sets:
            family = fs.split("+")[-1]
            theta = families[family]
            X = liwc.hstack(theta) if fs.startswith("liwc+") else theta
            result = guarded(f"{fs} K={K}", lambda: _evaluate(X, y, theta, config, _cell_dir(out_dir, fs, K)))
            report.rows.append(ReportRow(fs, K, *result))
            flush()
    flush()
    logger.info("experiment finished: %d report rows in %s", len(report.rows), out_dir)
    return report


# ---------------------------------------------------------------------------
# plot-ready tables

def _write_table(path: Path, header: list[str], rows: list[list]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def emit_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write RMSE-vs-K, significant-topic-count-vs-K and max-|r|-vs-K tables.

    Rows without a topic count are not plotted; a table whose feature family
    is absent is skipped with a log line.
    """
    if not report.rows:
        raise ExperimentError("cannot emit figures from an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    k_rows = [r for r in report.rows if r.K is not None]
    if not k_rows:
        logger.info("no topic rows in report; skipping rmse_vs_k.csv, sig_topics_vs_k.csv, max_r_vs_k.csv")
        return written
    written.append(_write_table(out_dir / "rmse_vs_k.csv", ["feature_set", "K", "mean_rmse"],
                                [[r.feature_set, r.K, repr(r.mean_rmse)] for r in k_rows]))
    topic_rows = [r for r in k_rows if r.feature_set in ("trained", "inferred")]
    if not topic_rows:
        logger.info("no pure topic feature sets in report; skipping sig_topics_vs_k.csv and max_r_vs_k.csv")
        return written
    written.append(_write_table(out_dir / "sig_topics_vs_k.csv", ["feature_set", "K", "n_significant_topics"],
                                [[r.feature_set, r.K, r.n_significant_topics] for r in topic_rows]))
    written.append(_write_table(out_dir / "max_r_vs_k.csv", ["feature_set", "K", "max_abs_r"],
                                [[r.feature_set, r.K, repr(r.max_abs_r)] for r in topic_rows]))
    return written
