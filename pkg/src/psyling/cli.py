"""Command line interface.

Every subcommand accepts ``--config`` (a TOML experiment file supplying
defaults; explicit flags win) and ``--seed``, and on success prints one JSON
summary line to stdout. Failures exit with status 1 and a one-line
diagnostic on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from functools import partial
from pathlib import Path

import numpy as np

from . import lda
from .config import ConfigError, ExperimentConfig, load_config
from .corpus import SegmenterConfig, aggregate_users, filter_users, read_corpus, read_messages, read_scores, write_corpus
from .lexicon import feature_matrix, load_lexicon
from .pipeline import emit_figures, read_report, run_experiment
from .stats import FeatureMatrix, kfold_cv, stepwise_select

logger = logging.getLogger("psyling")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _summary(command: str, **fields) -> None:
    print(json.dumps({"command": command, "status": "ok", **fields}, ensure_ascii=False, sort_keys=True))


def _need(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required (on the command line or in --config)")
    return value


def cmd_ingest(args) -> None:
    cfg = _config(args)
    messages = _need(args.messages or cfg.messages, "--messages")
    scores_path = args.scores or cfg.scores
    seg = SegmenterConfig(args.segmenter_mode or cfg.segmenter_mode, args.dictionary or cfg.dictionary,
                          args.stopwords or cfg.stopwords)
    scores = read_scores(scores_path) if scores_path else None
    corpus = aggregate_users(read_messages(messages), seg, scores, cfg.keep_hashtag_text)
    min_bytes = cfg.min_bytes if args.min_bytes is None else args.min_bytes
    corpus = filter_users(corpus, min_bytes, require_score=args.require_score)
    write_corpus(corpus, args.out)
    _summary("ingest", users=len(corpus), tokens=sum(len(d) for d in corpus), out=str(args.out))


def cmd_features_liwc(args) -> None:
    cfg = _config(args)
    lex = load_lexicon(_need(args.lexicon or cfg.lexicon_path, "--lexicon"))
    X = feature_matrix(read_corpus(args.corpus), lex)
    X.to_csv(args.out)
    _summary("features liwc", users=X.shape[0], categories=X.shape[1], out=str(args.out))


def cmd_topics_train(args) -> None:
    cfg = _config(args)
    K = args.k if args.k is not None else (cfg.k_list[0] if len(cfg.k_list) == 1 else None)
    K = _need(K, "--k")
    corpus = read_corpus(args.corpus)
    vocab = lda.build_vocabulary(corpus, args.min_doc_freq or cfg.min_doc_freq)
    alpha = args.alpha if args.alpha is not None else cfg.alpha
    model, dists = lda.train(corpus, K, alpha, args.beta or cfg.beta, args.iterations or cfg.iterations,
                             cfg.seed, vocab)
    lda.save_model(model, args.out_model)
    if args.out_theta:
        lda.theta_matrix(dists).to_csv(args.out_theta)
    _summary("topics train", K=K, docs=len(corpus), vocab=model.V, model=str(args.out_model),
             theta=str(args.out_theta) if args.out_theta else None)


def cmd_topics_infer(args) -> None:
    cfg = _config(args)
    model = lda.load_model(args.model)
    corpus = read_corpus(args.corpus)
    iterations = args.iterations or cfg.infer_iterations
    burn_in = cfg.infer_burn_in if args.burn_in is None else args.burn_in
    theta = lda.theta_matrix(lda.infer_corpus(model, corpus, iterations, burn_in, cfg.seed))
    theta.to_csv(args.out)
    _summary("topics infer", K=model.K, docs=len(corpus), out=str(args.out))


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    scores_path = _need(args.scores or cfg.scores, "--scores")
    if not Path(scores_path).is_file():
        raise ConfigError(f"score file not found: {scores_path}")
    scores = read_scores(scores_path)
    X = FeatureMatrix.from_csv(args.features[0])
    for extra in args.features[1:]:
        X = X.hstack(FeatureMatrix.from_csv(extra))
    keep = [i for i, u in enumerate(X.row_ids) if u in scores]
    if not keep:
        raise ConfigError(f"no feature rows have a score in {scores_path}")
    X = X.take(keep)
    y = np.array([scores[u] for u in X.row_ids])
    fit = partial(stepwise_select, direction=args.direction or cfg.direction, drop_collinear=True)
    k = args.cv_folds or cfg.cv_folds
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cv = kfold_cv(X, y, k, cfg.seed, fit)
        model = fit(X, y)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.dump(out / "model.json")
    with open(out / "cv.json", "w", encoding="utf-8") as fh:
        json.dump({"k": cv.k, "seed": cv.seed, "fold_rmses": list(cv.fold_rmses), "mean_rmse": cv.mean_rmse}, fh,
                  indent=2)
        fh.write("\n")
    _summary("evaluate", users=len(y), mean_rmse=cv.mean_rmse, selected=model.selected_features, out=str(out))


def cmd_experiment(args) -> None:
    cfg = _config(args)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    report = run_experiment(cfg)
    figures = emit_figures(report, cfg.output_dir)
    best = min(report.rows, key=lambda r: r.mean_rmse)
    _summary("experiment", rows=len(report.rows), best={"feature_set": best.feature_set, "K": best.K,
                                                         "mean_rmse": best.mean_rmse},
             report=str(Path(cfg.output_dir) / "report.csv"), figures=[str(p) for p in figures])


def cmd_report(args) -> None:
    cfg = _config(args)
    path = args.report or str(Path(cfg.output_dir) / "report.csv")
    report = read_report(path)
    figures = emit_figures(report, args.out_dir or Path(path).parent)
    _summary("report", rows=len(report.rows), figures=[str(p) for p in figures])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config supplying defaults")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="psyling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw JSON-lines messages -> cached user corpus")
    p.add_argument("--messages")
    p.add_argument("--scores")
    p.add_argument("--segmenter-mode", choices=["pre_segmented", "max_match"])
    p.add_argument("--dictionary")
    p.add_argument("--stopwords")
    p.add_argument("--min-bytes", type=int)
    p.add_argument("--require-score", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="feature extraction")
    fsub = p.add_subparsers(dest="kind", required=True)
    q = fsub.add_parser("liwc", parents=[common], help="lexicon category frequencies")
    q.add_argument("--corpus", required=True)
    q.add_argument("--lexicon")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_features_liwc)

    p = sub.add_parser("topics", help="LDA topic models")
    tsub = p.add_subparsers(dest="action", required=True)
    q = tsub.add_parser("train", parents=[common], help="train LDA and write model + theta")
    q.add_argument("--corpus", required=True)
    q.add_argument("--k", type=int)
    q.add_argument("--alpha", type=float)
    q.add_argument("--beta", type=float)
    q.add_argument("--iterations", type=int)
    q.add_argument("--min-doc-freq", type=int)
    q.add_argument("--out-model", required=True)
    q.add_argument("--out-theta")
    q.set_defaults(func=cmd_topics_train)
    q = tsub.add_parser("infer", parents=[common], help="infer theta for a corpus against a saved model")
    q.add_argument("--model", required=True)
    q.add_argument("--corpus", required=True)
    q.add_argument("--iterations", type=int)
    q.add_argument("--burn-in", type=int)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_topics_infer)

    p = sub.add_parser("evaluate", parents=[common], help="CV stepwise regression on feature CSVs")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--scores")
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--direction", choices=["both", "backward"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[common], help="full feature-set x K grid")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", parents=[common], help="plot-ready tables from report.csv")
    p.add_argument("--report")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"psyling {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
