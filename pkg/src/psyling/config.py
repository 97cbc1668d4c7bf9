"""Experiment configuration file (TOML).

Schema, all keys optional unless noted; relative paths resolve against the
directory holding the config file::

    seed = 0                      # seeds LDA, inference and fold assignment
    output_dir = "out"

    [corpus]
    messages = "messages.jsonl"   # required for `experiment`
    scores = "scores.csv"         # required for `experiment`
    min_bytes = 20480             # drop users with less cleaned text than this
    keep_hashtag_text = false
    pretrain_messages = "..."     # corpus to train the model used for inferred topics
    pretrain_scores = "..."
    pretrain_high_risk = false    # add target users above mean + 1 SD to the pretraining corpus
    pretrain_model = "..."        # or: a saved model (its K must be the only inferred K)

    [segmenter]
    mode = "pre_segmented"        # or "max_match"
    dictionary = "..."
    stopwords = "..."

    [lexicon]
    path = "liwc.dic"             # required for liwc feature sets

    [topics]
    k_list = [10, 20, 30]
    alpha = 0.5                   # default 5 / K
    beta = 0.01
    iterations = 1000
    infer_iterations = 100
    infer_burn_in = 50
    min_doc_freq = 1

    [evaluation]
    feature_sets = ["liwc", "trained", "inferred", "liwc+trained", "liwc+inferred"]
    cv_folds = 10
    alpha_level = 0.01
    direction = "both"            # or "backward"

Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import DEFAULT_MIN_BYTES, SegmenterConfig
from .lda import DEFAULT_BETA, DEFAULT_INFER_BURN_IN, DEFAULT_INFER_ITERATIONS, DEFAULT_ITERATIONS

__all__ = ["ConfigError", "ExperimentConfig", "FEATURE_SETS", "load_config"]

FEATURE_SETS = ("liwc", "trained", "inferred", "liwc+trained", "liwc+inferred")

_SCHEMA = {
    None: {"seed": int, "output_dir": str},
    "corpus": {"messages": str, "scores": str, "min_bytes": int, "keep_hashtag_text": bool,
               "pretrain_messages": str, "pretrain_scores": str, "pretrain_high_risk": bool,
               "pretrain_model": str},
    "segmenter": {"mode": str, "dictionary": str, "stopwords": str},
    "lexicon": {"path": str},
    "topics": {"k_list": list, "alpha": float, "beta": float, "iterations": int,
               "infer_iterations": int, "infer_burn_in": int, "min_doc_freq": int},
    "evaluation": {"feature_sets": list, "cv_folds": int, "alpha_level": float, "direction": str},
}

_PATH_KEYS = {"messages", "scores", "pretrain_messages", "pretrain_scores", "pretrain_model",
              "dictionary", "stopwords", "lexicon_path", "output_dir"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    messages: str | None = None
    scores: str | None = None
    min_bytes: int = DEFAULT_MIN_BYTES
    keep_hashtag_text: bool = False
    pretrain_messages: str | None = None
    pretrain_scores: str | None = None
    pretrain_high_risk: bool = False
    pretrain_model: str | None = None
    segmenter_mode: str = "pre_segmented"
    dictionary: str | None = None
    stopwords: str | None = None
    lexicon_path: str | None = None
    k_list: list[int] = field(default_factory=list)
    alpha: float | None = None
    beta: float = DEFAULT_BETA
    iterations: int = DEFAULT_ITERATIONS
    infer_iterations: int = DEFAULT_INFER_ITERATIONS
    infer_burn_in: int = DEFAULT_INFER_BURN_IN
    min_doc_freq: int = 1
    feature_sets: list[str] = field(default_factory=lambda: ["liwc"])
    cv_folds: int = 10
    alpha_level: float = 0.01
    direction: str = "both"
    seed: int = 0
    output_dir: str = "out"

    @property
    def segmenter(self) -> SegmenterConfig:
        return SegmenterConfig(self.segmenter_mode, self.dictionary, self.stopwords)

    def uses_topics(self) -> bool:
        return any(fs != "liwc" for fs in self.feature_sets)

    def uses_liwc(self) -> bool:
        return any(fs.startswith("liwc") for fs in self.feature_sets)

    def uses_inferred(self) -> bool:
        return any(fs.endswith("inferred") for fs in self.feature_sets)

    def validate(self) -> "ExperimentConfig":
        unknown = [fs for fs in self.feature_sets if fs not in FEATURE_SETS]
        if unknown:
            raise ConfigError(f"unknown feature sets {unknown}; choose from {list(FEATURE_SETS)}")
        if not self.feature_sets:
            raise ConfigError("feature_sets is empty")
        if len(set(self.feature_sets)) != len(self.feature_sets):
            raise ConfigError("feature_sets has duplicates")
        if self.uses_topics() and not self.k_list:
            raise ConfigError("topic feature sets need a non-empty topics.k_list")
        if any((not isinstance(k, int)) or k < 1 for k in self.k_list):
            raise ConfigError(f"topics.k_list must hold positive integers, got {self.k_list}")
        if len(set(self.k_list)) != len(self.k_list):
            raise ConfigError("topics.k_list has duplicates")
        if self.uses_inferred() and not (self.pretrain_messages or self.pretrain_model or self.pretrain_high_risk):
            raise ConfigError("inferred feature sets need corpus.pretrain_messages, corpus.pretrain_model "
                              "or corpus.pretrain_high_risk")
        if self.uses_liwc() and not self.lexicon_path:
            raise ConfigError("liwc feature sets need lexicon.path")
        if self.cv_folds < 2:
            raise ConfigError("evaluation.cv_folds must be >= 2")
        if self.direction not in ("both", "backward"):
            raise ConfigError("evaluation.direction must be 'both' or 'backward'")
        if not 0 < self.alpha_level < 1:
            raise ConfigError("evaluation.alpha_level must lie in (0, 1)")
        if not self.infer_iterations > self.infer_burn_in >= 0:
            raise ConfigError("need topics.infer_iterations > topics.infer_burn_in >= 0")
        if self.min_bytes < 0:
            raise ConfigError("corpus.min_bytes must be >= 0")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Digest of every setting except the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        base = Path(base_dir)
        flat: dict = {}
        for section, value in data.items():
            if section in _SCHEMA and section is not None and isinstance(value, dict):
                items, schema, where = value.items(), _SCHEMA[section], f"[{section}]"
            elif section in _SCHEMA[None]:
                items, schema, where = [(section, value)], _SCHEMA[None], "top level"
            else:
                raise ConfigError(f"unknown config key {section!r}")
            for key, val in items:
                if key not in schema:
                    raise ConfigError(f"unknown config key {key!r} in {where}")
                expected = schema[key]
                if expected is float and isinstance(val, int) and not isinstance(val, bool):
                    val = float(val)
                if expected is int and isinstance(val, bool) or not isinstance(val, expected):
                    raise ConfigError(f"config key {key!r} in {where} must be {expected.__name__}")
                name = "lexicon_path" if (section, key) == ("lexicon", "path") else \
                    "segmenter_mode" if (section, key) == ("segmenter", "mode") else key
                if name in _PATH_KEYS:
                    val = str(base / val)
                flat[name] = val
        return cls(**flat)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    return ExperimentConfig.from_dict(data, path.parent)
