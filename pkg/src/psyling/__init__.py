"""Psycholinguistic text features and score prediction for per-user microblog corpora."""

from .corpus import (Corpus, RawMessage, SegmenterConfig, UserDocument, aggregate_users, clean_message,
                     filter_tokens, filter_users, high_risk_subset, segment)
from .lexicon import Lexicon, extract_features, load_lexicon, match_token
from .lda import TopicModel, Vocabulary, build_vocabulary, infer, load_model, save_model, top_words, train
from .stats import (FeatureMatrix, LinearModel, aic, kfold_cv, ols_fit, pearson, rmse,
                    significant_topic_summary, stepwise_select)

__version__ = "0.1.0"
