"""affectline: harvest, classify and chart public affect over time.

Pipeline stages: bootstrapped keyword harvesting, six-emotion
classification, trigger-span tagging, date-aware topic clustering and
daily intensity series export.
"""

from .corpus import Corpus, DailyPartition, LabelLog, LabelRecord, Post, ingest, partition_by_day, sample_uniform
from .emoclass import (
    EMOTIONS,
    MlpBinaryClassifier,
    MultiLabelEmotionModel,
    canonical_emotion,
    evaluate,
    train_emotion_model,
)
from .retrieval import BootstrapRound, BootstrapRunner, expand_keywords, harvest, make_split
from .textfeat import HashingNgramVectorizer, KeywordScore, TokenSequence, featurize, tfidf_rank, tokenize
from .topics import DateLda, TriggerMention, gibbs_fit, subcategory_intensity, topic_report
from .trends import IntensitySeries, emotion_intensity, topic_intensity
from .trigger import CrfTagger, TriggerSpan, span_prf, spans_from_tags

__version__ = "0.1.0"

__all__ = [
    "Corpus", "DailyPartition", "LabelLog", "LabelRecord", "Post",
    "ingest", "partition_by_day", "sample_uniform",
    "EMOTIONS", "MlpBinaryClassifier", "MultiLabelEmotionModel",
    "canonical_emotion", "evaluate", "train_emotion_model",
    "BootstrapRound", "BootstrapRunner", "expand_keywords", "harvest", "make_split",
    "HashingNgramVectorizer", "KeywordScore", "TokenSequence",
    "featurize", "tfidf_rank", "tokenize",
    "DateLda", "TriggerMention", "gibbs_fit", "subcategory_intensity", "topic_report",
    "IntensitySeries", "emotion_intensity", "topic_intensity",
    "CrfTagger", "TriggerSpan", "span_prf", "spans_from_tags",
    "__version__",
]
