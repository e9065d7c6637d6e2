"""Mood tagging for Chinese song lyrics.

Thin Python surface over the C++ core: preprocessing, synthetic corpora,
CBOW embeddings, the five classifiers and evaluation reports.
"""

from ._moodtag import (
    LABELS,
    Model,
    MoodtagError,
    class_report,
    clean_lyric_text,
    config_defaults,
    cosine_similarity,
    gradcheck,
    load_model,
    preprocess,
    rbf_kernel,
    segment,
    split_counts,
    synthetic_corpus,
    tfidf,
    train,
    train_embeddings,
    write_synthetic,
)

__all__ = [
    "LABELS",
    "Model",
    "MoodtagError",
    "class_report",
    "clean_lyric_text",
    "config_defaults",
    "cosine_similarity",
    "gradcheck",
    "load_model",
    "preprocess",
    "rbf_kernel",
    "segment",
    "split_counts",
    "synthetic_corpus",
    "tfidf",
    "train",
    "train_embeddings",
    "write_synthetic",
]
