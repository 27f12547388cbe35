"""Classifiers that decide whether a peer-review comment detects a problem.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from ._probdet import (
    Corpus,
    EmbeddingTable,
    LabeledComment,
    Pipeline,
    ProbdetError,
    __version__,
    compute_metrics,
    cross_validate,
    generate_synthetic,
    krippendorff_alpha,
    load_corpus,
    load_glove,
    save_corpus,
    split_sentences,
    tokenize,
    train,
)

__all__ = [
    "Corpus",
    "EmbeddingTable",
    "LabeledComment",
    "Pipeline",
    "ProbdetError",
    "__version__",
    "compute_metrics",
    "cross_validate",
    "generate_synthetic",
    "krippendorff_alpha",
    "load_corpus",
    "load_glove",
    "save_corpus",
    "split_sentences",
    "tokenize",
    "train",
]
