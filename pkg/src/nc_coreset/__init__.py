"""Neural-collapse coreset sampling toolkit.

Selects representative training samples for two-class (real/fake) detection
tasks from penultimate-layer embeddings: class-mean distance sampling for the
real class, cluster-wise sampling for the heterogeneous fake class, plus the
supporting pieces (embedding container format, collapse geometry, deterministic
k-means, EER/mAP metrics, log-mel front-end, and a gradient-checked toy
classifier) needed to validate the method end to end at desk scale.
"""

from nc_coreset.embedding_io import (
    EmbeddingRecord,
    EmbeddingTable,
    Label,
    ManifestRow,
    Rule,
    ScoreRow,
    ScoreTable,
    SelectionManifest,
    load_table,
    read_manifest,
    read_score_table,
    store_table,
    write_manifest,
    write_score_table,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingRecord",
    "EmbeddingTable",
    "Label",
    "ManifestRow",
    "Rule",
    "ScoreRow",
    "ScoreTable",
    "SelectionManifest",
    "load_table",
    "read_manifest",
    "read_score_table",
    "store_table",
    "write_manifest",
    "write_score_table",
]
