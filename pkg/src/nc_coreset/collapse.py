"""Class geometry of penultimate embeddings.

Class means, trace-based within/between scatter statistics, distance scores
to a class mean, nearest-class-mean assignment, and the correctly-classified
("of interest") sample filter.

All accumulation is float64 and strictly sequential in record order, so a
given table always produces bit-identical statistics regardless of caller
threading or BLAS configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nc_coreset.embedding_io import EmbeddingRecord, EmbeddingTable, Label, ScoreTable
from nc_coreset.errors import DegenerateGeometry, DimensionMismatch, EmptyClass, MissingScore


@dataclass(frozen=True)
class ClassGeometry:
    mu_real: np.ndarray
    mu_fake: np.ndarray
    n_real: int
    n_fake: int
    global_mean: np.ndarray
    within_class_scatter_trace: float
    between_class_scatter_trace: float
    nc1: float

    def mean_of(self, label: Label) -> np.ndarray:
        return self.mu_real if label is Label.REAL else self.mu_fake


def _sequential_sum(rows: np.ndarray) -> np.ndarray:
    """Sum of matrix rows accumulated one row at a time, in order."""
    acc = np.zeros(rows.shape[1], dtype=np.float64)
    for row in rows:
        acc += row
    return acc


def class_mean(table: EmbeddingTable, k: Label) -> np.ndarray:
    """Mean embedding of class ``k``, float64 accumulation over record order."""
    rows = table.matrix(k)
    if rows.shape[0] == 0:
        raise EmptyClass(f"no records with label {k.token}")
    return _sequential_sum(rows) / rows.shape[0]


def geometry(table: EmbeddingTable) -> ClassGeometry:
    """Collapse statistics for a two-class table.

    Tr S_W = (1/N) sum_k sum_i ||f_ki - mu_k||^2,
    Tr S_B = sum_k (n_k/N) ||mu_k - mu_G||^2, nc1 = Tr S_W / Tr S_B.
    """
    mu = {}
    rows = {}
    for k in (Label.REAL, Label.FAKE):
        rows[k] = table.matrix(k)
        if rows[k].shape[0] == 0:
            raise EmptyClass(f"no records with label {k.token}")
        mu[k] = _sequential_sum(rows[k]) / rows[k].shape[0]

    n_real, n_fake = rows[Label.REAL].shape[0], rows[Label.FAKE].shape[0]
    n_total = n_real + n_fake
    global_mean = (n_real * mu[Label.REAL] + n_fake * mu[Label.FAKE]) / n_total

    tr_sw = 0.0
    for k in (Label.REAL, Label.FAKE):
        for row in rows[k]:
            diff = row - mu[k]
            tr_sw += float(diff @ diff)
    tr_sw /= n_total

    tr_sb = 0.0
    for k, n_k in ((Label.REAL, n_real), (Label.FAKE, n_fake)):
        diff = mu[k] - global_mean
        tr_sb += (n_k / n_total) * float(diff @ diff)

    if np.array_equal(mu[Label.REAL], mu[Label.FAKE]) or tr_sb == 0.0:
        raise DegenerateGeometry("class means coincide; nc1 undefined")

    return ClassGeometry(
        mu_real=mu[Label.REAL],
        mu_fake=mu[Label.FAKE],
        n_real=n_real,
        n_fake=n_fake,
        global_mean=global_mean,
        within_class_scatter_trace=tr_sw,
        between_class_scatter_trace=tr_sb,
        nc1=tr_sw / tr_sb,
    )


def distance_scores(
    table: EmbeddingTable, mean: np.ndarray, k: Label
) -> list[tuple[str, float]]:
    """Euclidean distance of every class-``k`` record to ``mean``.

    Sorted ascending by distance, ties broken by sample_id ascending.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if mean.ndim != 1 or mean.shape[0] != table.dimension:
        raise DimensionMismatch(
            f"mean has dimension {mean.shape}, table dimension is {table.dimension}"
        )
    out = []
    for rec in table.by_label(k):
        diff = rec.embedding.astype(np.float64) - mean
        out.append((rec.sample_id, float(np.sqrt(diff @ diff))))
    out.sort(key=lambda item: (item[1], item[0]))
    return out


def ncc_assign(feature: np.ndarray, geom: ClassGeometry) -> Label:
    """Nearest-class-mean assignment; exact ties go to REAL."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != geom.mu_real.shape:
        raise DimensionMismatch(
            f"feature has shape {feature.shape}, means have {geom.mu_real.shape}"
        )
    d_real = feature - geom.mu_real
    d_fake = feature - geom.mu_fake
    return Label.REAL if float(d_real @ d_real) <= float(d_fake @ d_fake) else Label.FAKE


def samples_of_interest(
    table: EmbeddingTable, scores: ScoreTable, threshold: float = 0.5
) -> EmbeddingTable:
    """Subtable of records the scores classify correctly, order preserved.

    Predicted label is FAKE when score >= threshold (boundary inclusive).
    """
    by_id = scores.as_dict()
    kept: list[EmbeddingRecord] = []
    for rec in table.records:
        row = by_id.get(rec.sample_id)
        if row is None:
            raise MissingScore(f"no score for sample_id {rec.sample_id!r}")
        predicted = Label.FAKE if row.score >= threshold else Label.REAL
        if predicted is rec.label:
            kept.append(rec)
    return EmbeddingTable(dimension=table.dimension, records=tuple(kept))
