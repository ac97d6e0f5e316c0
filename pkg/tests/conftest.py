import numpy as np
import pytest

from nc_coreset.embedding_io import (
    EmbeddingRecord,
    EmbeddingTable,
    Label,
    ScoreRow,
    ScoreTable,
)


def make_table(real_vectors, fake_vectors, dimension=None) -> EmbeddingTable:
    """Build a table from two lists of vectors with stable generated ids."""
    real = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in real_vectors]
    fake = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in fake_vectors]
    if dimension is None:
        dimension = (real + fake)[0].shape[0]
    records = [
        EmbeddingRecord(f"real_{i:04d}", Label.REAL, 0, v) for i, v in enumerate(real)
    ]
    records += [
        EmbeddingRecord(f"fake_{i:04d}", Label.FAKE, 1, v) for i, v in enumerate(fake)
    ]
    return EmbeddingTable(dimension=dimension, records=tuple(records))


def make_scores(pairs) -> ScoreTable:
    """pairs: iterable of (sample_id, label, score)."""
    return ScoreTable(tuple(ScoreRow(sid, label, float(s)) for sid, label, s in pairs))


def random_score_table(rng: np.random.Generator, size: int, tie_prob=0.5) -> ScoreTable:
    """Random scores with both classes present; coarse grid injects ties."""
    labels = np.zeros(size, dtype=int)
    labels[: size // 2 or 1] = 1
    rng.shuffle(labels)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == size:
        labels[0] = 0
    scores = rng.random(size)
    if rng.random() < tie_prob:
        scores = np.round(scores, 1)
    return make_scores(
        (f"s{i:05d}", Label(int(labels[i])), float(scores[i])) for i in range(size)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
