"""Synthetic embedding generator and a gradient-checked linear classifier.

Stands in for the deep models at desk scale: the generator mimics the class
structure of a spoofing dataset (one tight real cluster, several fake modes,
one per generation algorithm), the classifier turns embeddings into scores.

Generator PRNG contract: ``numpy.random.Generator(PCG64(seed))``; draws occur
in a fixed order (real samples first, then fake samples mode by mode), so a
config value maps to exactly one table. Mode center directions come from a
separate fixed-seed stream keyed only by (dimension, fake_modes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nc_coreset.embedding_io import EmbeddingRecord, EmbeddingTable, Label, ScoreRow, ScoreTable
from nc_coreset.errors import (
    DimensionMismatch,
    DivergenceDetected,
    EmptyClass,
    InvalidConfig,
)


@dataclass(frozen=True)
class SyntheticConfig:
    dimension: int = 16
    n_real: int = 2000
    n_fake: int = 14000
    fake_modes: int = 7
    mode_separation: float = 6.0
    within_std: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if min(self.dimension, self.n_real, self.n_fake, self.fake_modes) < 1:
            raise InvalidConfig("dimension and all counts must be positive")
        if not self.within_std > 0.0:
            raise InvalidConfig(f"within_std must be > 0, got {self.within_std}")
        if self.mode_separation < 0.0:
            raise InvalidConfig(f"mode_separation must be >= 0, got {self.mode_separation}")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    training_log: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "training_log", tuple(self.training_log))


_DIRECTION_SEED = 0x5EED_D12C

def _mode_directions(dimension: int, modes: int) -> np.ndarray:
    """(modes, dimension) unit directions; mutually orthogonal while modes <= dimension.

    Seeded by a fixed internal constant, so the mode geometry depends only on
    (dimension, modes): tables drawn with different config seeds are fresh
    noise from the same mixture, which is what makes a held-out draw an
    evaluation set rather than a new task.
    """
    rng = np.random.Generator(np.random.PCG64(_DIRECTION_SEED))
    raw = rng.standard_normal((dimension, max(modes, 1)))
    if modes <= dimension:
        q, r = np.linalg.qr(raw[:, :modes])
        signs = np.where(np.diag(r) >= 0.0, 1.0, -1.0)  # sign(0) must not zero a column
        return (q * signs[None, :]).T.copy()
    return (raw / np.linalg.norm(raw, axis=0, keepdims=True)).T.copy()


def generate_synthetic(cfg: SyntheticConfig) -> EmbeddingTable:
    """Real class at the origin; fake class split over seeded mode directions.

    Fake mode counts are n_fake // fake_modes each, remainder spread over the
    first modes; records carry algorithm_id = mode index + 1.
    """
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    directions = _mode_directions(cfg.dimension, cfg.fake_modes)

    records: list[EmbeddingRecord] = []
    real = cfg.within_std * rng.standard_normal((cfg.n_real, cfg.dimension))
    for i in range(cfg.n_real):
        records.append(EmbeddingRecord(f"real_{i:06d}", Label.REAL, 0, real[i]))

    base, extra = divmod(cfg.n_fake, cfg.fake_modes)
    fake_index = 0
    for mode in range(cfg.fake_modes):
        count = base + (1 if mode < extra else 0)
        center = cfg.mode_separation * directions[mode]
        draws = center + cfg.within_std * rng.standard_normal((count, cfg.dimension))
        for i in range(count):
            records.append(
                EmbeddingRecord(f"fake_{fake_index:06d}", Label.FAKE, mode + 1, draws[i])
            )
            fake_index += 1
    return EmbeddingTable(dimension=cfg.dimension, records=tuple(records))


def _design(table: EmbeddingTable) -> tuple[np.ndarray, np.ndarray]:
    x = table.matrix()
    y = np.array([float(rec.label) for rec in table.records])
    return x, y


def _loss_and_grad(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float
) -> tuple[float, np.ndarray, float]:
    """Mean binary cross-entropy of sigmoid(xw + b) and its exact gradient."""
    n = x.shape[0]
    z = np.einsum("nd,d->n", x, w) + b
    # stable: log(1 + e^z) - z*y, summed in record order
    loss = float(np.einsum("n->", np.logaddexp(0.0, z) - z * y)) / n
    p = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    residual = p - y
    grad_w = np.einsum("nd,n->d", x, residual) / n
    grad_b = float(np.einsum("n->", residual)) / n
    return loss, grad_w, grad_b


def loss_and_grad(model: LinearModel, table: EmbeddingTable) -> tuple[float, np.ndarray, float]:
    """Loss and analytic gradient of ``model`` on ``table``."""
    x, y = _design(table)
    if x.shape[1] != model.weights.shape[0]:
        raise DimensionMismatch(
            f"table dimension {x.shape[1]} != model dimension {model.weights.shape[0]}"
        )
    return _loss_and_grad(x, y, model.weights, model.bias)


def train_linear(table: EmbeddingTable, epochs: int, lr: float, seed: int = 0) -> LinearModel:
    """Full-batch gradient descent from zero-initialized parameters.

    Deterministic: zero init and a fixed accumulation order make the seed
    irrelevant for this path; the parameter exists for interface stability.
    training_log holds epochs + 1 loss values (before each update, plus final).

    Divergence means a non-finite loss or parameter, or a loss explosion past
    100x the initial loss: the stable cross-entropy never overflows to inf,
    so a runaway step size shows up as unbounded loss growth instead.
    """
    if table.count(Label.REAL) == 0 or table.count(Label.FAKE) == 0:
        raise EmptyClass("training needs both classes")
    if not lr > 0.0:
        raise InvalidConfig(f"lr must be > 0, got {lr}")
    if epochs < 0:
        raise InvalidConfig(f"epochs must be >= 0, got {epochs}")

    x, y = _design(table)
    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    explosion = None
    log: list[float] = []

    def check(loss: float) -> None:
        if not np.isfinite(loss):
            raise DivergenceDetected(f"loss became non-finite after {len(log)} epochs")
        if explosion is not None and loss > explosion:
            raise DivergenceDetected(
                f"loss exploded to {loss:.3g} after {len(log)} epochs"
            )

    for _ in range(epochs):
        loss, grad_w, grad_b = _loss_and_grad(x, y, w, b)
        check(loss)
        if explosion is None:
            explosion = 100.0 * (loss + 1.0)
        log.append(loss)
        w = w - lr * grad_w
        b = b - lr * grad_b
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise DivergenceDetected(f"parameters became non-finite after {len(log)} epochs")
    final_loss, _, _ = _loss_and_grad(x, y, w, b)
    check(final_loss)
    log.append(final_loss)
    return LinearModel(weights=w, bias=b, training_log=tuple(log))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_scores(model: LinearModel, table: EmbeddingTable) -> ScoreTable:
    """sigmoid(w . x + b) per record; higher = more likely fake."""
    x = table.matrix()
    if x.shape[1] != model.weights.shape[0]:
        raise DimensionMismatch(
            f"table dimension {x.shape[1]} != model dimension {model.weights.shape[0]}"
        )
    z = np.einsum("nd,d->n", x, model.weights) + model.bias
    scores = _sigmoid(z)
    rows = tuple(
        ScoreRow(rec.sample_id, rec.label, float(scores[i]))
        for i, rec in enumerate(table.records)
    )
    return ScoreTable(rows)


def grad_check(model: LinearModel, table: EmbeddingTable, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not epsilon > 0.0:
        raise InvalidConfig(f"epsilon must be > 0, got {epsilon}")
    if len(table) == 0:
        raise EmptyClass("grad check needs a non-empty table")

    x, y = _design(table)
    w = model.weights.astype(np.float64)
    b = float(model.bias)
    _, grad_w, grad_b = _loss_and_grad(x, y, w, b)
    analytic = np.concatenate([grad_w, [grad_b]])

    numeric = np.empty_like(analytic)
    for i in range(w.shape[0] + 1):
        def loss_at(delta: float, i=i) -> float:
            w_p = w.copy()
            b_p = b
            if i < w.shape[0]:
                w_p[i] += delta
            else:
                b_p += delta
            return _loss_and_grad(x, y, w_p, b_p)[0]

        numeric[i] = (loss_at(epsilon) - loss_at(-epsilon)) / (2.0 * epsilon)

    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))
