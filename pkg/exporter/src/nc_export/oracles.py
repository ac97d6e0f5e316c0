"""Naive reference oracles: pair counting, exhaustive partitions, plain loops.

These produce versioned fixture files for cross-validating the main toolkit;
nothing here shares an algorithm with it (EER comes from Mann-Whitney pair
counts, clustering from exhaustive partition enumeration, means from a plain
sequential loop).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from nc_export.errors import FixtureTooLarge, MalformedManifest
from nc_export.format import read_nceb

MAX_FIXTURE_RECORDS = 1000


def read_scores_csv(path: str | Path) -> list[tuple[str, int, float]]:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or rows[0] != ["sample_id", "label", "score"]:
        raise MalformedManifest(f"{path}: expected header sample_id,label,score")
    out = []
    for sample_id, label_token, score_text in rows[1:]:
        out.append((sample_id, 0 if label_token == "real" else 1, float(score_text)))
    return out


def naive_auc(scores: list[tuple[str, int, float]]) -> float:
    fake = [s for _, label, s in scores if label == 1]
    real = [s for _, label, s in scores if label == 0]
    total = 0.0
    for f in fake:
        for r in real:
            if f > r:
                total += 1.0
            elif f == r:
                total += 0.5
    return total / (len(fake) * len(real))


def naive_eer(scores: list[tuple[str, int, float]]) -> float:
    return 1.0 - naive_auc(scores)


def naive_average_precision(scores: list[tuple[str, int, float]], positive: int) -> float:
    if positive == 1:
        order = sorted(scores, key=lambda row: (-row[2], row[0]))
    else:
        order = sorted(scores, key=lambda row: (-(1.0 - row[2]), row[0]))
    hits = 0
    precisions = []
    for rank, (_, label, _) in enumerate(order, start=1):
        if label == positive:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def naive_map(scores: list[tuple[str, int, float]]) -> float:
    return (naive_average_precision(scores, 0) + naive_average_precision(scores, 1)) / 2.0


def exhaustive_partition_optimum(
    points: np.ndarray, k: int
) -> tuple[float, list[int]]:
    """Global k-means optimum by enumerating restricted growth strings."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n > 14:
        raise FixtureTooLarge(f"exhaustive enumeration capped at 14 points, got {n}")
    assign = [0] * n
    best = [np.inf, None]

    def rec(i: int, max_used: int) -> None:
        if i == n:
            inertia = 0.0
            for block in range(max_used + 1):
                members = pts[[j for j in range(n) if assign[j] == block]]
                if len(members):
                    inertia += float(((members - members.mean(axis=0)) ** 2).sum())
            if inertia < best[0]:
                best[0] = inertia
                best[1] = list(assign)
            return
        for label in range(min(max_used + 1, k - 1) + 1):
            assign[i] = label
            rec(i + 1, max(max_used, label))

    rec(1, 0)
    return best[0], best[1]


def naive_class_means(table_path: str | Path) -> dict[str, list[float]]:
    """Per-class float64 means accumulated record by record, in file order."""
    dimension, records = read_nceb(table_path)
    sums = {0: np.zeros(dimension), 1: np.zeros(dimension)}
    counts = {0: 0, 1: 0}
    for rec in records:
        sums[rec.label] += rec.embedding.astype(np.float64)
        counts[rec.label] += 1
    return {
        "real": (sums[0] / counts[0]).tolist(),
        "fake": (sums[1] / counts[1]).tolist(),
    }


def oracle_suite(
    table_path: str | Path,
    scores_path: str | Path,
    cluster_points: np.ndarray,
    cluster_k: int,
    cluster_seed: int,
    out_path: str | Path,
) -> dict:
    """Write one reference JSON for the given fixture inputs and return it."""
    dimension, records = read_nceb(table_path)
    if len(records) > MAX_FIXTURE_RECORDS:
        raise FixtureTooLarge(f"{table_path}: {len(records)} records > {MAX_FIXTURE_RECORDS}")
    scores = read_scores_csv(scores_path)
    if len(scores) > MAX_FIXTURE_RECORDS:
        raise FixtureTooLarge(f"{scores_path}: {len(scores)} rows > {MAX_FIXTURE_RECORDS}")

    optimal_inertia, optimal_partition = exhaustive_partition_optimum(
        cluster_points, cluster_k
    )
    reference = {
        "table": {
            "n_records": len(records),
            "dimension": dimension,
            "n_real": sum(1 for r in records if r.label == 0),
            "n_fake": sum(1 for r in records if r.label == 1),
        },
        "metrics": {
            "eer_roc": naive_eer(scores),
            "map": naive_map(scores),
            "auc": naive_auc(scores),
        },
        "clustering": {
            "points": np.asarray(cluster_points, dtype=np.float64).tolist(),
            "k": cluster_k,
            "seed": cluster_seed,
            "optimal_inertia": optimal_inertia,
            "optimal_partition": optimal_partition,
        },
        "class_means": naive_class_means(table_path),
    }
    Path(out_path).write_text(
        json.dumps(reference, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return reference
