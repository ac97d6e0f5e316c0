"""Coreset selection: class-mean sampling, cluster-wise fake sampling, random baseline.

The real class (or any single-mode class) is sampled by distance to its class
mean. The fake class is first clustered (one cluster per generation algorithm,
ideally); the rule is then applied per cluster, with two documented policies
for clusters whose radii overlap:

* ``EXCLUDE``: a member must satisfy its own cluster's rule and sit outside
  every other overlapping cluster's cutoff, dropping ambiguous points.
* ``MERGED_CONSENSUS``: a member must satisfy its own cluster's rule and the
  rule applied to the merged overlapping group around the group mean.

``EXCLUDE`` is the default: ambiguous points are exactly the confusing
samples cluster-wise sampling is meant to eliminate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from nc_coreset import collapse
from nc_coreset import kmeans as km
from nc_coreset.embedding_io import (
    EmbeddingTable,
    Label,
    ManifestRow,
    Rule,
    SelectionManifest,
)
from nc_coreset.errors import (
    CountExceedsClass,
    DuplicateSampleId,
    EmptyClass,
    InvalidConfig,
)


class RuleKind(enum.Enum):
    THRESHOLD = "threshold"
    TOP_FRACTION = "top-fraction"
    TOP_COUNT = "top-count"


class OverlapMode(enum.Enum):
    EXCLUDE = "exclude"
    MERGED_CONSENSUS = "merged"


@dataclass(frozen=True)
class SamplingRule:
    kind: RuleKind
    value: float

    def __post_init__(self) -> None:
        if self.kind is RuleKind.THRESHOLD and not self.value >= 0.0:
            raise InvalidConfig(f"threshold must be >= 0, got {self.value}")
        if self.kind is RuleKind.TOP_FRACTION and not 0.0 < self.value <= 1.0:
            raise InvalidConfig(f"fraction must be in (0, 1], got {self.value}")
        if self.kind is RuleKind.TOP_COUNT and (
            self.value < 1 or self.value != int(self.value)
        ):
            raise InvalidConfig(f"count must be a positive integer, got {self.value}")

    @classmethod
    def threshold(cls, t: float) -> "SamplingRule":
        return cls(RuleKind.THRESHOLD, float(t))

    @classmethod
    def top_fraction(cls, p: float) -> "SamplingRule":
        return cls(RuleKind.TOP_FRACTION, float(p))

    @classmethod
    def top_count(cls, m: int) -> "SamplingRule":
        return cls(RuleKind.TOP_COUNT, int(m))

    @property
    def manifest_rule(self) -> Rule:
        return {
            RuleKind.THRESHOLD: Rule.THRESHOLD,
            RuleKind.TOP_FRACTION: Rule.TOP_FRACTION,
            RuleKind.TOP_COUNT: Rule.TOP_COUNT,
        }[self.kind]


def _apply_rule(
    ranked: list[tuple[str, float]], rule: SamplingRule, strict_count: bool
) -> list[tuple[str, float]]:
    """Prefix of a (distance, sample_id)-sorted ranking kept by the rule."""
    n = len(ranked)
    if rule.kind is RuleKind.THRESHOLD:
        return [item for item in ranked if item[1] <= rule.value]
    if rule.kind is RuleKind.TOP_FRACTION:
        return ranked[: math.ceil(rule.value * n)]
    m = int(rule.value)
    if m > n:
        if strict_count:
            raise CountExceedsClass(f"top-count {m} exceeds available {n}")
        m = n
    return ranked[:m]


def _rule_cutoff(selected: list[tuple[str, float]], rule: SamplingRule) -> float:
    """Distance cutoff the rule induces on a ranking; -inf when nothing passes."""
    if rule.kind is RuleKind.THRESHOLD:
        return rule.value
    if not selected:
        return -math.inf
    return selected[-1][1]


def select_class(table: EmbeddingTable, k: Label, rule: SamplingRule) -> SelectionManifest:
    """Distance-to-class-mean sampling of one class.

    Keeps all records within the threshold, or the closest fraction/count,
    of the class mean; ties at the cutoff resolve by sample_id ascending.
    """
    if table.count(k) == 0:
        raise EmptyClass(f"no records with label {k.token}")
    mean = collapse.class_mean(table, k)
    ranked = collapse.distance_scores(table, mean, k)
    selected = _apply_rule(ranked, rule, strict_count=True)
    rows = tuple(
        ManifestRow(sample_id, k, -1, distance, rule.manifest_rule)
        for sample_id, distance in selected
    )
    return SelectionManifest(rows)


def select_random(table: EmbeddingTable, n_per_class: int, seed: int) -> SelectionManifest:
    """Uniform per-class sample without replacement; REAL drawn before FAKE."""
    rows: list[ManifestRow] = []
    rng = np.random.Generator(np.random.PCG64(seed))
    for label in (Label.REAL, Label.FAKE):
        records = table.by_label(label)
        if n_per_class > len(records):
            raise CountExceedsClass(
                f"{n_per_class} requested but class {label.token} has {len(records)}"
            )
        chosen = rng.choice(len(records), size=n_per_class, replace=False)
        rows.extend(
            ManifestRow(records[int(i)].sample_id, label, -1, 0.0, Rule.RANDOM)
            for i in chosen
        )
    return SelectionManifest(tuple(rows))


def _sequential_mean(pts: np.ndarray) -> np.ndarray:
    acc = np.zeros(pts.shape[1], dtype=np.float64)
    for row in pts:
        acc += row
    return acc / pts.shape[0]


def _ranked_distances(
    ids: list[str], pts: np.ndarray, member_idx: np.ndarray, mean: np.ndarray
) -> list[tuple[str, float]]:
    out = []
    for i in member_idx:
        diff = pts[i] - mean
        out.append((ids[i], float(np.sqrt(diff @ diff))))
    out.sort(key=lambda item: (item[1], item[0]))
    return out


def sample_fake_class(
    table: EmbeddingTable,
    rule: SamplingRule,
    k_max: int,
    seed: int,
    overlap_mode: OverlapMode = OverlapMode.EXCLUDE,
) -> SelectionManifest:
    """Cluster-wise sampling of the fake class.

    Runs the overlap-minimizing k search, then applies the rule per cluster
    against the cluster mean. Members of overlapping cluster groups pass
    through the ``overlap_mode`` policy. With k_max = 1 (or when the k search
    falls back to a single cluster) this reduces to plain class-mean sampling,
    row for row. A top-count rule is capped at each cluster's size.
    """
    fake_records = table.by_label(Label.FAKE)
    if not fake_records:
        raise EmptyClass("no fake records to sample")
    if k_max == 1:
        return select_class(table, Label.FAKE, rule)

    pts = table.matrix(Label.FAKE)
    ids = [rec.sample_id for rec in fake_records]
    clustering, report = km.select_k(pts, k_max, seed)
    if clustering.k == 1:
        return select_class(table, Label.FAKE, rule)

    groups = km.overlap_groups(report)
    group_of = {c: tuple(group) for group in groups for c in group}

    means: dict[int, np.ndarray] = {}
    ranked: dict[int, list[tuple[str, float]]] = {}
    selected: dict[int, list[tuple[str, float]]] = {}
    cutoffs: dict[int, float] = {}
    for c in range(clustering.k):
        member_idx = clustering.members(c)
        means[c] = _sequential_mean(pts[member_idx])
        ranked[c] = _ranked_distances(ids, pts, member_idx, means[c])
        selected[c] = _apply_rule(ranked[c], rule, strict_count=False)
        cutoffs[c] = _rule_cutoff(selected[c], rule)

    idx_of = {sample_id: i for i, sample_id in enumerate(ids)}
    best: dict[str, ManifestRow] = {}
    for c in range(clustering.k):
        group = group_of[c]
        if len(group) >= 2:
            if overlap_mode is OverlapMode.EXCLUDE:
                keep = _exclude_ambiguous(selected[c], c, group, means, cutoffs, pts, idx_of)
            else:
                keep = _merged_consensus(
                    selected[c], group, clustering, pts, ids, rule
                )
        else:
            keep = selected[c]
        for sample_id, distance in keep:
            row = ManifestRow(sample_id, Label.FAKE, c, distance, Rule.CLUSTER_THRESHOLD)
            prior = best.get(sample_id)
            if prior is None or distance < prior.distance:
                best[sample_id] = row
    return SelectionManifest(tuple(best.values()))


def _exclude_ambiguous(
    candidates: list[tuple[str, float]],
    own: int,
    group: tuple[int, ...],
    means: dict[int, np.ndarray],
    cutoffs: dict[int, float],
    pts: np.ndarray,
    idx_of: dict[str, int],
) -> list[tuple[str, float]]:
    """Keep only candidates outside every other overlapping cluster's cutoff."""
    keep = []
    for sample_id, distance in candidates:
        point = pts[idx_of[sample_id]]
        ambiguous = False
        for other in group:
            if other == own:
                continue
            diff = point - means[other]
            if float(np.sqrt(diff @ diff)) <= cutoffs[other]:
                ambiguous = True
                break
        if not ambiguous:
            keep.append((sample_id, distance))
    return keep


def _merged_consensus(
    candidates: list[tuple[str, float]],
    group: tuple[int, ...],
    clustering: km.Clustering,
    pts: np.ndarray,
    ids: list[str],
    rule: SamplingRule,
) -> list[tuple[str, float]]:
    """Keep candidates that also satisfy the rule on the merged group."""
    member_idx = np.concatenate([clustering.members(c) for c in group])
    member_idx.sort()
    merged_mean = _sequential_mean(pts[member_idx])
    merged_ranked = _ranked_distances(ids, pts, member_idx, merged_mean)
    merged_ids = {sample_id for sample_id, _ in _apply_rule(merged_ranked, rule, strict_count=False)}
    return [item for item in candidates if item[0] in merged_ids]


def merge_manifests(real: SelectionManifest, fake: SelectionManifest) -> SelectionManifest:
    """Concatenate two manifests with disjoint sample ids."""
    shared = set(real.sample_ids()) & set(fake.sample_ids())
    if shared:
        raise DuplicateSampleId(f"manifests share sample ids, e.g. {sorted(shared)[0]!r}")
    return SelectionManifest(real.rows + fake.rows)
