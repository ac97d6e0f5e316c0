"""Deterministic Lloyd's k-means with k-means++ seeding and overlap-driven k search.

PRNG contract: a ``seed`` value always means ``numpy.random.Generator(PCG64(seed))``
and draws happen in a fixed order: one integer for the first center, then one
block of 2 + floor(ln k) uniforms per greedy k-means++ round. Restart seeds in
:func:`select_k` come from ``numpy.random.SeedSequence(seed).generate_state(restarts)``.
Identical inputs and seed therefore give bit-identical clusterings; a different
PRNG would give a different (still valid) partition, which is why
cross-implementation checks compare inertia rather than exact partitions.

Center updates accumulate in float64, sequentially in point order
(``np.add.at``), never via pairwise or threaded reductions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nc_coreset.errors import (
    DimensionMismatch,
    EmptyCluster,
    EmptyInput,
    KTooLarge,
    SingleCluster,
)

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
RADIUS_PERCENTILE = 90.0


@dataclass(frozen=True)
class Clustering:
    k: int
    centers: np.ndarray  # (k, d) float64
    assignments: np.ndarray  # (n,) int
    inertia: float
    radii: np.ndarray  # (k,) 90th-percentile member distance
    iterations_run: int

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == cluster)


@dataclass(frozen=True)
class OverlapReport:
    """Pairwise margins ||c_a - c_b|| - (r_a + r_b); negative margin = overlap.

    The diagonal is excluded: margin 0.0 / overlap False by convention, and
    never counted in overlap_score (= overlapping pairs / all pairs).
    """

    margins: np.ndarray  # (k, k) symmetric
    overlap: np.ndarray  # (k, k) bool
    overlap_score: float


def _as_points(points) -> np.ndarray:
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:  # ragged: vectors of differing lengths
        raise DimensionMismatch(f"points do not share one dimension: {exc}") from exc
    if pts.shape[0] == 0:
        raise EmptyInput("points must be a non-empty (n, d) array")
    if pts.ndim != 2:
        raise DimensionMismatch(f"points must be (n, d), got shape {pts.shape}")
    return pts


def _nearest(pts: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assignments (ties -> lowest center index) and squared distance to them."""
    n = pts.shape[0]
    d2 = np.empty((n, centers.shape[0]), dtype=np.float64)
    for j in range(centers.shape[0]):
        diff = pts - centers[j]
        d2[:, j] = np.einsum("nd,nd->n", diff, diff)
    assign = np.argmin(d2, axis=1)
    return assign, d2[np.arange(n), assign]


def _kmeanspp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: per round, try 2 + floor(ln k) D^2-sampled candidates
    and keep the one that minimizes the resulting potential."""
    n = pts.shape[0]
    n_trials = 2 + int(np.log(k)) if k > 1 else 1
    centers = np.empty((k, pts.shape[1]), dtype=np.float64)
    centers[0] = pts[int(rng.integers(n))]
    diff = pts - centers[0]
    d2 = np.einsum("nd,nd->n", diff, diff)
    for j in range(1, k):
        cum = np.cumsum(d2)
        total = float(cum[-1])
        if total > 0.0:
            draws = rng.random(n_trials) * total
            candidates = np.minimum(
                np.searchsorted(cum, draws, side="right"), n - 1
            )
            best_idx = -1
            best_d2 = None
            best_potential = np.inf
            for idx in candidates:
                diff = pts - pts[idx]
                cand_d2 = np.minimum(d2, np.einsum("nd,nd->n", diff, diff))
                potential = float(np.einsum("n->", cand_d2))
                if potential < best_potential:
                    best_potential = potential
                    best_idx = int(idx)
                    best_d2 = cand_d2
            centers[j] = pts[best_idx]
            d2 = best_d2
        else:
            # all remaining mass is zero (duplicate points); fall back to uniform
            centers[j] = pts[int(rng.integers(n))]
    return centers


def _repair_empty(assign: np.ndarray, d2_own: np.ndarray, k: int) -> None:
    """Turn each empty cluster into a singleton holding the farthest point.

    Deterministic: empty clusters are processed in index order; the farthest
    point (ties -> lowest point index) whose current cluster keeps >= 2
    members is moved. Mutates ``assign`` in place.
    """
    counts = np.bincount(assign, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            continue
        order = np.argsort(-d2_own, kind="stable")
        for idx in order:
            if counts[assign[idx]] >= 2:
                counts[assign[idx]] -= 1
                assign[idx] = j
                counts[j] = 1
                break


def _grouped_means(pts: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, pts.shape[1]), dtype=np.float64)
    np.add.at(sums, assign, pts)
    counts = np.bincount(assign, minlength=k).astype(np.float64)
    counts[counts == 0.0] = 1.0  # empty clusters keep their previous center via caller
    return sums / counts[:, None]


def _radii(pts: np.ndarray, centers: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    dist = np.sqrt(np.einsum("nd,nd->n", pts - centers[assign], pts - centers[assign]))
    radii = np.zeros(k, dtype=np.float64)
    for j in range(k):
        member_d = dist[assign == j]
        if member_d.size:
            radii[j] = float(np.percentile(member_d, RADIUS_PERCENTILE))
    return radii


def kmeans(
    points,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> Clustering:
    """Lloyd's algorithm from a k-means++ start, fully deterministic in seed.

    Stops when the maximum center movement drops below ``tol`` with a stable
    assignment, or after ``max_iter`` iterations. Empty clusters are repaired
    each iteration by promoting the farthest point to a singleton.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} outside 1..{n}")

    rng = np.random.Generator(np.random.PCG64(seed))
    centers = _kmeanspp_init(pts, k, rng)
    assign, d2_own = _nearest(pts, centers)

    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        _repair_empty(assign, d2_own, k)
        new_centers = _grouped_means(pts, assign, k)
        # clusters left empty even after repair (cannot happen while n >= k)
        # retain their previous center
        empty = np.bincount(assign, minlength=k) == 0
        if empty.any():
            new_centers[empty] = centers[empty]
        movement = float(np.max(np.sqrt(np.einsum("kd,kd->k", new_centers - centers, new_centers - centers))))
        centers = new_centers
        new_assign, d2_own = _nearest(pts, centers)
        converged = movement < tol and np.array_equal(new_assign, assign)
        assign = new_assign
        if converged:
            break

    inertia = float(np.einsum("n->", d2_own))
    centers.flags.writeable = False
    assign.flags.writeable = False
    return Clustering(
        k=k,
        centers=centers,
        assignments=assign,
        inertia=inertia,
        radii=_radii(pts, centers, assign, k),
        iterations_run=iterations,
    )


def overlap_report(clustering: Clustering) -> OverlapReport:
    k = clustering.k
    if k < 2:
        raise SingleCluster("overlap report needs k >= 2")
    counts = np.bincount(clustering.assignments, minlength=k)
    if (counts == 0).any():
        raise EmptyCluster(f"clusters {np.flatnonzero(counts == 0).tolist()} are empty")

    centers = clustering.centers
    radii = clustering.radii
    margins = np.zeros((k, k), dtype=np.float64)
    overlap = np.zeros((k, k), dtype=bool)
    n_overlapping = 0
    for a in range(k):
        for b in range(a + 1, k):
            gap = float(np.linalg.norm(centers[a] - centers[b]))
            margin = gap - (radii[a] + radii[b])
            margins[a, b] = margins[b, a] = margin
            if margin < 0.0:
                overlap[a, b] = overlap[b, a] = True
                n_overlapping += 1
    n_pairs = k * (k - 1) // 2
    return OverlapReport(margins=margins, overlap=overlap, overlap_score=n_overlapping / n_pairs)


def single_cluster_report() -> OverlapReport:
    """The documented k=1 special case: no pairs, no overlap."""
    return OverlapReport(
        margins=np.zeros((1, 1)), overlap=np.zeros((1, 1), dtype=bool), overlap_score=0.0
    )


def overlap_groups(report: OverlapReport) -> list[list[int]]:
    """Connected components of the overlap graph, each sorted, smallest first."""
    k = report.overlap.shape[0]
    seen: set[int] = set()
    groups: list[list[int]] = []
    for start in range(k):
        if start in seen:
            continue
        stack = [start]
        component = []
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            component.append(node)
            stack.extend(int(m) for m in np.flatnonzero(report.overlap[node]) if m not in seen)
        groups.append(sorted(component))
    groups.sort()
    return groups


def _is_degenerate(clustering: Clustering) -> bool:
    """Empty clusters or coincident centers make a candidate unusable for k search."""
    counts = np.bincount(clustering.assignments, minlength=clustering.k)
    if (counts == 0).any():
        return True
    for a in range(clustering.k):
        for b in range(a + 1, clustering.k):
            if np.array_equal(clustering.centers[a], clustering.centers[b]):
                return True
    return False


def restart_seeds(seed: int, restarts: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(restarts, np.uint64)]


def best_of_restarts(
    points,
    k: int,
    seed: int,
    restarts: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> Clustering:
    """Lowest-inertia clustering over deterministically derived restart seeds."""
    best: Clustering | None = None
    for restart_seed in restart_seeds(seed, restarts):
        candidate = kmeans(points, k, restart_seed, max_iter=max_iter, tol=tol)
        if best is None or candidate.inertia < best.inertia:
            best = candidate
    assert best is not None
    return best


def select_k(
    points,
    k_max: int,
    seed: int,
    restarts: int = 8,
) -> tuple[Clustering, OverlapReport]:
    """Pick the cluster count with minimal overlap, searching k = 2..k_max.

    Ties prefer larger k (finer structure), then lower inertia. Candidates
    with empty clusters or coincident centers are discarded; when every
    k > 1 candidate is degenerate (all points identical, say) the k = 1
    clustering is returned with the single-cluster report. k_max is capped
    at the number of points.
    """
    pts = _as_points(points)
    if k_max < 1:
        raise KTooLarge(f"k_max={k_max} must be >= 1")
    k_max = min(k_max, pts.shape[0])

    if k_max >= 2:
        best_choice: tuple[float, int, float] | None = None
        chosen: tuple[Clustering, OverlapReport] | None = None
        for k in range(2, k_max + 1):
            clustering = best_of_restarts(pts, k, seed, restarts)
            if _is_degenerate(clustering):
                continue
            report = overlap_report(clustering)
            key = (report.overlap_score, -k, clustering.inertia)
            if best_choice is None or key < best_choice:
                best_choice = key
                chosen = (clustering, report)
        if chosen is not None:
            return chosen

    clustering = best_of_restarts(pts, 1, seed, restarts)
    return clustering, single_cluster_report()
