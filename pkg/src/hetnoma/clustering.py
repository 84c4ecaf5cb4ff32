"""Cluster formation by gain-level partitioning and sequential matching.

Each BS sorts its UEs by descending channel gain, slices them into at most
K disjoint gain levels of R = ceil(U/K) UEs each, and chains the levels
together: stage s matches the chains' level-s members against level s+1 as
a maximum-weight rectangular assignment. With the log-domain gain-disparity
weights every square stage is fully tied, the deterministic tie-break picks
the identity matching, and the whole procedure collapses to indexing:
cluster r takes the r-th member of every level. Both paths are provided;
the indexing one is the production default, the matching one accepts
arbitrary weight functions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Partition:
    bs_id: int
    level: int                 # 1-based gain level
    members: tuple[int, ...]   # UE ids, descending gain


@dataclass(frozen=True)
class Cluster:
    bs_id: int
    index: int                 # 1-based cluster index r
    members: tuple[int, ...]   # UE ids, descending gain

    @property
    def size(self) -> int:
        return len(self.members)


def partition_ues(ue_ids_sorted: Sequence[int], cluster_size: int,
                  bs_id: int = 0) -> list[Partition]:
    """Slice a descending-gain UE list into at most `cluster_size` levels.

    Level l holds positions (l-1)*R .. min(l*R, U) with R = ceil(U/K);
    the last level may be short.
    """
    if cluster_size < 1:
        raise ValueError("cluster_size must be >= 1")
    ids = list(ue_ids_sorted)
    if not ids:
        return []
    u = len(ids)
    r = -(-u // cluster_size)          # ceil(U/K)
    levels = []
    for lvl in range(cluster_size):
        chunk = ids[lvl * r:(lvl + 1) * r]
        if not chunk:
            break
        levels.append(Partition(bs_id=bs_id, level=lvl + 1,
                                members=tuple(chunk)))
    return levels


def edge_weights(upper: Sequence[float], lower: Sequence[float]) -> np.ndarray:
    """Gain-disparity weight matrix: entry (i, j) = upper_i / lower_j."""
    up = np.asarray(upper, dtype=float)
    lo = np.asarray(lower, dtype=float)
    if np.any(lo <= 0) or np.any(up <= 0):
        raise ValueError("gains must be strictly positive")
    return up[:, None] / lo[None, :]


def rectangular_assignment(weights: np.ndarray) -> dict[int, int]:
    """Maximum-weight rectangular matching with deterministic tie-break.

    Returns an injective row -> col map of min(rows, cols) edges. Among the
    optima, rows are committed in order to the lowest admissible column
    (checked by re-solving the remaining subproblem), so equal-weight
    matrices resolve reproducibly.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return {}
    n_rows, n_cols = w.shape
    rows, cols = linear_sum_assignment(w, maximize=True)
    opt = w[rows, cols].sum()
    tol = 1e-9 * (1.0 + abs(opt))

    match: dict[int, int] = {}
    free_cols = list(range(n_cols))
    remaining_rows = list(range(n_rows))
    committed = 0.0
    n_edges = min(n_rows, n_cols)

    def best_completion(row_pool, col_pool):
        if not row_pool or not col_pool:
            return 0.0
        sub = w[np.ix_(row_pool, col_pool)]
        rr, cc = linear_sum_assignment(sub, maximize=True)
        return sub[rr, cc].sum()

    for r in remaining_rows:
        rest_rows = [x for x in remaining_rows if x > r]
        # skipping row r is allowed only if enough rows remain to fill cols
        can_skip = len(rest_rows) >= (n_edges - len(match))
        chosen = None
        for c in free_cols:
            total = committed + w[r, c] + best_completion(
                rest_rows, [x for x in free_cols if x != c])
            if total >= opt - tol:
                chosen = c
                break
        if chosen is None:
            if not can_skip:
                raise RuntimeError("assignment refinement failed")
            continue
        match[r] = chosen
        committed += w[r, chosen]
        free_cols.remove(chosen)
        if len(match) == n_edges:
            break
    return match


def sequential_wmm(partitions: Sequence[Partition],
                   weight_fn: Callable[[int, int], float]) -> list[Cluster]:
    """Chain gain levels by repeated maximum-weight bipartite matching.

    `weight_fn(ue_upper, ue_lower)` scores the edge between a chain's
    current tail (level-s member) and a level-(s+1) candidate. Chains that
    find no partner (short levels) simply stay shorter.
    """
    if not partitions:
        return []
    bs_id = partitions[0].bs_id
    chains: list[list[int]] = [[ue] for ue in partitions[0].members]
    for s in range(1, len(partitions)):
        lower = partitions[s].members
        active = [i for i, ch in enumerate(chains) if len(ch) == s]
        if not active or not lower:
            continue
        w = np.array([[weight_fn(chains[i][-1], ue) for ue in lower]
                      for i in active])
        match = rectangular_assignment(w)
        for row, col in match.items():
            chains[active[row]].append(lower[col])
    return [Cluster(bs_id=bs_id, index=r + 1, members=tuple(ch))
            for r, ch in enumerate(chains)]


def index_clustering(partitions: Sequence[Partition]) -> list[Cluster]:
    """Fast path: cluster r = r-th member of each level that has one."""
    if not partitions:
        return []
    bs_id = partitions[0].bs_id
    n_clusters = len(partitions[0].members)
    clusters = []
    for r in range(n_clusters):
        members = tuple(p.members[r] for p in partitions if r < len(p.members))
        clusters.append(Cluster(bs_id=bs_id, index=r + 1, members=members))
    return clusters


def gain_ratio_weight_fn(gains: dict[int, float]) -> Callable[[int, int], float]:
    """Default edge-weight design: gain disparity upper/lower, log domain.

    Maximizing the summed log-ratios maximizes the product of the gain
    disparities. Within a square stage the total is the same for every
    pairing (the logs separate), so the lexicographic tie-break yields the
    identity matching; on a short last level the strongest chains win the
    remaining members. Both effects together make the matcher reproduce the
    indexing rule exactly. The plain ratio sum does not have this property:
    it is maximized by the reversal pairing.
    """
    def fn(ue_upper: int, ue_lower: int) -> float:
        return float(np.log(gains[ue_upper] / gains[ue_lower]))
    return fn


def form_clusters(ue_ids_sorted: Sequence[int], cluster_size: int,
                  bs_id: int = 0,
                  weight_fn: Callable[[int, int], float] | None = None
                  ) -> list[Cluster]:
    """Cluster one BS's UEs.

    With the default (gain-ratio) weights the indexing fast path applies;
    a custom `weight_fn` routes through the sequential matcher.
    """
    partitions = partition_ues(ue_ids_sorted, cluster_size, bs_id)
    if weight_fn is None:
        return index_clustering(partitions)
    return sequential_wmm(partitions, weight_fn)


def clusters_to_csv(clusters: Sequence[Cluster], gains: dict[int, float],
                    path: str, header_comment: str | None = None) -> None:
    """Export cluster assignments: bs_id, cluster_index, rank, ue_id, gain."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["bs_id", "cluster_index", "rank", "ue_id", "gain"])
        for cl in clusters:
            for rank, ue in enumerate(cl.members, start=1):
                writer.writerow([cl.bs_id, cl.index, rank, ue,
                                 repr(gains[ue])])
