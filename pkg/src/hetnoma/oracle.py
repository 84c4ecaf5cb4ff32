"""Independent brute-force verifiers for the analytic components.

These deliberately avoid the closed-form code paths: the grid search scans
the power simplex directly, the linear-system solver builds the active
equalities as a dense system, and the clustering benchmark enumerates set
partitions. They ship with the library so arbitrary user scenarios can be
spot-checked, not just the test fixtures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .slave import PDSC_TIGHT, ActiveSet, SlaveInput


@dataclass
class GridResult:
    omega: np.ndarray | None
    spectral: float
    empty: bool
    # best lattice point satisfying the constraints with zero tolerance;
    # a correct solver must dominate it with no discretization slack at all
    strict_omega: np.ndarray | None = None
    strict_spectral: float = -np.inf
    strict_empty: bool = True


def _simplex_grid(k: int, steps: int) -> np.ndarray:
    """All non-negative integer k-vectors summing to `steps`, as fractions."""
    if k == 1:
        return np.ones((1, 1))
    axes = np.meshgrid(*[np.arange(steps + 1)] * (k - 1), indexing="ij")
    rest = np.stack([a.ravel() for a in axes], axis=1)
    total = rest.sum(axis=1)
    keep = total <= steps
    rest = rest[keep]
    first = steps - total[keep]
    return np.column_stack([first, rest]) / float(steps)


def grid_slave(inp: SlaveInput, resolution: float = 1e-2) -> GridResult:
    """Exhaustive simplex scan of one cluster's power problem.

    Enumerates omega with sum = varpi at step `resolution * varpi`, keeps
    points meeting the QoS and power-disparity constraints within a
    `resolution` tolerance, and returns the best sumrate point. Cost grows
    as (1/resolution)^(K-1); K is capped at 4.
    """
    if inp.k > 4:
        raise ValueError("grid oracle is limited to K <= 4")
    if resolution > 1e-2 + 1e-15:
        raise ValueError("resolution must be <= 1e-2")
    steps = int(round(1.0 / resolution))
    if (steps + 1) ** (inp.k - 1) > 5e7:
        raise ValueError("grid too large; coarsen the resolution")
    pts = _simplex_grid(inp.k, steps) * inp.varpi

    csum = np.cumsum(pts, axis=1)
    lower = csum - pts
    higher = csum[:, -1:] - csum
    interf = lower + inp.eps[None, :] * higher + inp.rho[None, :]
    tol = resolution * max(1.0, inp.varpi)
    qos_slack = pts - (inp.q[None, :] - 1.0) * interf
    pdsc_slack = (pts - lower - inp.delta[None, :])[:, 1:]
    feas = (np.all(qos_slack >= -tol, axis=1)
            & np.all(pdsc_slack >= -tol, axis=1))
    if not np.any(feas):
        return GridResult(omega=None, spectral=-np.inf, empty=True)
    spectral = np.log2(1.0 + pts / interf).sum(axis=1)
    scored = np.where(feas, spectral, -np.inf)
    best = int(np.argmax(scored))
    result = GridResult(omega=pts[best], spectral=float(scored[best]),
                        empty=False)
    strict = (np.all(qos_slack >= 0.0, axis=1)
              & np.all(pdsc_slack >= 0.0, axis=1))
    if np.any(strict):
        scored = np.where(strict, spectral, -np.inf)
        best = int(np.argmax(scored))
        result.strict_omega = pts[best]
        result.strict_spectral = float(scored[best])
        result.strict_empty = False
    return result


def linear_system_omega(inp: SlaveInput, active: ActiveSet) -> np.ndarray | None:
    """Ground-truth candidate: dense solve of the active equalities.

    Row 0 is the power budget; row i is member (i+1)'s tight constraint.
    Returns None when the system is singular (degenerate parameters).
    """
    k = inp.k
    a = np.zeros((k, k))
    b = np.zeros(k)
    a[0, :] = 1.0
    b[0] = inp.varpi
    for i in range(1, k):
        if active.flags[i - 1] == PDSC_TIGHT:
            a[i, :i] = -1.0
            a[i, i] = 1.0
            b[i] = inp.delta[i]
        else:
            qm1 = inp.q[i] - 1.0
            a[i, :i] = -qm1
            a[i, i] = 1.0
            a[i, i + 1:] = -qm1 * inp.eps[i]
            b[i] = qm1 * inp.rho[i]
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None


def _partitions_capped(items: tuple, n_blocks: int, cap: int):
    """Set partitions of `items` into exactly `n_blocks` blocks of size <= cap."""
    if not items:
        if n_blocks == 0:
            yield []
        return
    if n_blocks <= 0:
        return
    first, rest = items[0], items[1:]
    # block containing `first`: choose its other members
    for extra in range(min(cap - 1, len(rest)) + 1):
        for combo in itertools.combinations(range(len(rest)), extra):
            block = (first,) + tuple(rest[j] for j in combo)
            remaining = tuple(rest[j] for j in range(len(rest))
                              if j not in combo)
            if len(remaining) > (n_blocks - 1) * cap:
                continue
            for tail in _partitions_capped(remaining, n_blocks - 1, cap):
                yield [block] + tail


def exhaustive_cf(bs_ues, cluster_size: int, evaluate, guard: int = 9):
    """Benchmark clustering: enumerate every admissible partition.

    `evaluate(clusters)` scores a list of member tuples (descending gain);
    the maximum over all partitions into R = ceil(U/K) clusters of at most
    K members is returned as (best clustering, best score).
    """
    ues = tuple(bs_ues)
    if len(ues) > guard:
        raise ValueError(f"exhaustive clustering refused for U > {guard}")
    if not ues:
        return [], -np.inf
    n_blocks = -(-len(ues) // cluster_size)
    best_score, best_part = -np.inf, None
    for part in _partitions_capped(ues, n_blocks, cluster_size):
        score = evaluate(part)
        if score > best_score:
            best_score, best_part = score, part
    return best_part, best_score


def equal_split_score_fn(gains: dict[int, float], eps: float, theta: float,
                         tx_power: float, ici_power: float, noise_psd: float,
                         bandwidth: float, varpi: float = 1.0):
    """Benchmark scoring rule: equal per-cluster power/bandwidth, member
    power inversely proportional to channel gain."""
    def evaluate(clusters) -> float:
        total = 0.0
        for members in clusters:
            ordered = sorted(members, key=lambda u: -gains[u])
            g = np.array([gains[u] for u in ordered])
            inv = 1.0 / g
            omega = varpi / len(clusters) * inv / inv.sum()
            rho = (ici_power + noise_psd * bandwidth * theta) / (tx_power * g)
            csum = np.cumsum(omega)
            interf = (csum - omega) + eps * (csum[-1] - csum) + rho
            total += float(np.log(1.0 + omega / interf).sum())
        return total
    return evaluate
