"""Master-level updates: cluster power fractions and bandwidth shares.

Secondary masters (one per BS) push each cluster's power fraction varpi
along the slave problem's budget multiplier and project back onto the
simplex {varpi >= 0, sum <= 1}. The primary master re-splits the global
bandwidth by a linear program that uses each cluster's previous-iteration
spectral efficiency as a fixed utility slope: every cluster keeps its QoS
floor and the residual goes to the highest-utility cluster(s). A damping
factor blends consecutive bandwidth allocations to stop the
winner-takes-residual solution from oscillating between near-tied clusters.
"""

from __future__ import annotations

import numpy as np

INFEASIBLE = float("nan")


def project_simplex(v, cap: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= cap}.

    Sort-based exact projection. If clipping to the non-negative orthant
    already satisfies the budget, that clipped point is returned.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    v = np.asarray(v, dtype=float)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= cap:
        return clipped
    # Project onto the face sum(x) = cap. Work in coordinates shifted by the
    # max, with entries more than cap below it clamped (they can never be
    # active): keeps the threshold search accurate for huge inputs, where
    # raw cumulative sums would lose cap to cancellation.
    w = np.maximum(v - v.max(), -(cap + 1.0))
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - cap
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0    # k=1 reads cap > 0: never empty
    k = ks[cond][-1]
    tau = css[k - 1] / k
    return np.maximum(w - tau, 0.0)


def secondary_update(varpi_bs, lambdas, nu: float) -> np.ndarray:
    """One projected-subgradient step on a BS's cluster power fractions."""
    if nu <= 0:
        raise ValueError("step size must be positive")
    varpi_bs = np.asarray(varpi_bs, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    return project_simplex(varpi_bs + nu * lambdas, cap=1.0)


def qos_slack_at_theta(theta: float, omega_star, demands, gains, eps,
                       tx_power, ici_power, noise_psd, bandwidth) -> float:
    """Minimum QoS slack of a cluster at bandwidth share `theta`, with the
    power weights held fixed."""
    omega = np.asarray(omega_star, dtype=float)
    gains = np.asarray(gains, dtype=float)
    demands = np.asarray(demands, dtype=float)
    eps = np.asarray(eps, dtype=float)
    rho = (ici_power + noise_psd * bandwidth * theta) / (tx_power * gains)
    with np.errstate(over="ignore"):
        q = 2.0 ** (demands / (bandwidth * theta))
    csum = np.cumsum(omega)
    lower = csum - omega
    higher = csum[-1] - csum
    slack = omega - (q - 1.0) * (lower + eps * higher + rho)
    return float(slack.min())


def theta_min_qos(omega_star, demands, gains, eps, tx_power, ici_power,
                  noise_psd, bandwidth, floor: float = 1e-6,
                  tol: float = 1e-6) -> float:
    """Smallest bandwidth share keeping every member's QoS satisfied.

    Bisection on [floor, 1]; the slack is monotone increasing in theta for
    any realistic noise level (q falls much faster than rho grows), which is
    verified on a coarse grid with a dense-scan fallback. Returns NaN when
    even theta = 1 cannot carry the demand.
    """
    def slack(theta):
        return qos_slack_at_theta(theta, omega_star, demands, gains, eps,
                                  tx_power, ici_power, noise_psd, bandwidth)

    if not np.any(np.asarray(demands, dtype=float) > 0):
        return floor
    if slack(1.0) < 0.0:
        return INFEASIBLE
    if slack(floor) >= 0.0:
        return floor

    grid = np.geomspace(floor, 1.0, 16)
    values = np.array([slack(t) for t in grid])
    with np.errstate(invalid="ignore"):
        non_monotone = np.any(np.diff(values) < -1e-12)
    if non_monotone:
        # non-monotone: dense scan for the last sign change, then bisect
        grid = np.geomspace(floor, 1.0, 4096)
        values = np.array([slack(t) for t in grid])
        neg = np.where(values < 0)[0]
        lo, hi = grid[neg[-1]], grid[min(neg[-1] + 1, grid.size - 1)]
    else:
        lo, hi = floor, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if slack(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def primary_update(utilities, theta_min, theta_prev=None,
                   damping: float = 1.0) -> np.ndarray:
    """Bandwidth re-split: floors plus residual to the top-utility clusters.

    Solves max sum(u_r * theta_r) s.t. sum(theta) <= 1, theta >= theta_min
    in closed form, then blends with the previous allocation:
    theta <- (1 - d) * theta_prev + d * theta_lp.
    """
    u = np.asarray(utilities, dtype=float)
    floors = np.asarray(theta_min, dtype=float)
    if np.any(np.isnan(floors)):
        raise ValueError("theta_min contains infeasible clusters")
    total_floor = floors.sum()
    if total_floor > 1.0 + 1e-9:
        raise ValueError(
            f"QoS floors sum to {total_floor:.6f} > 1: globally infeasible")

    theta = floors.copy()
    residual = max(0.0, 1.0 - total_floor)
    if residual > 0 and u.size:
        top = u >= u.max() * (1.0 - 1e-12) if u.max() > 0 else \
            u >= u.max() - 1e-15
        theta[top] += residual / top.sum()

    if theta_prev is not None and damping < 1.0:
        theta = (1.0 - damping) * np.asarray(theta_prev, dtype=float) \
            + damping * theta
    return theta
