"""Closed-form per-cluster power allocation under imperfect SIC.

One cluster of K gain-ordered members maximizes its sumrate over the power
weights omega subject to a cluster power budget (always tight at the
optimum), per-member QoS constraints, and per-member power-disparity
constraints (PDSC). For each member i >= 2 exactly one of {QoS, PDSC} binds
at the optimum, so 2^(K-1) active-set cases cover the search space. Each
case has a closed-form candidate obtained by solving the active equalities:
with T_i the power prefix sum, both constraint types make omega_i an affine
function of T_{i-1},

    QoS tight:  omega_i = (q_i-1) * ((1-eps_i) T_{i-1} + eps_i varpi + rho_i)
                          / (1 + eps_i (q_i-1))
    PDSC tight: omega_i = T_{i-1} + delta_i

so T_K is affine in omega_1 and the budget equality pins omega_1. With all
eps_i = 0 the QoS growth factor reduces to q_i and the PDSC one to 2, which
reproduces the familiar perfect-SIC expressions; the eps-dependent parts are
the residual-interference corrections.

Every candidate is screened against the inactive primal constraints and the
Lagrange multipliers recovered from the stationarity conditions; the
feasible case with the highest sumrate wins.

All case arithmetic is vectorized over (instances, cases) so network-scale
inner loops stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-12
MAX_K = 8

QOS_TIGHT = "qos_tight"
PDSC_TIGHT = "pdsc_tight"


@dataclass(frozen=True)
class SlaveInput:
    """Normalized data of one cluster's power problem.

    Arrays are indexed by member rank, 0 = strongest (descending gain), so
    rho and delta are non-decreasing.
    """

    varpi: float
    theta: float
    bandwidth: float
    rho: np.ndarray
    q: np.ndarray
    delta: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        for name in ("rho", "q", "delta", "eps"):
            object.__setattr__(self, name,
                               np.atleast_1d(np.asarray(getattr(self, name),
                                                        dtype=float)))
        k = self.rho.size
        if k < 1 or k > MAX_K:
            raise ValueError(f"cluster size {k} outside [1, {MAX_K}]")
        if not (self.q.size == self.delta.size == self.eps.size == k):
            raise ValueError("per-member arrays must share one length")
        if np.any(self.q < 1.0):
            raise ValueError("q factors must be >= 1")
        if np.any(self.eps < 0.0) or np.any(self.eps > 1.0):
            raise ValueError("eps must lie in [0, 1]")
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def k(self) -> int:
        return self.rho.size


@dataclass(frozen=True)
class ActiveSet:
    """Which constraint binds for each member i >= 2.

    `flags[i-2]` is the tightness of member i (1-based), one of
    QOS_TIGHT / PDSC_TIGHT. Member 1 carries no flag; the budget is always
    active.
    """

    flags: tuple[str, ...]

    def pdsc_mask(self, k: int) -> np.ndarray:
        mask = np.zeros(k, dtype=bool)
        for j, f in enumerate(self.flags):
            mask[j + 1] = f == PDSC_TIGHT
        return mask

    @classmethod
    def from_index(cls, case: int, k: int) -> "ActiveSet":
        flags = tuple(PDSC_TIGHT if (case >> j) & 1 else QOS_TIGHT
                      for j in range(k - 1))
        return cls(flags)

    @property
    def index(self) -> int:
        return sum(1 << j for j, f in enumerate(self.flags)
                   if f == PDSC_TIGHT)


@dataclass
class SlaveSolution:
    omega: np.ndarray
    lam: float
    mu: np.ndarray
    varphi: np.ndarray
    active_set: ActiveSet
    feasible: bool
    sumrate: float                      # bits/s, theta*B*sum log2(1+gamma)
    spectral_sum: float                 # sum log2(1+gamma)
    cases: list[dict] = field(default_factory=list)


def enumerate_active_sets(k: int) -> list[ActiveSet]:
    """All 2^(K-1) cases in binary-counting order, member 2 least significant,
    with qos_tight as the zero bit."""
    if k < 1:
        raise ValueError("cluster size must be >= 1")
    return [ActiveSet.from_index(c, k) for c in range(1 << (k - 1))]


def _case_masks(k: int) -> np.ndarray:
    """(2^(K-1), K) boolean PDSC-tight masks; column 0 is always False."""
    n_cases = 1 << (k - 1)
    cases = np.arange(n_cases)[:, None]
    bits = (cases >> np.arange(k - 1)[None, :]) & 1
    masks = np.zeros((n_cases, k), dtype=bool)
    masks[:, 1:] = bits.astype(bool)
    return masks


def _candidate_omegas(varpi, rho, q, delta, eps, pdsc):
    """Candidate power weights for stacked cases.

    Inputs broadcast to a common (..., K) shape; `varpi` to (...). Returns
    omega of the same (..., K) shape. Solves the active equalities by the
    affine prefix-sum recursion; exact for any eps.
    """
    denom = 1.0 + eps * (q - 1.0)
    a_qos = (q - 1.0) * (1.0 - eps) / denom
    b_qos = (q - 1.0) * (eps * varpi[..., None] + rho) / denom
    a = np.where(pdsc, 1.0, a_qos)
    b = np.where(pdsc, delta, b_qos)

    k = a.shape[-1]
    growth = 1.0 + a
    # T_K = omega_1 * prod(growth[1:]) + sum_i b_i * prod_{j>i} growth_j
    tail = np.ones_like(a)
    for i in range(k - 2, 0, -1):
        tail[..., i] = tail[..., i + 1] * growth[..., i + 1]
    scale = tail[..., 1] * growth[..., 1] if k > 1 else np.ones_like(varpi)
    const = (b[..., 1:] * tail[..., 1:]).sum(axis=-1) if k > 1 else 0.0
    omega1 = (varpi - const) / scale

    omega = np.empty(np.broadcast_shapes(a.shape, omega1.shape + (k,)))
    omega[..., 0] = omega1
    t = omega1
    for i in range(1, k):
        w = a[..., i] * t + b[..., i]
        omega[..., i] = w
        t = t + w
    return omega


def _denominators(omega, rho, eps):
    """SINR denominators D'_i and post-power D_i = D'_i + omega_i."""
    t = np.cumsum(omega, axis=-1)
    prefix = t - omega
    post = t[..., -1:] - t
    d_lo = prefix + eps * post + rho
    return d_lo, d_lo + omega, prefix, post


def _primal_slacks(varpi, omega, rho, q, delta, eps):
    d_lo, _, prefix, post = _denominators(omega, rho, eps)
    qos = omega - (q - 1.0) * d_lo
    pdsc = omega - prefix - delta
    budget = varpi - omega.sum(axis=-1)
    return qos, pdsc, budget


def _primal_ok(varpi, omega, rho, q, delta, eps, pdsc_mask, tol=PRIMAL_TOL):
    qos, pdsc, budget = _primal_slacks(varpi, omega, rho, q, delta, eps)
    ok = np.all(omega >= -tol, axis=-1)
    ok &= np.abs(budget) <= tol
    ok &= qos[..., 0] >= -tol
    # the INACTIVE constraint of each member i>=2 must hold
    inactive = np.where(pdsc_mask[..., 1:], qos[..., 1:], pdsc[..., 1:])
    if inactive.shape[-1]:
        ok &= np.all(inactive >= -tol, axis=-1)
    return ok


def _multipliers(omega, rho, q, eps, pdsc_mask):
    """Lagrange multipliers recovered from the stationarity conditions.

    kappa_i collects the utility-gradient terms of member i; consecutive
    differences pin down mu_i or varphi_i (whichever is active), and the
    last member's stationarity pins lambda.
    """
    d_lo, d_hi, _, _ = _denominators(omega, rho, eps)
    cross = omega / (d_lo * d_hi)
    e = eps * cross                       # effect of omega_i on members m < i
    f = cross                             # effect on members n > i
    e_before = np.cumsum(e, axis=-1) - e
    f_rev = np.flip(np.cumsum(np.flip(f, axis=-1), axis=-1), axis=-1)
    f_after = f_rev - f
    kappa = 1.0 / d_hi - e_before - f_after

    k = omega.shape[-1]
    mu = np.zeros_like(omega)
    phi = np.zeros_like(omega)
    for i in range(1, k):
        carry = phi[..., i - 1] + mu[..., i - 1] * (
            1.0 + eps[..., i - 1] * (q[..., i - 1] - 1.0))
        num = kappa[..., i - 1] - kappa[..., i] + carry
        is_pdsc = pdsc_mask[..., i]
        phi[..., i] = np.where(is_pdsc, num / 2.0, 0.0)
        mu[..., i] = np.where(is_pdsc, 0.0, num / q[..., i])
    lam = (kappa[..., -1] + phi[..., -1] + mu[..., -1]
           - (mu[..., :-1] * eps[..., :-1] * (q[..., :-1] - 1.0)).sum(axis=-1))
    return lam, mu, phi, kappa


def solve_batch(varpi, rho, q, delta, eps):
    """Solve n same-size clusters at once.

    varpi: (n,); rho/q/delta/eps: (n, K). Returns a dict with omega (n, K),
    lam (n,), feasible (n,), spectral (n,) [sum log2(1+gamma)], case (n,),
    mu, phi (n, K).
    """
    varpi = np.atleast_1d(np.asarray(varpi, dtype=float))
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    n, k = rho.shape

    if k == 1:
        omega = varpi[:, None].copy()
        qos_slack = omega[:, 0] - (q[:, 0] - 1.0) * rho[:, 0]
        feas = qos_slack >= -PRIMAL_TOL
        lam = 1.0 / (varpi + rho[:, 0])
        spectral = np.log2(1.0 + omega[:, 0] / rho[:, 0])
        return {"omega": omega, "lam": lam, "feasible": feas,
                "spectral": spectral, "case": np.zeros(n, dtype=int),
                "mu": np.zeros((n, 1)), "phi": np.zeros((n, 1))}

    masks = _case_masks(k)                          # (C, K)
    c = masks.shape[0]
    vexp = varpi[:, None]                           # (n, C) broadcast
    rho_b, q_b = rho[:, None, :], q[:, None, :]
    delta_b, eps_b = delta[:, None, :], eps[:, None, :]
    mask_b = np.broadcast_to(masks[None, :, :], (n, c, k))

    omega = _candidate_omegas(np.broadcast_to(vexp, (n, c)),
                              rho_b, q_b, delta_b, eps_b, mask_b)
    primal = _primal_ok(vexp, omega, rho_b, q_b, delta_b, eps_b, mask_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam, mu, phi, _ = _multipliers(omega, rho_b, q_b, eps_b, mask_b)
    dual = (lam >= -DUAL_TOL) & np.all(mu >= -DUAL_TOL, axis=-1) \
        & np.all(phi >= -DUAL_TOL, axis=-1)
    feas = primal & dual

    d_lo, _, _, _ = _denominators(omega, rho_b, eps_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        spectral = np.log2(1.0 + np.maximum(omega, 0.0) / d_lo).sum(axis=-1)
    spectral = np.where(np.isfinite(spectral), spectral, -np.inf)
    score = np.where(feas, spectral, -np.inf)
    best = np.argmax(score, axis=-1)                # first max: low case wins ties

    idx = np.arange(n)
    any_feas = feas[idx, best]
    return {"omega": omega[idx, best], "lam": np.where(any_feas, lam[idx, best], 0.0),
            "feasible": any_feas, "spectral": spectral[idx, best],
            "case": best, "mu": mu[idx, best], "phi": phi[idx, best],
            "all_omega": omega, "all_feasible": feas,
            "all_spectral": spectral, "all_primal": primal, "all_dual": dual}


def closed_form_omega(inp: SlaveInput, active: ActiveSet) -> np.ndarray:
    """Candidate power weights for one active-set case.

    Negative entries flag the case as infeasible; they are not an error.
    For K <= 3 perfect-SIC inputs the result is cross-checked against the
    independently transcribed explicit per-case expressions.
    """
    if inp.k == 1:
        return np.array([inp.varpi])
    mask = active.pdsc_mask(inp.k)
    omega = _candidate_omegas(np.asarray(inp.varpi, dtype=float)[None],
                              inp.rho[None], inp.q[None], inp.delta[None],
                              inp.eps[None], mask[None])[0]
    if inp.k <= 3 and not np.any(inp.eps):
        ref = table2_omega(inp, active)
        if not np.allclose(omega, ref, rtol=0.0, atol=1e-12 * max(1.0, inp.varpi)):
            raise AssertionError("recursion disagrees with explicit K<=3 forms")
    return omega


def table2_omega(inp: SlaveInput, active: ActiveSet) -> np.ndarray:
    """Explicit per-case allocations for K in {2, 3}, perfect SIC only.

    Independent transcription of the K<=2 and K=3 case tables with the
    residual-interference corrections removed; used as a cross-check of the
    general recursion.
    """
    if inp.k not in (2, 3):
        raise ValueError("explicit forms cover K in {2, 3} only")
    if np.any(inp.eps):
        raise ValueError("explicit forms are the eps=0 expressions")
    w, rho, q, d = inp.varpi, inp.rho, inp.q, inp.delta
    flags = active.flags
    if inp.k == 2:
        if flags[0] == QOS_TIGHT:
            o1 = w / q[1] - rho[1] * (q[1] - 1.0) / q[1]
            o2 = w * (q[1] - 1.0) / q[1] + rho[1] * (q[1] - 1.0) / q[1]
        else:
            o1 = w / 2.0 - d[1] / 2.0
            o2 = w / 2.0 + d[1] / 2.0
        return np.array([o1, o2])
    q2, q3, r2, r3, d2, d3 = q[1], q[2], rho[1], rho[2], d[1], d[2]
    if flags == (QOS_TIGHT, QOS_TIGHT):
        o1 = w / (q2 * q3) - r2 * (q2 - 1) / q2 - r3 * (q3 - 1) / (q2 * q3)
        o2 = (w * (q2 - 1) / (q2 * q3) + r2 * (q2 - 1) / q2
              - r3 * (q2 - 1) * (q3 - 1) / (q2 * q3))
        o3 = w * (q3 - 1) / q3 + r3 * (q3 - 1) / q3
    elif flags == (QOS_TIGHT, PDSC_TIGHT):
        o1 = w / (2 * q2) - r2 * (q2 - 1) / q2 - d3 / (2 * q2)
        o2 = (w * (q2 - 1) / (2 * q2) + r2 * (q2 - 1) / q2
              - d3 * (q2 - 1) / (2 * q2))
        o3 = w / 2.0 + d3 / 2.0
    elif flags == (PDSC_TIGHT, QOS_TIGHT):
        o1 = w / (2 * q3) - d2 / 2.0 - r3 * (q3 - 1) / (2 * q3)
        o2 = w / (2 * q3) + d2 / 2.0 - r3 * (q3 - 1) / (2 * q3)
        o3 = w * (q3 - 1) / q3 + r3 * (q3 - 1) / q3
    else:
        o1 = w / 4.0 - d2 / 2.0 - d3 / 4.0
        o2 = w / 4.0 + d2 / 2.0 - d3 / 4.0
        o3 = w / 2.0 + d3 / 2.0
    return np.array([o1, o2, o3])


def check_primal(inp: SlaveInput, omega: np.ndarray, active: ActiveSet,
                 tol: float = PRIMAL_TOL) -> bool:
    """Primal screen: non-negativity, tight budget, inactive slacks."""
    omega = np.asarray(omega, dtype=float)
    if inp.k == 1:
        qos, _, budget = _primal_slacks(inp.varpi, omega, inp.rho, inp.q,
                                        inp.delta, inp.eps)
        return bool(np.all(omega >= -tol) and abs(budget) <= tol
                    and qos[0] >= -tol)
    mask = active.pdsc_mask(inp.k)
    return bool(_primal_ok(np.asarray(inp.varpi, dtype=float), omega,
                           inp.rho, inp.q, inp.delta, inp.eps, mask, tol))


def multipliers(inp: SlaveInput, omega: np.ndarray, active: ActiveSet):
    """(lambda*, mu*, varphi*) for a candidate that passed the primal screen.

    A negative multiplier rejects the case, it is not an error. The scale
    omits the constant theta*B/ln2 stationarity prefactor; the subgradient
    step absorbs it.
    """
    omega = np.asarray(omega, dtype=float)
    if inp.k == 1:
        return float(1.0 / (inp.varpi + inp.rho[0])), np.zeros(1), np.zeros(1)
    mask = active.pdsc_mask(inp.k)
    lam, mu, phi, _ = _multipliers(omega, inp.rho, inp.q, inp.eps, mask)
    return float(lam), mu, phi


def kappa_values(inp: SlaveInput, omega: np.ndarray) -> np.ndarray:
    """Stationarity constants kappa_i at a given allocation."""
    omega = np.asarray(omega, dtype=float)
    mask = np.zeros(inp.k, dtype=bool)
    _, _, _, kappa = _multipliers(omega, inp.rho, inp.q, inp.eps, mask)
    return kappa


def stationarity_residual(inp: SlaveInput, sol: "SlaveSolution") -> float:
    """Max |d Lagrangian / d omega_i| at the returned solution (unit scale)."""
    kappa = kappa_values(inp, sol.omega)
    k = inp.k
    res = np.empty(k)
    for i in range(k):
        phi_i = sol.varphi[i] if i >= 1 else 0.0
        res[i] = (kappa[i] - sol.lam + phi_i - sol.varphi[i + 1:].sum()
                  + sol.mu[i]
                  - (sol.mu[:i] * inp.eps[:i] * (inp.q[:i] - 1.0)).sum()
                  - (sol.mu[i + 1:] * (inp.q[i + 1:] - 1.0)).sum())
    return float(np.max(np.abs(res)))


def solve(inp: SlaveInput, collect_cases: bool = False) -> SlaveSolution:
    """Enumerate the 2^(K-1) cases and return the best KKT-valid one.

    Infeasibility is a value (`feasible=False`), signalling the caller to
    fall back to per-member OMA operation.
    """
    res = solve_batch(np.array([inp.varpi]), inp.rho[None], inp.q[None],
                      inp.delta[None], inp.eps[None])
    best = int(res["case"][0])
    active = ActiveSet.from_index(best, inp.k)
    feasible = bool(res["feasible"][0])
    spectral = float(res["spectral"][0]) if feasible else 0.0
    sol = SlaveSolution(
        omega=res["omega"][0], lam=float(res["lam"][0]),
        mu=res["mu"][0], varphi=res["phi"][0], active_set=active,
        feasible=feasible,
        sumrate=inp.theta * inp.bandwidth * spectral,
        spectral_sum=spectral,
    )
    if collect_cases and inp.k > 1:
        for c in range(res["all_omega"].shape[1]):
            sol.cases.append({
                "case": c,
                "flags": ActiveSet.from_index(c, inp.k).flags,
                "omega": res["all_omega"][0, c].tolist(),
                "primal_ok": bool(res["all_primal"][0, c]),
                "dual_ok": bool(res["all_dual"][0, c]),
                "spectral": float(res["all_spectral"][0, c]),
            })
    return sol
