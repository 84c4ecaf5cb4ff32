"""End-to-end hierarchical power-bandwidth allocation over a scenario.

Pipeline: per-BS cluster formation, then alternating optimization. The
inner loop solves every cluster's power problem in closed form and lets
each BS re-split its transmit power along the budget multipliers; the
outer loop re-splits the global bandwidth from the clusters' last achieved
spectral efficiencies. Clusters that ever turn out infeasible are broken
into single-UE (OMA) clusters and never re-enter NOMA operation.

Baselines: `run_equal_pba` freezes uniform power/bandwidth splits and
solves each cluster once; `run_oma` forces cluster size 1 through the same
iterative pipeline.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel, clustering, master, slave
from .config import SimConfig


@dataclass
class ClusterUnit:
    cid: str
    bs_id: int
    members: tuple[int, ...]       # UE ids, descending gain
    fallback: bool = False         # converted to OMA after infeasibility

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class SimulationReport:
    scheme: str
    config: SimConfig
    scenario_seed: int
    scenario_digest: str
    clusters: list[dict]
    ue_rates: dict[int, float]
    sumrate: float
    utilities: dict[str, float]
    qos_satisfied: int
    inner_iters: list[int] = field(default_factory=list)
    outer_iters: int = 0
    trace: list[dict] = field(default_factory=list)
    fallback_clusters: list[str] = field(default_factory=list)
    unsatisfied_clusters: list[str] = field(default_factory=list)
    infeasibility_note: str | None = None
    wall_time: float = 0.0

    @property
    def theta(self) -> dict[str, float]:
        return {c["cid"]: c["theta"] for c in self.clusters}

    @property
    def varpi(self) -> dict[str, float]:
        return {c["cid"]: c["varpi"] for c in self.clusters}


def scenario_digest(scenario: channel.NetworkScenario) -> str:
    return hashlib.sha256(
        channel.scenario_to_json(scenario).encode()).hexdigest()[:16]


def _form_all_clusters(scenario: channel.NetworkScenario,
                       cluster_size: int) -> list[ClusterUnit]:
    units = []
    for bs in scenario.bss:
        ue_ids = scenario.ues_of_bs(bs.id)
        for cl in clustering.form_clusters(ue_ids, cluster_size, bs.id):
            units.append(ClusterUnit(cid=f"b{bs.id}r{cl.index}",
                                     bs_id=bs.id, members=cl.members))
    return units


class _Engine:
    """Mutable allocation state over a fixed scenario."""

    def __init__(self, scenario: channel.NetworkScenario, config: SimConfig,
                 units: list[ClusterUnit], alloc_ici: float | None = None):
        self.scenario = scenario
        self.config = config
        self.units = list(units)
        # ICI assumed by the allocator; may differ from the scenario's true
        # value for the interference-agnostic variant.
        self.ici = scenario.ici_power if alloc_ici is None else alloc_ici
        n = len(self.units)
        self.theta = {u.cid: 1.0 / n for u in self.units}
        self.varpi: dict[str, float] = {}
        for bs in scenario.bss:
            mine = [u for u in self.units if u.bs_id == bs.id]
            for u in mine:
                self.varpi[u.cid] = 1.0 / len(mine) if mine else 0.0
        self.solutions: dict[str, slave.SlaveSolution] = {}
        self.ever_infeasible: set[str] = set()

    # -- data assembly ---------------------------------------------------

    def _cluster_arrays(self, unit: ClusterUnit):
        sc = self.scenario
        bs = sc.bs_by_id(unit.bs_id)
        gains = np.array([sc.ues[u].gains[bs.id] for u in unit.members])
        demands = np.array([sc.ues[u].qos_demand for u in unit.members])
        eps = np.array([sc.ues[u].sic_error for u in unit.members])
        return bs, gains, demands, eps

    def slave_input(self, unit: ClusterUnit) -> slave.SlaveInput:
        bs, gains, demands, eps = self._cluster_arrays(unit)
        return channel.derive_slave_params(
            gains, demands, eps, self.theta[unit.cid], self.varpi[unit.cid],
            bs.tx_power, self.config.p_delta, self.ici,
            self.scenario.noise_psd, self.scenario.bandwidth)

    def _groups(self):
        """Clusters grouped by size, with stacked parameter arrays."""
        groups: dict[int, list[ClusterUnit]] = {}
        for u in self.units:
            groups.setdefault(u.size, []).append(u)
        packed = {}
        for k, members in sorted(groups.items()):
            inputs = [self.slave_input(u) for u in members]
            packed[k] = (members,
                         np.stack([i.rho for i in inputs]),
                         np.stack([i.q for i in inputs]),
                         np.stack([i.delta for i in inputs]),
                         np.stack([i.eps for i in inputs]))
        return packed

    # -- inner loop --------------------------------------------------------

    def _solve_all(self, groups) -> dict[str, dict]:
        out = {}
        for k, (members, rho, q, delta, eps) in groups.items():
            varpi = np.array([self.varpi[u.cid] for u in members])
            res = slave.solve_batch(varpi, rho, q, delta, eps)
            for j, u in enumerate(members):
                out[u.cid] = {"lam": float(res["lam"][j]),
                              "omega": res["omega"][j],
                              "feasible": bool(res["feasible"][j]),
                              "spectral": float(res["spectral"][j]),
                              "case": int(res["case"][j])}
        return out

    def inner_loop(self) -> tuple[dict[str, dict], int]:
        cfg = self.config
        groups = self._groups()
        by_bs: dict[int, list[ClusterUnit]] = {}
        for u in self.units:
            by_bs.setdefault(u.bs_id, []).append(u)
        sols = self._solve_all(groups)
        iters = 0
        for t in range(cfg.max_inner):
            iters = t + 1
            shift = 0.0
            for bs_id, mine in by_bs.items():
                old = np.array([self.varpi[u.cid] for u in mine])
                lam = np.array([sols[u.cid]["lam"] for u in mine])
                new = master.secondary_update(old, lam, cfg.step_size)
                shift = max(shift, float(np.abs(new - old).max()))
                for u, v in zip(mine, new):
                    self.varpi[u.cid] = float(v)
            sols = self._solve_all(groups)
            if shift < cfg.inner_tol:
                break
        for cid, s in sols.items():
            if not s["feasible"]:
                self.ever_infeasible.add(cid)
        return sols, iters

    # -- fallback ----------------------------------------------------------

    def convert_to_fallback(self, cids: set[str]) -> bool:
        """Split infeasible NOMA clusters into OMA singletons."""
        changed = False
        new_units = []
        for u in self.units:
            if u.cid not in cids or u.size == 1:
                new_units.append(u)
                if u.cid in cids and u.size == 1:
                    u.fallback = True
                continue
            changed = True
            theta_share = self.theta.pop(u.cid) / u.size
            varpi_share = self.varpi.pop(u.cid) / u.size
            for j, ue in enumerate(u.members):
                child = ClusterUnit(cid=f"{u.cid}o{j}", bs_id=u.bs_id,
                                    members=(ue,), fallback=True)
                new_units.append(child)
                self.theta[child.cid] = theta_share
                self.varpi[child.cid] = varpi_share
        self.units = new_units
        return changed

    # -- outer step ----------------------------------------------------------

    def theta_floors(self, sols) -> dict[str, float]:
        floors = {}
        for u in self.units:
            bs, gains, demands, eps = self._cluster_arrays(u)
            omega = sols[u.cid]["omega"] if sols[u.cid]["feasible"] else None
            if omega is None:
                floors[u.cid] = master.INFEASIBLE
                continue
            f = master.theta_min_qos(
                omega, demands, gains, eps, bs.tx_power, self.ici,
                self.scenario.noise_psd, self.scenario.bandwidth,
                floor=self.config.theta_floor)
            # a feasible cluster meets QoS at its current bandwidth, so the
            # current share caps the floor (guards bisection overshoot when
            # a QoS constraint is exactly tight at the current theta)
            if not np.isnan(f):
                f = min(f, self.theta[u.cid])
            floors[u.cid] = f
        return floors


def _finalize(engine: _Engine, sols, scheme, started, scenario, config,
              inner_iters, outer_iters, trace, note=None) -> SimulationReport:
    ue_rates: dict[int, float] = {u.id: 0.0 for u in scenario.ues}
    clusters, utilities = [], {}
    unsatisfied = []
    qos_ok = 0
    for unit in engine.units:
        s = sols[unit.cid]
        theta = engine.theta[unit.cid]
        omega = s["omega"]
        usable = s["feasible"] or unit.size == 1
        if unit.size == 1 and not s["feasible"]:
            omega = np.array([engine.varpi[unit.cid]])  # transmit anyway
        bs, gains, demands, eps = engine._cluster_arrays(unit)
        if usable:
            gamma = channel.sinr(gains, omega, theta, eps, bs.tx_power,
                                 scenario.ici_power, scenario.noise_psd,
                                 scenario.bandwidth)
            rates = channel.capacity(gamma, theta, scenario.bandwidth)
            utilities[unit.cid] = float(np.log2(1.0 + gamma).sum())
        else:
            rates = np.zeros(unit.size)
            utilities[unit.cid] = 0.0
        for ue, rate, demand in zip(unit.members, rates, demands):
            ue_rates[ue] = float(rate)
            if rate >= demand - 1e-6:
                qos_ok += 1
        if not s["feasible"]:
            unsatisfied.append(unit.cid)
        clusters.append({
            "cid": unit.cid, "bs_id": unit.bs_id,
            "members": list(unit.members), "fallback": unit.fallback,
            "theta": theta, "varpi": engine.varpi[unit.cid],
            "omega": np.asarray(omega, dtype=float).tolist(),
            "feasible": bool(s["feasible"]), "case": s["case"],
        })
    report = SimulationReport(
        scheme=scheme, config=config, scenario_seed=scenario.seed,
        scenario_digest=scenario_digest(scenario),
        clusters=sorted(clusters, key=lambda c: c["cid"]),
        ue_rates=ue_rates, sumrate=float(sum(ue_rates.values())),
        utilities=utilities, qos_satisfied=qos_ok,
        inner_iters=inner_iters, outer_iters=outer_iters, trace=trace,
        fallback_clusters=sorted(u.cid for u in engine.units if u.fallback),
        unsatisfied_clusters=sorted(unsatisfied),
        infeasibility_note=note, wall_time=time.perf_counter() - started)
    return report


def run_algorithm1(scenario: channel.NetworkScenario, config: SimConfig,
                   alloc_ici: float | None = None) -> SimulationReport:
    """Full hierarchical allocation: inner power loop, outer bandwidth loop.

    `alloc_ici` overrides the inter-cell interference level the allocator
    assumes (e.g. 0 for an interference-agnostic run); the reported rates
    are always evaluated under the scenario's true ICI.
    """
    started = time.perf_counter()
    units = _form_all_clusters(scenario, config.cluster_size)
    engine = _Engine(scenario, config, units, alloc_ici=alloc_ici)

    trace, inner_iters = [], []
    sols: dict[str, dict] = {}
    note = None
    outer = 0
    for k in range(config.max_outer):
        outer = k + 1
        sols, iters = engine.inner_loop()
        inner_iters.append(iters)

        floors = engine.theta_floors(sols)
        bad = {cid for cid, f in floors.items() if np.isnan(f)}
        bad |= {u.cid for u in engine.units
                if u.cid in engine.ever_infeasible}
        converted = engine.convert_to_fallback(bad)
        if converted:
            sols, extra = engine.inner_loop()
            inner_iters[-1] += extra
            floors = engine.theta_floors(sols)

        order = sorted(engine.theta)
        floor_vec = np.array([floors[c] if not np.isnan(floors[c])
                              else config.theta_floor for c in order])
        util_vec = np.array([sols[c]["spectral"] if sols[c]["feasible"]
                             else 0.0 for c in order])
        theta_old = np.array([engine.theta[c] for c in order])
        if floor_vec.sum() > 1.0 + 1e-9:
            note = (f"QoS bandwidth floors sum to {floor_vec.sum():.4f} > 1; "
                    "demand cannot be carried")
            trace.append({"outer": outer, "sum_utility": float(util_vec.sum()),
                          "max_violation": float(floor_vec.sum() - 1.0),
                          "theta": dict(zip(order, theta_old))})
            break
        theta_new = master.primary_update(util_vec, floor_vec,
                                          theta_prev=theta_old,
                                          damping=config.damping)
        shift = float(np.abs(theta_new - theta_old).max())
        trace.append({"outer": outer, "sum_utility": float(util_vec.sum()),
                      "max_violation": max(0.0, float(theta_new.sum()) - 1.0),
                      "theta": dict(zip(order, theta_new))})
        if shift < config.outer_tol and not converted:
            break
        for c, v in zip(order, theta_new):
            engine.theta[c] = float(v)
    else:
        # iteration cap hit right after a theta update: re-optimize the
        # powers once so the reported allocation matches the final theta
        sols, extra = engine.inner_loop()
        inner_iters.append(extra)

    return _finalize(engine, sols, "noma", started, scenario, config,
                     inner_iters, outer, trace, note)


def run_equal_pba(scenario: channel.NetworkScenario,
                  config: SimConfig) -> SimulationReport:
    """Uniform bandwidth and per-BS-uniform cluster power, single solve."""
    started = time.perf_counter()
    units = _form_all_clusters(scenario, config.cluster_size)
    engine = _Engine(scenario, config, units)
    sols = engine._solve_all(engine._groups())
    bad = {cid for cid, s in sols.items() if not s["feasible"]}
    if engine.convert_to_fallback(bad):
        sols = engine._solve_all(engine._groups())
    return _finalize(engine, sols, "equal", started, scenario, config,
                     [], 0, [])


def run_oma(scenario: channel.NetworkScenario,
            config: SimConfig) -> SimulationReport:
    """Power-and-bandwidth-optimized OMA: cluster size forced to 1."""
    report = run_algorithm1(scenario, config.replace(cluster_size=1))
    report.scheme = "oma"
    return report


def metrics(report: SimulationReport,
            baseline: SimulationReport | None = None) -> dict:
    """Summary record of one report, optionally normalized to a baseline."""
    rates = np.array(sorted(report.ue_rates.values()))
    out = {
        "scheme": report.scheme,
        "sumrate": report.sumrate,
        "rate_quantiles": {str(p): float(np.quantile(rates, p))
                           for p in (0.1, 0.5, 0.9)},
        "qos_satisfied": report.qos_satisfied,
        "n_ues": rates.size,
        "outer_iters": report.outer_iters,
        "message_count": report.outer_iters * len(report.clusters),
        "fallback_clusters": len(report.fallback_clusters),
    }
    if baseline is not None:
        if baseline.scenario_digest != report.scenario_digest:
            raise ValueError("baseline report stems from a different scenario")
        out["normalized_sumrate"] = (report.sumrate / baseline.sumrate
                                     if baseline.sumrate else float("nan"))
    return out
