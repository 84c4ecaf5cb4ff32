"""Network scenario generation, channel gains, association, SINR and capacity.

Composite gain model: g = A * d^(-eta) * 10^(xi/10), with xi ~ N(0, sigma^2)
in dB (log-normal shadowing) and unit mean-square fast fading. Distances are
floored at `distance_floor` meters to avoid the path-loss singularity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, SimConfig
from .slave import SlaveInput


@dataclass(frozen=True)
class BaseStation:
    id: int
    kind: str            # "macro" | "small"
    position: tuple[float, float]
    tx_power: float      # watts

    def __post_init__(self):
        if self.kind not in ("macro", "small"):
            raise ValueError(f"unknown BS kind {self.kind!r}")
        if self.kind == "macro" and self.id != 0:
            raise ValueError("macro BS must carry id 0")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")


@dataclass
class UserEquipment:
    id: int
    position: tuple[float, float]
    qos_demand: float                  # bits/s
    sic_error: float                   # epsilon in [0, 1]
    gains: dict[int, float] = field(default_factory=dict)  # BS id -> linear gain
    serving_bs: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.sic_error <= 1.0):
            raise ValueError("sic_error must lie in [0, 1]")
        if self.qos_demand < 0:
            raise ValueError("qos_demand must be non-negative")


@dataclass(frozen=True)
class ChannelParams:
    antenna_const: float = 1.0
    pathloss_exp: float = 3.76
    shadow_std_db: float = 10.0
    fading_mean_sq: float = 1.0

    def __post_init__(self):
        if self.pathloss_exp <= 0:
            raise ValueError("pathloss_exp must be positive")
        if self.shadow_std_db < 0:
            raise ValueError("shadow_std_db must be non-negative")
        if self.fading_mean_sq != 1.0:
            raise ValueError("fading_mean_sq is fixed to 1")


@dataclass
class NetworkScenario:
    bss: list[BaseStation]
    ues: list[UserEquipment]
    area: tuple[float, float]
    bandwidth: float       # Hz
    noise_psd: float       # W/Hz
    ici_power: float       # watts
    seed: int

    def bs_by_id(self, bs_id: int) -> BaseStation:
        return self.bss[bs_id]

    def ue_by_id(self, ue_id: int) -> UserEquipment:
        return self.ues[ue_id]

    def ues_of_bs(self, bs_id: int) -> list[int]:
        """UE ids served by `bs_id`, sorted by descending gain to that BS."""
        ids = [u.id for u in self.ues if u.serving_bs == bs_id]
        ids.sort(key=lambda i: (-self.ues[i].gains[bs_id], i))
        return ids

    def check(self):
        bs_ids = {b.id for b in self.bss}
        for ue in self.ues:
            if ue.serving_bs not in bs_ids:
                raise ValueError(f"UE {ue.id} has dangling serving_bs")
            for g in ue.gains.values():
                if g <= 0:
                    raise ValueError(f"UE {ue.id} has non-positive gain")


def composite_gain(params: ChannelParams, distance: float,
                   shadow_draw_db: float = 0.0) -> float:
    """Linear composite channel gain at `distance` meters."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return (params.antenna_const * distance ** (-params.pathloss_exp)
            * 10.0 ** (shadow_draw_db / 10.0) * params.fading_mean_sq)


def associate_ues(scenario: NetworkScenario, bias: float) -> None:
    """Biased RSS association, in place.

    A UE joins the best small BS when that SBS's RSS is at least
    `bias` times the macro RSS; otherwise it stays with the macro BS.
    bias -> 1 reverts to plain max-RSS, small bias offloads aggressively.
    """
    if not (0.0 < bias <= 1.0):
        raise ValueError("bias must lie in (0, 1]")
    macro = scenario.bss[0]
    smalls = scenario.bss[1:]
    for ue in scenario.ues:
        mbs_rss = macro.tx_power * ue.gains[macro.id]
        best_sbs, best_rss = None, -np.inf
        for sbs in smalls:
            rss = sbs.tx_power * ue.gains[sbs.id]
            if rss > best_rss:
                best_sbs, best_rss = sbs, rss
        if best_sbs is not None and best_rss >= bias * mbs_rss:
            ue.serving_bs = best_sbs.id
        else:
            ue.serving_bs = macro.id


def generate_scenario(config: SimConfig, seed: int | None = None) -> NetworkScenario:
    """Draw a random scenario; a pure function of (config, seed)."""
    if config.n_ues == 0:
        raise ConfigError("scenario needs at least one UE")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    w, h = config.area_width, config.area_height
    params = ChannelParams(config.antenna_const, config.pathloss_exp,
                           config.shadow_std_db)

    bss = [BaseStation(0, "macro", (w / 2.0, h / 2.0), config.p_macro)]
    sbs_pos = rng.uniform((0, 0), (w, h), size=(config.n_sbs, 2))
    for s in range(config.n_sbs):
        bss.append(BaseStation(s + 1, "small", tuple(sbs_pos[s]), config.p_small))

    ue_pos = rng.uniform((0, 0), (w, h), size=(config.n_ues, 2))
    demands = rng.uniform(0.0, 2.0 * config.qos_mean_bps, size=config.n_ues)
    shadow = rng.normal(0.0, config.shadow_std_db,
                        size=(config.n_ues, len(bss)))

    ues = []
    for u in range(config.n_ues):
        gains = {}
        for b, bs in enumerate(bss):
            d = float(np.hypot(ue_pos[u, 0] - bs.position[0],
                               ue_pos[u, 1] - bs.position[1]))
            d = max(d, config.distance_floor)
            gains[bs.id] = composite_gain(params, d, shadow[u, b])
        ues.append(UserEquipment(id=u, position=tuple(ue_pos[u]),
                                 qos_demand=float(demands[u]),
                                 sic_error=config.sic_error, gains=gains))

    scenario = NetworkScenario(bss=bss, ues=ues, area=(w, h),
                               bandwidth=config.bandwidth,
                               noise_psd=config.noise_psd,
                               ici_power=config.ici_power, seed=seed)
    associate_ues(scenario, config.bias)
    scenario.check()
    return scenario


def sinr_from_rho(omega, eps, rho) -> np.ndarray:
    """Imperfect-SIC SINR with pre-normalized noise terms.

    Members are ordered by descending gain (member 0 strongest). Member i
    sees the lower-rank signals {0..i-1} at full power and the higher-rank
    residuals {i+1..K-1} scaled by its error factor eps_i.
    """
    omega = np.asarray(omega, dtype=float)
    eps = np.asarray(eps, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if omega.size == 0:
        raise ValueError("empty cluster")
    csum = np.cumsum(omega)
    lower = csum - omega                     # sum_{l<i} omega_l
    higher = csum[-1] - csum                 # sum_{k>i} omega_k
    return omega / (lower + eps * higher + rho)


def sinr(cluster_gains, omega, theta, eps, tx_power, ici_power,
         noise_psd, bandwidth) -> np.ndarray:
    """SINR for one cluster from scenario constants.

    rho_i = (I_ici + N0*B*theta) / (P_c * g_i).
    """
    gains = np.asarray(cluster_gains, dtype=float)
    if gains.size == 0:
        raise ValueError("empty cluster")
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must lie in (0, 1]")
    rho = (ici_power + noise_psd * bandwidth * theta) / (tx_power * gains)
    return sinr_from_rho(omega, eps, rho)


def capacity(gamma, theta: float, bandwidth: float):
    """Shannon rate B*theta*log2(1+gamma), bits/s."""
    return bandwidth * theta * np.log2(1.0 + np.asarray(gamma, dtype=float))


def derive_slave_params(gains, demands, eps, theta, varpi, tx_power,
                        p_delta, ici_power, noise_psd, bandwidth) -> SlaveInput:
    """Normalized per-cluster problem data (rho, q, delta, eps).

    `gains` must already be sorted descending so rho and delta come out
    non-decreasing. rho includes the ICI term alongside the in-band noise.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    gains = np.asarray(gains, dtype=float)
    demands = np.asarray(demands, dtype=float)
    norm = tx_power * gains
    rho = (ici_power + noise_psd * bandwidth * theta) / norm
    with np.errstate(over="ignore"):
        q = 2.0 ** (demands / (bandwidth * theta))
    delta = p_delta / norm
    eps = np.broadcast_to(np.asarray(eps, dtype=float), gains.shape).copy()
    return SlaveInput(varpi=varpi, theta=theta, bandwidth=bandwidth,
                      rho=rho, q=q, delta=delta, eps=eps)


def scenario_to_json(scenario: NetworkScenario) -> str:
    doc = {
        "seed": scenario.seed,
        "area": list(scenario.area),
        "bandwidth": scenario.bandwidth,
        "noise_psd": scenario.noise_psd,
        "ici_power": scenario.ici_power,
        "bss": [
            {"id": b.id, "kind": b.kind, "position": list(b.position),
             "tx_power": b.tx_power}
            for b in scenario.bss
        ],
        "ues": [
            {"id": u.id, "position": list(u.position),
             "qos_demand": u.qos_demand, "sic_error": u.sic_error,
             "serving_bs": u.serving_bs,
             "gains": {str(k): v for k, v in u.gains.items()}}
            for u in scenario.ues
        ],
    }
    return json.dumps(doc, indent=1)


def scenario_from_json(text: str) -> NetworkScenario:
    doc = json.loads(text)
    bss = [BaseStation(b["id"], b["kind"], tuple(b["position"]), b["tx_power"])
           for b in doc["bss"]]
    ues = [UserEquipment(id=u["id"], position=tuple(u["position"]),
                         qos_demand=u["qos_demand"], sic_error=u["sic_error"],
                         gains={int(k): v for k, v in u["gains"].items()},
                         serving_bs=u["serving_bs"])
           for u in doc["ues"]]
    scenario = NetworkScenario(bss=bss, ues=ues, area=tuple(doc["area"]),
                               bandwidth=doc["bandwidth"],
                               noise_psd=doc["noise_psd"],
                               ici_power=doc["ici_power"], seed=doc["seed"])
    scenario.check()
    return scenario
