"""Simulation configuration and unit conversions.

All dBm/dB fields are converted to linear units once, at ingestion; every
other module works in watts / Hz / bits per second.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ConfigError("cannot express non-positive power in dBm")
    import math

    return 10.0 * math.log10(watts / 1e-3)


@dataclass(frozen=True)
class SimConfig:
    """Physical and algorithmic parameters of one simulation.

    Defaults reproduce the standard dense-HetNet setup: one macro BS at the
    area center, `n_sbs` small BSs and `n_ues` UEs dropped uniformly over a
    500 m x 500 m area.
    """

    # Topology
    n_sbs: int = 10            # S
    n_ues: int = 100           # U
    area_width: float = 500.0  # meters
    area_height: float = 500.0

    # Radio / channel
    bandwidth: float = 20e6          # B, Hz
    noise_psd_dbm: float = -174.0    # N0, dBm/Hz
    p_macro_dbm: float = 46.0        # P_m
    p_small_dbm: float = 30.0        # P_s
    pathloss_exp: float = 3.76       # eta
    shadow_std_db: float = 10.0      # sigma
    antenna_const: float = 1.0       # A

    # Association / clustering
    bias: float = 0.3                # beta, offloading bias in (0, 1]
    cluster_size: int = 5            # K, max NOMA cluster size

    # SIC receiver
    sic_error: float = 1e-5          # epsilon, fractional error factor
    p_delta_dbm: float = -90.0       # receiver sensitivity gap

    # Traffic
    qos_mean_bps: float = 1.5e6      # mean rate demand; draws are U(0, 2*mean)

    # Inter-cell interference: received power, either directly in watts or
    # in dB over the full-band noise power N0*B. Zero when both unset.
    ici_watts: float = 0.0
    ici_db_over_noise: float | None = None

    # Iterative allocation
    step_size: float = 0.005         # nu, subgradient step
    inner_tol: float = 1e-5          # ||d varpi||_inf termination
    outer_tol: float = 1e-4          # ||d theta||_inf termination
    max_inner: int = 500
    max_outer: int = 30
    damping: float = 0.5             # bandwidth update damping
    theta_floor: float = 1e-6
    distance_floor: float = 1.0      # meters, path-loss singularity guard
    max_cluster_cap: int = 8         # hard guard on 2^(K-1) enumeration

    seed: int = 0

    def __post_init__(self):
        if self.n_sbs < 0 or self.n_ues < 0:
            raise ConfigError("n_sbs and n_ues must be non-negative")
        if self.area_width <= 0 or self.area_height <= 0:
            raise ConfigError("area dimensions must be positive")
        if not (0.0 < self.bias <= 1.0):
            raise ConfigError("bias must lie in (0, 1]")
        if self.cluster_size < 1:
            raise ConfigError("cluster_size must be >= 1")
        if self.cluster_size > self.max_cluster_cap:
            raise ConfigError(
                f"cluster_size {self.cluster_size} exceeds enumeration cap "
                f"{self.max_cluster_cap}"
            )
        if not (0.0 <= self.sic_error <= 1.0):
            raise ConfigError("sic_error must lie in [0, 1]")
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.ici_watts < 0:
            raise ConfigError("ici_watts must be non-negative")

    # Derived linear quantities -------------------------------------------

    @property
    def noise_psd(self) -> float:
        """N0 in W/Hz."""
        return dbm_to_watts(self.noise_psd_dbm)

    @property
    def noise_power(self) -> float:
        """Full-band noise power N0*B in watts."""
        return self.noise_psd * self.bandwidth

    @property
    def p_macro(self) -> float:
        return dbm_to_watts(self.p_macro_dbm)

    @property
    def p_small(self) -> float:
        return dbm_to_watts(self.p_small_dbm)

    @property
    def p_delta(self) -> float:
        return dbm_to_watts(self.p_delta_dbm)

    @property
    def ici_power(self) -> float:
        """ICI received power in watts."""
        if self.ici_db_over_noise is not None:
            return self.noise_power * 10.0 ** (self.ici_db_over_noise / 10.0)
        return self.ici_watts

    # Serialization --------------------------------------------------------

    def replace(self, **kwargs) -> "SimConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "SimConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        return cls.from_dict(data)

    def digest(self) -> str:
        """Stable hash of the configuration, for output-file headers."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
