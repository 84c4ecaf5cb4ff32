"""Power weights of one NOMA cluster as the cancellation error grows.

Four users at 50/100/200/400 m share one carrier. With demands that make
the QoS targets bind, the far user takes most of the power budget. As the
residual error factor grows, every user sees more interference, so the
demand-tight weights of the weaker users creep up, the strongest user's
leftover share shrinks, the sum spectral efficiency collapses, and
eventually the demands no longer fit in the budget at all.
"""

import numpy as np

from hetnoma.channel import derive_slave_params
from hetnoma.config import SimConfig
from hetnoma.slave import solve

cfg = SimConfig()
distances = np.array([50.0, 100.0, 200.0, 400.0])
gains = distances ** -cfg.pathloss_exp
demands = np.full(4, 25.0e6)         # 25 Mbps each: the QoS targets bind

print(f"distances [m]: {distances}")
print(f"gains:         {gains}")
print()
print(f"{'eps':>8} | {'w1':>8} {'w2':>8} {'w3':>8} {'w4':>8} | "
      f"{'sum SE [b/s/Hz]':>15} | active set")
print("-" * 78)

for eps in [0.0, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]:
    inp = derive_slave_params(
        gains, demands, eps=eps, theta=1.0, varpi=1.0,
        tx_power=cfg.p_small, p_delta=cfg.p_delta,
        ici_power=cfg.ici_power, noise_psd=cfg.noise_psd,
        bandwidth=cfg.bandwidth)
    sol = solve(inp)
    if not sol.feasible:
        print(f"{eps:8.0e} | infeasible: residual interference exceeds "
              "what the budget can compensate")
        continue
    w = sol.omega
    flags = "".join("Q" if f == "qos_tight" else "P"
                    for f in sol.active_set.flags)
    print(f"{eps:8.0e} | {w[0]:8.4f} {w[1]:8.4f} {w[2]:8.4f} {w[3]:8.4f} | "
          f"{sol.spectral_sum:15.3f} | budget+{flags}")
