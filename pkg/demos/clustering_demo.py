"""Cluster formation on one cell, checked against the exhaustive optimum.

UEs sorted by channel gain are cut into gain levels; the matching stage
pairs one UE per level so that intra-cluster gain disparity is maximal.
With the gain-ratio weights the optimal matching is simply index order,
which is what the fast path exploits. A tiny instance is also scored
against brute-force enumeration of every admissible partition.
"""

import numpy as np

from hetnoma.clustering import (form_clusters, gain_ratio_weight_fn,
                                index_clustering, partition_ues,
                                sequential_wmm)
from hetnoma.config import SimConfig
from hetnoma.channel import generate_scenario
from hetnoma.oracle import equal_split_score_fn, exhaustive_cf

cfg = SimConfig(n_sbs=0, n_ues=9)
sc = generate_scenario(cfg, seed=1)
bs = sc.bss[0]
ids = sc.ues_of_bs(bs.id)
gains = {i: sc.ues[i].gains[bs.id] for i in ids}

print("UE id -> gain (descending):")
for i in ids:
    print(f"  {i:2d}  {gains[i]:.3e}")

parts = partition_ues(ids, 3)
print("\ngain levels:", [p.members for p in parts])

fast = index_clustering(parts)
slow = sequential_wmm(parts, gain_ratio_weight_fn(gains))
print("index clustering:   ", [c.members for c in fast])
print("matching clustering:", [c.members for c in slow])
assert {c.members for c in fast} == {c.members for c in slow}

clusters = form_clusters(ids, 3, bs_id=bs.id)
n_blocks = len(clusters)
score = equal_split_score_fn(gains, cfg.sic_error, 1.0 / n_blocks,
                             bs.tx_power, cfg.ici_power, cfg.noise_psd,
                             cfg.bandwidth)
ours = score([c.members for c in clusters])
best_part, best = exhaustive_cf(ids, 3, score)
print(f"\nequal-split score: ours {ours:.4f}, exhaustive {best:.4f}, "
      f"ratio {ours / best:.4f}")
print("exhaustive best partition:", best_part)
