# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# # Hiding links in a two-block graph
#
# A small stochastic block model stands in for a social graph. Ten percent of
# its links are treated as sensitive: they are removed from what gets published,
# and an attacker then tries to tell them apart from random non-links.

import numpy as np

from ppgsl import attacks as at
from ppgsl import graph_core as gc
from ppgsl import surrogate_attack as sa
from ppgsl.sitp_trainer import TrainConfig, run_sitp
from ppgsl.utility_eval import distortion_report, linkpred_eval, nodeclass_eval

seed = 1
g = gc.generate_sbm([60, 60], 0.15, 0.015, seed)
visible, splits = gc.prepare_experiment(g, seed)
print(g.num_edges, "edges,", len(splits.sensitive), "sensitive,", visible.num_edges, "visible")

# ## Attacks on the unprotected graph
#
# Simply dropping the sensitive links leaves traces: their endpoints still share
# neighbours and sit in the same block.

acfg = sa.AttackTrainConfig(epochs=200, seed=seed)
before = {r.method: round(r.auc, 3) for r in at.run_attack_suite(visible, splits, acfg)}
print(before)

# ## Learning a protected structure
#
# The learner starts from the visible graph and alternates between fitting a
# fresh surrogate attacker and nudging edge weights to fool it, paying
# `alpha` per unit of squared change.

cfg = TrainConfig(alpha=0.002, n1=200, n2=150, mu=50, hidden=(64, 32), seed=seed)
published, trace = run_sitp(visible, splits, cfg)
d = distortion_report(visible, published)
print(f"deleted {d.deleted}, added {d.added}")

after = {r.method: round(r.auc, 3) for r in at.run_attack_suite(published, splits, acfg)}
print(after)

# ## What it costs
#
# Link prediction on held-out links and node classification on the published
# graph, compared with the unprotected one.

for name, graph in [("visible", visible), ("published", published)]:
    lp = linkpred_eval(graph, splits, acfg)
    f1 = nodeclass_eval(graph, splits, seed=seed)[0]
    print(f"{name:>9}: link prediction {lp:.3f}, micro-F1 {f1:.3f}")

# The learner loss over training. Spikes line up with the epochs where a new
# attacker is trained.

loss = trace.losses()
print(np.round(loss[::10], 3))
