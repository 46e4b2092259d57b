"""
Parameter sensitivity
=====================

Sweeps rerun the full pipeline with one parameter changed. The subspace
dimension k matters a great deal on the windy scenario; the prior variance
and the Kalman measurement noise barely matter.
"""

import numpy as np

from robust_dfl import PipelineParams, reference_scenario
from robust_dfl.pipeline import Dataset, sweep

data = Dataset.from_scenario(reference_scenario("windy"))
L = len(data.links)
res = sweep(data, PipelineParams("subvrt"), "k", [0, 1, 2, 4, 8, 36, 128, 512, L - 1])
for k, r in zip(res.values, res.rmse):
    print(f"k = {k:4d}: RMSE {r:.3f} m")

# %%
# LSVRT against the prior variance of the motion image.
res = sweep(data, PipelineParams("lsvrt"), "sigma_x2", np.logspace(-4, -1, 7))
print("sigma_x2:", "  ".join(f"{v:.0e}->{r:.3f}" for v, r in zip(res.values, res.rmse)))

# %%
# Tracked SubVRT against the Kalman measurement noise.
res = sweep(data, PipelineParams("subvrt", k=36), "sigma_v2", [0.001, 0.1, 1, 5, 20])
print("sigma_v2:", "  ".join(f"{v:g}->{r:.3f}" for v, r in zip(res.values, res.rmse)))
