"""Score how similar a predicted time series is to an observation.

Walks through the base similarity metric: segmentation into rise/fall
periods, soft peak matching, and the weighted combination controlled by
MetricWeights. Run with: python3 demos/01_score_similarity.py
"""

import numpy as np

from apef import PRESETS, MetricWeights, TimeSeries, base_metric

t = np.arange(120, dtype=float)

# A seasonal-looking observation and two candidate predictions: one with
# the peak in the right place but damped, one shifted late.
obs = 1.0 + 3.0 * np.exp(-0.5 * ((t - 45.0) / 10.0) ** 2)
good = 1.0 + 2.7 * np.exp(-0.5 * ((t - 45.0) / 10.0) ** 2)
shifted = 1.0 + 3.0 * np.exp(-0.5 * ((t - 60.0) / 10.0) ** 2)

def ts(name, values):
    return TimeSeries(instance_id=name, variable="GPP", values=values)


weights = MetricWeights(w_peak=0.6, w_der=0.2, w_amp=0.2, tolerance=3)
for name, pred in [("good", good), ("shifted", shifted)]:
    result = base_metric(ts(name, pred), ts("obs", obs), weights)
    print(f"{name:8s} similarity={result.similarity:.4f}")

# Presets emphasize one component of the metric at a time.
for preset, w in PRESETS.items():
    result = base_metric(ts("shifted", shifted), ts("obs", obs), w)
    print(f"preset {preset:5s} -> shifted similarity={result.similarity:.4f}")
