"""Train on one run versus eight and drive both from displaced starts.

A single centerline run never shows the model what to do off-center, so it
drifts out of the lane; eight runs at spread-out offsets teach recovery.
"""

import numpy as np

from selfsteer.course import benchmark_course
from selfsteer.harness import (BundleConfig, EpisodeConfig, Oracle, Regressor, episodes_from_starts,
                               eval_starts, run_many, train_on_course)

course = benchmark_course()
starts = eval_starts(course, 10, offset=0.4)

policies = {"oracle": Oracle()}
for n in (1, 8):
    policies[f"{n}-traj"] = Regressor(train_on_course(course, n, BundleConfig(seed=0)), f"{n}-traj")

for name, policy in policies.items():
    reports = run_many(course, episodes_from_starts(EpisodeConfig(duration=None, laps=1.0, model=policy),
                                                    starts, 0))
    ratio = np.mean([r.in_track_ratio for r in reports])
    off = np.mean([r.mean_abs_lateral_offset for r in reports if np.isfinite(r.mean_abs_lateral_offset)])
    print(f"{name:>7}: in-track {ratio:.3f}, mean |offset| {off:.2f} m")
