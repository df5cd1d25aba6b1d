"""Turn a small fleet of driven runs into steering labels.

Three runs share the benchmark course: one on the centerline and two driven
off-center with recoveries. Every run is labelled against the centermost one,
so an off-center frame gets a label that steers it back.
"""

import numpy as np

from selfsteer.course import benchmark_course
from selfsteer.harness import BundleConfig, make_trajectories
from selfsteer.trajectory import build_dataset

course = benchmark_course()
runs = make_trajectories(course, 3, BundleConfig(seed=0))
samples = build_dataset(runs, course)

for run in runs:
    mine = [s for s in samples if s.traj_id == run.id]
    offset = np.array([s.observation.features[0] for s in mine])
    dy = np.array([s.motion.dy for s in mine])
    # left of center -> negative dy (steer right), and vice versa
    corr = np.corrcoef(offset, dy)[0, 1] if offset.std() > 1e-6 else float("nan")
    print(f"{run.id}: {len(mine):4d} labels, mean |offset| {np.abs(offset).mean():.2f} m, "
          f"corr(offset, dy) {corr:+.2f}")

steer = np.degrees([s.steer_label for s in samples])
print(f"steer labels: {len(steer)} total, range [{steer.min():.1f}, {steer.max():.1f}] deg")
