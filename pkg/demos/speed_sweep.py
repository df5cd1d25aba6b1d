"""Raise the speed under the slip model and watch the geometric controller.

The steering law assumes no tire slip. At 5 m/s that holds and the dynamic
model matches the kinematic one. By 12 m/s slip makes the loop oscillate
until the car leaves the lane.
"""

from selfsteer.course import benchmark_course
from selfsteer.harness import Oracle, SweepConfig, sweep_speed

course = benchmark_course()
cfg = SweepConfig(starts=6, repeats=2)
speeds = [5.0, 7.5, 9.0, 12.0]
res = sweep_speed(speeds, {"oracle": Oracle()}, course, cfg, dynamics="dynamic")
for row in res.summary():
    print({k: round(v, 3) if isinstance(v, float) else v for k, v in row.items()})
