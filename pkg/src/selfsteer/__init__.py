"""Self-supervised steering from pose trajectories: label geometry, a
bicycle-model simulator, a small lateral-offset regressor and a closed-loop
lane-keeping harness."""

from .geometry import (DegenerateVector, PlanarPose, PlanarVec, RelativeMotion, align_rotation,
                       compose, local_motion, relative_pose, wrap_angle)
from .vehicle import (AckermannAngles, ArcMotion, InvalidStep, VehicleParams, VehicleState,
                      ackermann_split, canonical_alpha, command_to_steering, step_dynamic,
                      step_kinematic, steering_from_lateral, steering_to_command)
from .course import Course, Segment, benchmark_course, load_course, sharp_course
from .predictor import (ObservationVector, OffCourse, RegressorModel, TrainConfig, distill,
                        observe, oracle_predictor, predict_dy, train)
from .trajectory import (IncompatibleRoutes, LabelConfig, LabeledSample, NoiseModel, Trajectory,
                         build_dataset, corrupt, load_tum, pair_frames, relabel, select_reference)
from .harness import (EpisodeConfig, EvalReport, Oracle, Regressor, Distilled, eval_heldout,
                      run_episode, sweep_perturbation, sweep_speed, sweep_trajectories)

__version__ = "0.1.0"
