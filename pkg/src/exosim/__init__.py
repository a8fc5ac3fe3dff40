"""Deterministic simulator and analysis toolkit for a wrist-assist arm."""

from .arm_model import (ChainGeometry, JointConfig, Pose, cup_tilt,
                        forward_kinematics, positional_jacobian,
                        required_wrist_deviation)
from .control import (LevelingConfig, PidGains, SafetyLimits, apply_safety,
                      leveling_step, pid_init, pid_step, resolved_rate)

__version__ = "0.1.0"
