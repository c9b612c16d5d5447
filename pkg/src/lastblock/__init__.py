"""Subsampling dueling bandits with sliding-window and limited-memory modes."""

__version__ = "0.1.0"

from .envs import ArmModel, EnvironmentSpec, Family, kl_divergence  # noqa: F401
from .history import HistoryBuffer, MemorySchedule, ScheduleForm  # noqa: F401
from .sda import LbSda, SwLbSda, Trajectory  # noqa: F401
