"""3v3 robot-soccer simulator and RL harness for a role-assignment coach."""

from .behaviors import Role, RoleAssignment, Strategy
from .coach_env import CoachEnv, EnvConfig
from .harness import RunConfig, load_config, run_evaluation, run_training
from .sim import FieldGeometry, SimParams, Team

__version__ = "0.1.0"

__all__ = [
    "CoachEnv",
    "EnvConfig",
    "FieldGeometry",
    "Role",
    "RoleAssignment",
    "RunConfig",
    "SimParams",
    "Strategy",
    "Team",
    "load_config",
    "run_evaluation",
    "run_training",
    "__version__",
]
