"""ECR-MAC: a multichannel, energy-conscious cognitive-radio MAC simulator."""

from .engine import EcrMac, run
from .metrics import MetricsReport, normalized_throughput
from .scenario import ScenarioConfig, ScenarioError, default_scenario, load_scenario

__all__ = [
    "EcrMac",
    "MetricsReport",
    "ScenarioConfig",
    "ScenarioError",
    "default_scenario",
    "load_scenario",
    "normalized_throughput",
    "run",
]
__version__ = "0.1.0"
