"""Monte Carlo simulator for PRS-based gNB monostatic sensing of UAV targets."""

__version__ = "0.1.0"

from nrsense.config import ScenarioConfig, load_config
from nrsense.evaluation import aggregate, associate, run_drop, sweep

__all__ = [
    "ScenarioConfig",
    "aggregate",
    "associate",
    "load_config",
    "run_drop",
    "sweep",
]
