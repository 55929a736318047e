"""Device-free localization with a three-state link model.

Links are either not faded, faded by a reflection off the person, or
shadowed by the person.  The package provides the geometry and gain
models for each state, the per-state RSS densities, a per-link HMM that
infers the state, a particle-filter tracker, a scenario simulator and the
metrics used to compare observation models.
"""

__version__ = "0.1.0"

from .geometry import HumanEllipse, LinkGeometry, Point2D, channel_plan
from .linkstate import HmmModel, LinkStateEstimator, detect_crossings, estimate_velocity
from .propagation import LinkState, model_gains, three_state_gain
from .simulate import Scenario, corridor_scenario, synthesize_rss
from .tracking import Tracker, TrackerConfig

__all__ = [
    "HumanEllipse",
    "LinkGeometry",
    "Point2D",
    "channel_plan",
    "HmmModel",
    "LinkStateEstimator",
    "detect_crossings",
    "estimate_velocity",
    "LinkState",
    "model_gains",
    "three_state_gain",
    "Scenario",
    "corridor_scenario",
    "synthesize_rss",
    "Tracker",
    "TrackerConfig",
]
