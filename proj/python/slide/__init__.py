"""Sliding-object manipulation by platform maneuvers: simulation, estimation and policies."""

from ._slide import (
    LstmEstimator,
    ManeuverAction,
    Policy,
    SlideError,
    SlideResult,
    correction_metric,
    default_config,
    estimate_analytical,
    optimal_action,
    range_of_motion,
    resolve_config,
    simulate,
    validate_action,
)

__all__ = [
    "LstmEstimator",
    "ManeuverAction",
    "Policy",
    "SlideError",
    "SlideResult",
    "correction_metric",
    "default_config",
    "estimate_analytical",
    "optimal_action",
    "range_of_motion",
    "resolve_config",
    "simulate",
    "validate_action",
]
