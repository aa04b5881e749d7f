"""Collaboration-network measures, instruments and panel IV estimation."""

from ._coinvent import (
    ConfigError,
    DataError,
    DomainError,
    Error,
    EstimationError,
    LookupError,
    effective_f_critical,
    frontiers,
    great_circle_km,
    novelty,
    run_pipeline,
    simulate,
    tsls,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DomainError",
    "Error",
    "EstimationError",
    "LookupError",
    "effective_f_critical",
    "frontiers",
    "great_circle_km",
    "novelty",
    "run_pipeline",
    "simulate",
    "tsls",
]
