"""Hourly social-activity volume forecasting and user-level network simulation."""

from .events import ActivityEvent, EventLog, TemporalGraph, UserLedger, bin_hourly, ingest_events
from .exceptions import ConfigError, DataError, HourcastError, StageError
from .features import FeatureConfig, SeriesBank, build_feature_vector, generate_samples
from .gbt import GradientBoostedTreeRegressor, TreeEnsemble, fit_ensemble
from .pipeline import RunConfig, run_pipeline
from .synth import SynthConfig, synth_generate
from .user_assignment import UserAssigner, simulate
from .volume import ParamGrid, VolumeForecaster

__version__ = "0.1.0"

__all__ = [
    "ActivityEvent", "EventLog", "TemporalGraph", "UserLedger", "bin_hourly", "ingest_events",
    "ConfigError", "DataError", "HourcastError", "StageError",
    "FeatureConfig", "SeriesBank", "build_feature_vector", "generate_samples",
    "GradientBoostedTreeRegressor", "TreeEnsemble", "fit_ensemble",
    "RunConfig", "run_pipeline", "SynthConfig", "synth_generate",
    "UserAssigner", "simulate", "ParamGrid", "VolumeForecaster",
]
