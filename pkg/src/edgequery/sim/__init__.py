"""Discrete-event simulation harness for the four routing schemes."""

from .config import SCHEMES, ConfigError, ExperimentConfig, config_from_dict, load_config
from .engine import Comparison, Simulation, compare_schemes, run
from .metrics import FScoreParams, RunMetrics, SummaryRow, f_measure, fscore, metrics_from_trace, summary_csv
from .trace import EventTrace, TraceRecord

__all__ = [
    "SCHEMES",
    "Comparison",
    "ConfigError",
    "EventTrace",
    "ExperimentConfig",
    "FScoreParams",
    "RunMetrics",
    "Simulation",
    "SummaryRow",
    "TraceRecord",
    "compare_schemes",
    "config_from_dict",
    "f_measure",
    "fscore",
    "load_config",
    "metrics_from_trace",
    "run",
    "summary_csv",
]
