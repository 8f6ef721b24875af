"""Baselines, metrics, file formats and sweeps around the core solvers."""
from .baselines import baseline_independent, baseline_jointsparse
from .config import SweepSpec, load_json
from .metrics import Metrics, cnmse, evaluate, support_scores
from .sweep import read_results, run_sweep
from .tensorio import read_measurements, read_tensor, write_measurements, write_tensor

__all__ = [
    "Metrics",
    "SweepSpec",
    "baseline_independent",
    "baseline_jointsparse",
    "cnmse",
    "evaluate",
    "load_json",
    "read_measurements",
    "read_results",
    "read_tensor",
    "run_sweep",
    "support_scores",
    "write_measurements",
    "write_tensor",
]
