"""Simulator and analysis toolkit for latent-type online recommendation."""
from .algorithm import (AlgParams, Partition, STRATEGIES, explore, exploit, find_prefs, item_clustering,
                        regret_of, run, run_anytime, select_params, user_clustering)
from .instrumentation import TraceStats, audit, empirical_bad_fraction, verify_constraints
from .kernels import BACKEND
from .model import (Environment, LatentWorld, ModelConfig, RepeatViolation, Trace, generate_world,
                    regret_curve)
from .theory import (coldstart_bounds, check_assumptions, heuristic_params, lower_bound,
                     regret_curve_R, thresholds, upper_curves)

__version__ = "0.1.0"

__all__ = [
    "AlgParams", "BACKEND", "Environment", "LatentWorld", "ModelConfig", "Partition", "RepeatViolation",
    "STRATEGIES", "Trace", "TraceStats", "audit", "check_assumptions", "coldstart_bounds",
    "empirical_bad_fraction", "explore", "exploit", "find_prefs", "generate_world", "heuristic_params",
    "item_clustering", "lower_bound", "regret_curve", "regret_curve_R", "regret_of", "run", "run_anytime",
    "select_params", "thresholds", "upper_curves", "user_clustering", "verify_constraints",
]
