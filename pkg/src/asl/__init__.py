"""Adaptive compressive sensing for structured support recovery."""
__version__ = "0.1.0"

from .classes import (EdgeIndexer, Intervals, SSet, Stars, Submatrix, SupportSet, class_from_dict,
                      class_to_dict, sample_support, star_packing_bound, symmetric_difference_size,
                      validate_membership)
from .errors import BudgetExhausted, ConfigError, SparsityWarning
from .sensing import ProbeBatch, SenseVector, SensingOracle, SignalInstance
from .slrt import (Decision, SlrtConfig, SlrtOutcome, llr_increment, run_slrt, run_slrt_batch,
                   slrt_boundaries)
from .theory import ThresholdReport, threshold_report

__all__ = [
    "EdgeIndexer", "Intervals", "SSet", "Stars", "Submatrix", "SupportSet", "class_from_dict",
    "class_to_dict", "sample_support", "star_packing_bound", "symmetric_difference_size",
    "validate_membership", "BudgetExhausted", "ConfigError", "SparsityWarning", "ProbeBatch",
    "SenseVector", "SensingOracle", "SignalInstance", "Decision", "SlrtConfig", "SlrtOutcome",
    "llr_increment", "run_slrt", "run_slrt_batch", "slrt_boundaries", "ThresholdReport",
    "threshold_report",
]
