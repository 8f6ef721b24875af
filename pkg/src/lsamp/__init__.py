"""Turbo AMP reconstruction of low-rank, joint-sparse signal matrices."""
from .bigamp import (BigampOptions, FactorEstimate, PseudoObservation, bigamp_solve,
                     rank_penalty, select_rank)
from .errors import (DegenerateSignalError, FormatError, IngestionError, InvalidArgumentError,
                     LSAMPError, SolverDivergedError)
from .gamp import FrameProblem, FrameResult, GampOptions, gamp_solve_frame
from .priors import (BGPriorField, Hyperparams, SupportBeliefs, bg_posterior_moments,
                     row_support_posterior, support_outgoing, support_posterior)
from .sensing import (MeasurementSet, SignalEnsemble, dct_basis, gen_ls_signal,
                      gen_measurement_matrix, measure_signal)
from .turbo import Reconstruction, TurboConfig, em_update, run_ls_amp, turbo_convergence

__version__ = "0.1.0"

__all__ = [
    "BGPriorField",
    "BigampOptions",
    "DegenerateSignalError",
    "FactorEstimate",
    "FormatError",
    "FrameProblem",
    "FrameResult",
    "GampOptions",
    "Hyperparams",
    "IngestionError",
    "InvalidArgumentError",
    "LSAMPError",
    "MeasurementSet",
    "PseudoObservation",
    "Reconstruction",
    "SignalEnsemble",
    "SolverDivergedError",
    "SupportBeliefs",
    "TurboConfig",
    "bg_posterior_moments",
    "bigamp_solve",
    "dct_basis",
    "em_update",
    "gamp_solve_frame",
    "gen_ls_signal",
    "gen_measurement_matrix",
    "measure_signal",
    "rank_penalty",
    "row_support_posterior",
    "run_ls_amp",
    "select_rank",
    "support_outgoing",
    "support_posterior",
    "turbo_convergence",
]
