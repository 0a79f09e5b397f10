"""Exact law of a finite-window time-reversed Markov chain conditioned on
cluster observations at both ends of the window."""

__version__ = "0.1.0"

from .chain import (
    ChainSpec,
    Distribution,
    WindowProduct,
    forward_distribution,
    restricted_forward_distribution,
    validate_chain,
    window_product,
)
from .reversal import (
    ArbitraryPolicy,
    ObservationWindow,
    ReversedProcess,
    direct_marginal,
    normalization_e,
    path_probability,
    reach_weight_g,
    reverse_process,
    reverse_transition_matrix,
    terminal_distribution,
)
from .oracle import OracleReport, PathTable, compare, enumerate_joint, oracle_reverse
from .montecarlo import McEstimate, mc_estimate, sample_paths, sample_reversed
