"""Zero-sum matrix game solver with dynamic Gibbs sampling oracles and a query-cost ledger."""

from .cost_model import Hint, QueryLedger, RejectionConfig
from .errors import ConstructionError, ContractViolation, EstimationError, HintViolation
from .game import GapReport, PayoffMatrix, duality_gap, gibbs_distribution, random_game
from .sampler_tree import SamplerTree
from .solver import SolverParams, averaged_iterates, default_params, solve

__all__ = [
    "ConstructionError", "ContractViolation", "EstimationError", "GapReport", "Hint",
    "HintViolation", "PayoffMatrix", "QueryLedger", "RejectionConfig", "SamplerTree",
    "SolverParams", "averaged_iterates", "default_params", "duality_gap", "gibbs_distribution",
    "random_game", "solve",
]
