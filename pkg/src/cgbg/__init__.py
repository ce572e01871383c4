"""Cooperative graphical Bayesian games: models, factor graphs and solvers."""

from .baselines import alt_max, brute_force, cross_entropy, is_fixed_point
from .domains import FirefightingParams, gen_firefighting, gen_random_cgbg
from .errors import CapacityError, CGBGError, InvalidArgument
from .factor_graph import Factor, FactorGraph, build_ai_fg, build_ati_fg, build_fg, evaluate_assignment
from .game import CGBG, PayoffComponent, best_response, evaluate_policy, local_value
from .gamefile import load_game, save_game
from .maxsum import MaxSumConfig, message_cost_report, run_maxsum
from .ndp import elimination_order, solve_ndp
from .solve import SOLVERS, SolverOptions, solve

__all__ = [
    "CGBG",
    "CGBGError",
    "CapacityError",
    "Factor",
    "FactorGraph",
    "FirefightingParams",
    "InvalidArgument",
    "MaxSumConfig",
    "PayoffComponent",
    "SOLVERS",
    "SolverOptions",
    "alt_max",
    "best_response",
    "brute_force",
    "build_ai_fg",
    "build_ati_fg",
    "build_fg",
    "cross_entropy",
    "elimination_order",
    "evaluate_assignment",
    "evaluate_policy",
    "gen_firefighting",
    "gen_random_cgbg",
    "is_fixed_point",
    "load_game",
    "local_value",
    "message_cost_report",
    "run_maxsum",
    "save_game",
    "solve",
    "solve_ndp",
]
