"""Uniform entry point over every solver and graph form."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .baselines import BRUTE_FORCE_CAP, alt_max, brute_force, cross_entropy
from .errors import InvalidArgument
from .factor_graph import DEFAULT_MEMORY_CAP, build_fg
from .game import CGBG, JointPolicy, evaluate_policy
from .maxsum import MaxSumConfig, run_maxsum
from .ndp import solve_ndp

SOLVERS = ("ndp-ati", "ndp-ai", "maxsum-ati", "maxsum-ai", "brute", "altmax", "ce")
EXACT_SOLVERS = ("ndp-ati", "ndp-ai", "brute")


@dataclass
class SolverOptions:
    seed: int = 0
    memory_cap: int = DEFAULT_MEMORY_CAP
    maxsum: MaxSumConfig = field(default_factory=MaxSumConfig)
    heuristic: str = "min-fill"
    altmax_rounds: int = 100
    ce_population: int = 100
    ce_elite_fraction: float = 0.1
    ce_smoothing: float = 0.3
    ce_iterations: int = 50
    brute_force_cap: int = BRUTE_FORCE_CAP


@dataclass(frozen=True)
class SolveResult:
    solver: str
    policy: JointPolicy
    # always evaluate_policy(game, policy)
    value: float
    iterations: int | None = None
    converged: bool | None = None
    induced_width: int | None = None
    restarts: int | None = None
    build_ms: float = 0.0
    wall_time_ms: float = 0.0


def solve(game: CGBG, solver: str, options: SolverOptions | None = None) -> SolveResult:
    """Run ``solver`` on ``game``.

    ``options.seed`` seeds every randomized solver, Max-Sum restarts included.

    Graph construction is timed separately from the solve call.
    Capacity errors from graph building or elimination propagate.
    """
    if solver not in SOLVERS:
        raise InvalidArgument(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    opts = options or SolverOptions()
    stats: dict = {}
    t0 = time.perf_counter()
    if solver in ("ndp-ati", "ndp-ai", "maxsum-ati", "maxsum-ai"):
        method, form = solver.split("-")
        fg, decode = build_fg(game, form, opts.memory_cap)
        t1 = time.perf_counter()
        if method == "ndp":
            res = solve_ndp(fg, heuristic=opts.heuristic, memory_cap=opts.memory_cap)
            stats["induced_width"] = res.induced_width
        else:
            res = run_maxsum(fg, replace(opts.maxsum, rng_seed=opts.seed))
            stats.update(
                iterations=res.iterations,
                converged=res.converged,
                restarts=opts.maxsum.restarts,
            )
        t2 = time.perf_counter()
        policy = decode(res.assignment)
    else:
        t1 = t0
        if solver == "brute":
            policy = brute_force(game, opts.brute_force_cap).policy
        elif solver == "altmax":
            res = alt_max(game, opts.seed, opts.altmax_rounds)
            policy = res.policy
            stats.update(iterations=res.rounds, converged=res.converged)
        else:
            res = cross_entropy(
                game,
                opts.seed,
                population=opts.ce_population,
                elite_fraction=opts.ce_elite_fraction,
                smoothing=opts.ce_smoothing,
                iterations=opts.ce_iterations,
            )
            policy = res.policy
            stats["iterations"] = res.iterations
        t2 = time.perf_counter()
    return SolveResult(
        solver=solver,
        policy=policy,
        value=evaluate_policy(game, policy),
        build_ms=1000.0 * (t1 - t0),
        wall_time_ms=1000.0 * (t2 - t1),
        **stats,
    )
