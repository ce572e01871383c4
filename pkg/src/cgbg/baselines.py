"""Reference solvers: exhaustive enumeration, alternating maximization and
cross-entropy search over joint policies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidArgument
from .game import (
    CGBG,
    JointPolicy,
    best_response,
    check_policy,
    evaluate_flat,
    evaluate_policy,
    flat_to_policy,
    joint_policy_count,
    row_major_strides,
)

BRUTE_FORCE_CAP = 1 << 24
# contributions materialized per evaluation batch
_BATCH_ENTRIES = 1 << 22


@dataclass(frozen=True)
class BruteForceResult:
    policy: JointPolicy
    value: float
    n_policies: int


def brute_force(game: CGBG, cap: int = BRUTE_FORCE_CAP) -> BruteForceResult:
    """Exact optimum by enumerating every pure joint policy.

    Policies are visited in lexicographic order (agent-major, type-minor), and
    only a strictly better value replaces the incumbent, so ties resolve to the
    lexicographically smallest policy.
    """
    count = joint_policy_count(game)
    if count > cap:
        raise CapacityError(f"brute force needs {count} joint policies; cap is {cap}")
    radix = game.var_action_sizes
    strides = row_major_strides(radix)
    per_policy = sum(c.local_type_prob.size for c in game.components)
    chunk = max(1, _BATCH_ENTRIES // max(per_policy, game.n_policy_vars))
    best_value = -np.inf
    best_index = 0
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
        flat = (idx[:, None] // strides) % radix
        values = evaluate_flat(game, flat)
        j = int(np.argmax(values))
        if values[j] > best_value:
            best_value, best_index = float(values[j]), start + j
    flat = (np.int64(best_index) // strides) % radix
    return BruteForceResult(flat_to_policy(game, flat), best_value, count)


def random_policy(game: CGBG, rng: np.random.Generator) -> JointPolicy:
    return tuple(
        tuple(int(a) for a in rng.integers(0, n_a, size=n_t))
        for n_a, n_t in zip(game.action_sizes, game.type_sizes)
    )


@dataclass(frozen=True)
class AltMaxResult:
    policy: JointPolicy
    value: float
    rounds: int
    # whether the last sweep left every agent unchanged
    converged: bool
    # value after the start and after every agent update
    trace: tuple[float, ...] = field(repr=False)


def alt_max(game: CGBG, seed: int = 0, max_rounds: int = 100) -> AltMaxResult:
    """Hill-climb from a random joint policy by per-agent best responses.

    Agents are swept in index order; the search stops after a sweep in which
    no agent changes its policy, or after ``max_rounds`` sweeps.
    """
    if max_rounds < 1:
        raise InvalidArgument("max_rounds must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    policy = list(random_policy(game, rng))
    trace = [evaluate_policy(game, policy)]
    rounds = 0
    changed = True
    while rounds < max_rounds and changed:
        rounds += 1
        changed = False
        for i in range(game.n_agents):
            br = best_response(game, policy, i)
            if br != policy[i]:
                policy[i] = br
                changed = True
            trace.append(evaluate_policy(game, policy))
    policy = tuple(policy)
    return AltMaxResult(policy, evaluate_policy(game, policy), rounds, not changed, tuple(trace))


@dataclass(frozen=True)
class CrossEntropyResult:
    policy: JointPolicy
    value: float
    iterations: int
    best_trace: tuple[float, ...] = field(repr=False)


def cross_entropy(
    game: CGBG,
    seed: int = 0,
    population: int = 100,
    elite_fraction: float = 0.1,
    smoothing: float = 0.3,
    iterations: int = 50,
) -> CrossEntropyResult:
    """Cross-entropy search with one categorical per (agent, type).

    Each iteration samples ``population`` policies, keeps the best
    ``elite_fraction`` of them and moves every categorical towards the elite
    action frequencies by ``smoothing``. Returns the best policy sampled.
    """
    if population < 1 or iterations < 1:
        raise InvalidArgument("population and iterations must be >= 1")
    if not 0.0 < elite_fraction <= 1.0 or not 0.0 < smoothing <= 1.0:
        raise InvalidArgument("elite_fraction and smoothing must lie in (0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    sizes = game.var_action_sizes
    width = int(sizes.max())
    valid = np.arange(width) < sizes[:, None]
    probs = valid / sizes[:, None]
    n_elite = max(1, int(round(population * elite_fraction)))
    best_flat, best_value = None, -np.inf
    trace = []
    for _ in range(iterations):
        cdf = np.cumsum(probs, axis=1)
        u = rng.random((population, len(sizes)))
        samples = (u[:, :, None] >= cdf[None, :, :]).sum(axis=2)
        samples = np.minimum(samples, sizes - 1)
        values = evaluate_flat(game, samples)
        order = np.argsort(-values, kind="stable")
        if values[order[0]] > best_value:
            best_value, best_flat = float(values[order[0]]), samples[order[0]]
        trace.append(best_value)
        elite = samples[order[:n_elite]]
        counts = (elite[:, :, None] == np.arange(width)).sum(axis=0)
        probs = smoothing * (counts / n_elite) + (1.0 - smoothing) * probs
    policy = flat_to_policy(game, best_flat)
    return CrossEntropyResult(policy, best_value, iterations, tuple(trace))


def is_fixed_point(game: CGBG, policy) -> bool:
    """Whether no agent can change its policy by a best response."""
    policy = check_policy(game, policy)
    return all(best_response(game, policy, i) == policy[i] for i in range(game.n_agents))
