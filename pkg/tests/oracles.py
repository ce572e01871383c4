"""Independent oracles and game factories for the tests.

The oracles below deliberately avoid the package's own indexing helpers:
they walk tables with plain Python loops and itertools.
"""

import itertools
import math

import numpy as np
from hypothesis import strategies as st

from cgbg import CGBG, PayoffComponent, gen_random_cgbg


def linear_index(digits, sizes):
    """Row-major index with the last position fastest."""
    index = 0
    for d, s in zip(digits, sizes):
        index = index * s + d
    return index


def oracle_local_value(game, e, local_policy):
    comp = game.components[e]
    tsizes = [game.type_sizes[i] for i in comp.scope]
    asizes = [game.action_sizes[i] for i in comp.scope]
    n_local_actions = math.prod(asizes)
    total = 0.0
    for theta in itertools.product(*(range(s) for s in tsizes)):
        t = linear_index(theta, tsizes)
        action = [local_policy[j][theta[j]] for j in range(len(theta))]
        a = linear_index(action, asizes)
        total += float(comp.local_type_prob[t]) * float(comp.payoff[t * n_local_actions + a])
    return total


def oracle_value(game, policy):
    return sum(
        oracle_local_value(game, e, [policy[i] for i in comp.scope])
        for e, comp in enumerate(game.components)
    )


def all_policies(game):
    per_agent = [
        list(itertools.product(range(a), repeat=t))
        for a, t in zip(game.action_sizes, game.type_sizes)
    ]
    return itertools.product(*per_agent)


def oracle_optimum(game):
    return max(oracle_value(game, p) for p in all_policies(game))


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


def make_game(rng, n, scopes, n_actions, n_types, zero_prob=False):
    """Random game with explicit scopes; sizes may be ints or per-agent lists."""
    actions = [n_actions] * n if isinstance(n_actions, int) else list(n_actions)
    types = [n_types] * n if isinstance(n_types, int) else list(n_types)
    comps = []
    for scope in scopes:
        n_t = math.prod(types[i] for i in scope)
        n_a = math.prod(actions[i] for i in scope)
        prob = rng.random(n_t)
        if zero_prob and n_t > 1:
            prob[rng.integers(n_t)] = 0.0
        prob /= prob.sum()
        comps.append(PayoffComponent(scope, prob, rng.standard_normal(n_t * n_a)))
    return CGBG(n, actions, types, comps)


@st.composite
def small_games(draw, max_agents=3, max_actions=3, max_types=3):
    """Connected games small enough for exhaustive enumeration."""
    n = draw(st.integers(1, max_agents))
    actions = draw(st.lists(st.integers(1, max_actions), min_size=n, max_size=n))
    types = draw(st.lists(st.integers(1, max_types), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    # a chain keeps every agent covered and the game connected
    scopes = [(i, i + 1) for i in range(n - 1)] or [(0,)]
    if n >= 2 and draw(st.booleans()):
        scopes.append((0,))
    return make_game(rng, n, scopes, actions, types)
