"""Game generators: random CGBGs and Generalized Firefighting.

Random games draw from numpy's PCG64 generator. The stream layout is fixed:
scopes come from ``SeedSequence(seed, spawn_key=(0,))`` and component ``e``
draws its type distribution and then its payoffs from
``SeedSequence(seed, spawn_key=(1, e))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidArgument
from .game import CGBG, PayoffComponent


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def gen_random_cgbg(n: int, k: int, n_actions: int, n_types: int, seed: int) -> CGBG:
    """Random game: add random k-agent scopes until all agents are linked.

    Duplicate scopes are rejected. Payoffs are standard normal; each local
    type distribution is standard uniform, normalized.
    """
    if n < 1 or k < 1 or n_actions < 1 or n_types < 1:
        raise InvalidArgument("n, k, n_actions and n_types must be >= 1")
    if k > n:
        raise InvalidArgument(f"scope size k={k} exceeds the number of agents n={n}")
    if k == 1 and n > 1:
        raise InvalidArgument("single-agent scopes cannot connect more than one agent")

    scope_rng = _rng(seed, 0)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    groups = n
    seen = set()
    scopes = []
    while groups > 1 or not scopes:
        scope = tuple(sorted(int(i) for i in scope_rng.choice(n, size=k, replace=False)))
        if scope in seen:
            continue
        seen.add(scope)
        scopes.append(scope)
        for i in scope[1:]:
            a, b = find(scope[0]), find(i)
            if a != b:
                parent[b] = a
                groups -= 1

    n_local_types = n_types**k
    n_local_actions = n_actions**k
    components = []
    for e, scope in enumerate(scopes):
        rng = _rng(seed, 1, e)
        prob = rng.random(n_local_types)
        prob /= prob.sum()
        payoff = rng.standard_normal(n_local_types * n_local_actions)
        components.append(PayoffComponent(scope, prob, payoff))
    game = CGBG(n, (n_actions,) * n, (n_types,) * n, tuple(components))
    game.validate()
    return game


@dataclass(frozen=True)
class FirefightingParams:
    n_agents: int
    n_houses: int
    n_observed: int = 1
    n_actionable: int = 2
    p_fire: float = 0.5
    obs_noise: float = 0.2
    attenuation: float = 0.4
    layout: Literal["line", "uniform-square"] = "line"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_agents < 1 or self.n_houses < 1:
            raise InvalidArgument("need at least one agent and one house")
        if not 1 <= self.n_observed <= self.n_houses:
            raise InvalidArgument("n_observed must lie in [1, n_houses]")
        if not 1 <= self.n_actionable <= self.n_houses:
            raise InvalidArgument("n_actionable must lie in [1, n_houses]")
        if not 0.0 <= self.p_fire <= 1.0:
            raise InvalidArgument("p_fire must lie in [0, 1]")
        if not 0.0 <= self.obs_noise < 0.5:
            raise InvalidArgument("obs_noise must lie in [0, 0.5)")
        if not 0.0 < self.attenuation < 1.0:
            raise InvalidArgument("attenuation must lie in (0, 1)")
        if self.layout not in ("line", "uniform-square"):
            raise InvalidArgument(f"unknown layout {self.layout!r}")


def positions(params: FirefightingParams) -> tuple[np.ndarray, np.ndarray]:
    """(house, agent) coordinates, each shaped (count, 2)."""
    if params.layout == "line":
        houses = np.stack([2.0 * np.arange(params.n_houses), np.zeros(params.n_houses)], 1)
        agents = np.stack([2.0 * np.arange(params.n_agents) + 1, np.zeros(params.n_agents)], 1)
        return houses, agents
    rng = _rng(params.rng_seed, 0)
    return rng.random((params.n_houses, 2)), rng.random((params.n_agents, 2))


def nearest_houses(params: FirefightingParams) -> list[list[int]]:
    """Houses sorted by distance from each agent, lower index first on ties."""
    houses, agents = positions(params)
    out = []
    for a in agents:
        dist = np.hypot(*(houses - a).T)
        out.append(sorted(range(params.n_houses), key=lambda h: (dist[h], h)))
    return out


def _obs_likelihood(obs: int, burning: int, eps: float) -> float:
    return 1.0 - eps if obs == burning else eps


def fire_posterior(observations: list[int], p_fire: float, eps: float) -> float:
    """Pr(house burns | flame observations of it), conditionally independent flips."""
    burn = p_fire
    calm = 1.0 - p_fire
    for o in observations:
        burn *= _obs_likelihood(o, 1, eps)
        calm *= _obs_likelihood(o, 0, eps)
    if burn + calm == 0.0:
        return p_fire
    return burn / (burn + calm)


def gen_firefighting(params: FirefightingParams) -> CGBG:
    """Generalized Firefighting as a one-shot CGBG.

    Bit b of an agent's type is its (noisy) flame observation of its b-th
    nearest house; action j fights fire at its j-th nearest house. Each house
    that some agent can reach becomes a component over those agents with
    payoff ``-Pr(burns | observations) * attenuation ** fighters``.
    """
    order = nearest_houses(params)
    observed = [o[: params.n_observed] for o in order]
    actionable = [o[: params.n_actionable] for o in order]
    n = params.n_agents
    n_types = 2**params.n_observed
    p, eps, gamma = params.p_fire, params.obs_noise, params.attenuation

    components = []
    for h in range(params.n_houses):
        scope = tuple(i for i in range(n) if h in actionable[i])
        if not scope:
            continue
        watched = sorted({w for i in scope for w in observed[i]})
        configs = list(itertools.product((0, 1), repeat=len(watched)))
        config_prob = [
            math.prod(p if b else 1.0 - p for b in burns) for burns in configs
        ]
        local_types = list(itertools.product(range(n_types), repeat=len(scope)))
        local_actions = list(itertools.product(range(params.n_actionable), repeat=len(scope)))
        prob = np.zeros(len(local_types))
        payoff = np.zeros((len(local_types), len(local_actions)))
        for t, theta in enumerate(local_types):
            # (house, observation) pairs carried by this local joint type
            obs = [
                (w, (theta[j] >> b) & 1)
                for j, i in enumerate(scope)
                for b, w in enumerate(observed[i])
            ]
            total = 0.0
            for burns, pc in zip(configs, config_prob):
                state = dict(zip(watched, burns))
                total += pc * math.prod(_obs_likelihood(o, state[w], eps) for w, o in obs)
            prob[t] = total
            posterior = fire_posterior([o for w, o in obs if w == h], p, eps)
            for a, acts in enumerate(local_actions):
                fighters = sum(actionable[i][acts[j]] == h for j, i in enumerate(scope))
                payoff[t, a] = -posterior * gamma**fighters
        components.append(PayoffComponent(scope, prob, payoff.ravel()))
    return CGBG(n, (params.n_actionable,) * n, (n_types,) * n, tuple(components))
