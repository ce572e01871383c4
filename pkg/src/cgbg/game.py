"""Cooperative graphical Bayesian games: data model and exact evaluation.

Tables over a scope are linearized row-major in scope order with the last
scope member varying fastest. A component's payoff table is stored flat,
local joint type major, then local joint action.

Policies are handled in two shapes:

* ``JointPolicy``: a tuple with one entry per agent, each a tuple mapping
  type index to action index.
* flat vectors: one integer per (agent, type) pair, agent-major and
  type-minor. This is also the variable order of the ATI factor graph.

All values are folded strictly left to right, components in order and local
joint types in row-major order, so that every path that sums contributions
produces bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidArgument

JointPolicy = tuple[tuple[int, ...], ...]

PROB_SUM_TOL = 1e-12


def fold_sum(values: np.ndarray) -> float | np.ndarray:
    """Sum along the last axis strictly left to right.

    ``np.sum`` uses pairwise summation, whose rounding depends on the block
    layout; an accumulate fixes the order.
    """
    if values.shape[-1] == 0:
        return 0.0 if values.ndim == 1 else np.zeros(values.shape[:-1])
    out = np.add.accumulate(values, axis=-1)[..., -1]
    return float(out) if values.ndim == 1 else out


def row_major_strides(sizes: Sequence[int]) -> np.ndarray:
    """Strides of a row-major table whose last axis varies fastest."""
    strides = np.ones(len(sizes), dtype=np.int64)
    for j in range(len(sizes) - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    return strides


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PayoffComponent:
    """One local payoff function with its local joint type distribution.

    ``local_type_prob`` is a flat table over local joint types and ``payoff``
    a flat table over (local joint type, local joint action) pairs.
    """

    scope: tuple[int, ...]
    local_type_prob: np.ndarray
    payoff: np.ndarray

    def __post_init__(self):
        scope = tuple(int(i) for i in self.scope)
        if not scope:
            raise InvalidArgument("component scope must be non-empty")
        if any(b <= a for a, b in zip(scope, scope[1:])):
            raise InvalidArgument(f"scope {scope} must be strictly increasing")
        prob = np.array(self.local_type_prob, dtype=np.float64).ravel()
        payoff = np.array(self.payoff, dtype=np.float64).ravel()
        if not np.all(np.isfinite(payoff)):
            raise InvalidArgument("payoff entries must be finite")
        if not np.all(np.isfinite(prob)) or np.any(prob < 0):
            raise InvalidArgument("local type probabilities must be finite and >= 0")
        if abs(float(prob.sum()) - 1.0) > PROB_SUM_TOL:
            raise InvalidArgument(
                f"local type probabilities of scope {scope} sum to {prob.sum()!r}, not 1"
            )
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "local_type_prob", _frozen(prob))
        object.__setattr__(self, "payoff", _frozen(payoff))

    def __eq__(self, other):
        if not isinstance(other, PayoffComponent):
            return NotImplemented
        return (
            self.scope == other.scope
            and np.array_equal(self.local_type_prob, other.local_type_prob)
            and np.array_equal(self.payoff, other.payoff)
        )

    __hash__ = None


@dataclass(frozen=True)
class _ComponentIndex:
    # (T_e, k) flat variable index of (scope[j], theta_e[j]) for every theta_e
    var_idx: np.ndarray
    # (k,) strides of the local joint action index
    action_strides: np.ndarray
    # (T_e, A_e) contributions Pr(theta_e) * u(theta_e, a_e)
    contrib: np.ndarray


@dataclass(frozen=True, eq=False)
class CGBG:
    """A cooperative graphical Bayesian game.

    Construction validates every invariant except hypergraph connectivity,
    which :meth:`validate` checks on request (generators and the file loader
    call it).
    """

    n_agents: int
    action_sizes: tuple[int, ...]
    type_sizes: tuple[int, ...]
    components: tuple[PayoffComponent, ...]

    def __post_init__(self):
        n = int(self.n_agents)
        actions = tuple(int(a) for a in self.action_sizes)
        types = tuple(int(t) for t in self.type_sizes)
        comps = tuple(self.components)
        if n < 1:
            raise InvalidArgument("a game needs at least one agent")
        if len(actions) != n or len(types) != n:
            raise InvalidArgument("action_sizes and type_sizes need one entry per agent")
        if min(actions) < 1 or min(types) < 1:
            raise InvalidArgument("action and type set sizes must be >= 1")
        covered = set()
        for e, comp in enumerate(comps):
            if not isinstance(comp, PayoffComponent):
                raise InvalidArgument(f"component {e} is not a PayoffComponent")
            if comp.scope[-1] >= n or comp.scope[0] < 0:
                raise InvalidArgument(f"component {e} scope {comp.scope} out of range")
            n_types = int(np.prod([types[i] for i in comp.scope]))
            n_actions = int(np.prod([actions[i] for i in comp.scope]))
            if comp.local_type_prob.size != n_types:
                raise InvalidArgument(
                    f"component {e}: expected {n_types} type probabilities, "
                    f"got {comp.local_type_prob.size}"
                )
            if comp.payoff.size != n_types * n_actions:
                raise InvalidArgument(
                    f"component {e}: expected {n_types * n_actions} payoffs, "
                    f"got {comp.payoff.size}"
                )
            covered.update(comp.scope)
        missing = sorted(set(range(n)) - covered)
        if missing:
            raise InvalidArgument(f"agents {missing} appear in no component scope")
        object.__setattr__(self, "n_agents", n)
        object.__setattr__(self, "action_sizes", actions)
        object.__setattr__(self, "type_sizes", types)
        object.__setattr__(self, "components", comps)

    def __eq__(self, other):
        if not isinstance(other, CGBG):
            return NotImplemented
        return (
            self.n_agents == other.n_agents
            and self.action_sizes == other.action_sizes
            and self.type_sizes == other.type_sizes
            and self.components == other.components
        )

    __hash__ = None

    def is_connected(self) -> bool:
        """Whether the scope hypergraph links every pair of agents."""
        parent = list(range(self.n_agents))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for comp in self.components:
            root = find(comp.scope[0])
            for i in comp.scope[1:]:
                parent[find(i)] = root
        return len({find(i) for i in range(self.n_agents)}) == 1

    def validate(self, require_connected: bool = True) -> None:
        if require_connected and not self.is_connected():
            raise InvalidArgument("scope hypergraph of the game is not connected")

    # -- derived structure -------------------------------------------------

    @property
    def max_scope(self) -> int:
        return max(len(c.scope) for c in self.components)

    @cached_property
    def var_offsets(self) -> np.ndarray:
        """Flat index of (agent i, type 0); entry n is the total count."""
        return np.concatenate([[0], np.cumsum(self.type_sizes)]).astype(np.int64)

    @property
    def n_policy_vars(self) -> int:
        return int(self.var_offsets[-1])

    @cached_property
    def var_action_sizes(self) -> np.ndarray:
        return np.repeat(np.array(self.action_sizes, dtype=np.int64), self.type_sizes)

    def local_type_shape(self, e: int) -> tuple[int, ...]:
        return tuple(self.type_sizes[i] for i in self.components[e].scope)

    def local_action_shape(self, e: int) -> tuple[int, ...]:
        return tuple(self.action_sizes[i] for i in self.components[e].scope)

    @cached_property
    def _index(self) -> tuple[_ComponentIndex, ...]:
        out = []
        for e, comp in enumerate(self.components):
            tshape = self.local_type_shape(e)
            ashape = self.local_action_shape(e)
            grid = np.indices(tshape).reshape(len(tshape), -1).T
            var_idx = grid + self.var_offsets[list(comp.scope)]
            contrib = comp.local_type_prob[:, None] * comp.payoff.reshape(
                len(comp.local_type_prob), -1
            )
            out.append(
                _ComponentIndex(
                    var_idx=_frozen(var_idx.astype(np.int64)),
                    action_strides=_frozen(row_major_strides(ashape)),
                    contrib=_frozen(contrib),
                )
            )
        return tuple(out)

    def contribution_table(self, e: int) -> np.ndarray:
        """(T_e, A_e) table of local contributions of component ``e``."""
        return self._index[e].contrib

    def agent_components(self, i: int) -> list[int]:
        return [e for e, c in enumerate(self.components) if i in c.scope]


# -- policies ---------------------------------------------------------------


def check_policy(game: CGBG, policy) -> JointPolicy:
    """Validate ``policy`` against ``game`` and return it as nested tuples."""
    if len(policy) != game.n_agents:
        raise InvalidArgument(
            f"policy has {len(policy)} agents, game has {game.n_agents}"
        )
    out = []
    for i, beta in enumerate(policy):
        beta = tuple(int(a) for a in beta)
        if len(beta) != game.type_sizes[i]:
            raise InvalidArgument(
                f"agent {i}: policy covers {len(beta)} types, expected {game.type_sizes[i]}"
            )
        if any(a < 0 or a >= game.action_sizes[i] for a in beta):
            raise InvalidArgument(f"agent {i}: action index out of range in {beta}")
        out.append(beta)
    return tuple(out)


def policy_to_flat(game: CGBG, policy) -> np.ndarray:
    policy = check_policy(game, policy)
    return np.fromiter(
        (a for beta in policy for a in beta), dtype=np.int64, count=game.n_policy_vars
    )


def flat_to_policy(game: CGBG, flat) -> JointPolicy:
    flat = np.asarray(flat, dtype=np.int64)
    if flat.shape != (game.n_policy_vars,):
        raise InvalidArgument(
            f"flat policy must have length {game.n_policy_vars}, got shape {flat.shape}"
        )
    off = game.var_offsets
    return check_policy(
        game, [tuple(flat[off[i]:off[i + 1]].tolist()) for i in range(game.n_agents)]
    )


def joint_policy_count(game: CGBG) -> int:
    """Number of pure joint policies, as an exact integer."""
    count = 1
    for a, t in zip(game.action_sizes, game.type_sizes):
        count *= a**t
    return count


# -- evaluation -------------------------------------------------------------


def _check_component(game: CGBG, e: int) -> int:
    e = int(e)
    if not 0 <= e < len(game.components):
        raise InvalidArgument(f"component index {e} out of range")
    return e


def _contributions(game: CGBG, flat: np.ndarray) -> np.ndarray:
    """Selected contributions, shape (P, sum_e T_e), for flat policies (P, V)."""
    parts = []
    for idx in game._index:
        aidx = (flat[:, idx.var_idx] * idx.action_strides).sum(axis=-1)
        rows = np.arange(idx.contrib.shape[0])
        parts.append(idx.contrib[rows, aidx])
    return np.concatenate(parts, axis=1)


def evaluate_flat(game: CGBG, flat) -> float | np.ndarray:
    """Value of one flat policy (1-D input) or a batch of them (2-D input).

    A batch returns bit-identical values to evaluating each row alone.
    """
    flat = np.asarray(flat, dtype=np.int64)
    single = flat.ndim == 1
    batch = flat[None, :] if single else flat
    if batch.shape[1] != game.n_policy_vars:
        raise InvalidArgument(f"flat policies must have {game.n_policy_vars} columns")
    values = fold_sum(_contributions(game, batch))
    return float(values[0]) if single else values


def evaluate_policy(game: CGBG, policy) -> float:
    """Expected team payoff of a pure joint policy."""
    return evaluate_flat(game, policy_to_flat(game, policy))


def local_value(game: CGBG, e: int, local_policy) -> float:
    """Expected payoff of component ``e`` under a local joint policy.

    ``local_policy`` holds one type-to-action map per scope member, in scope
    order.
    """
    e = _check_component(game, e)
    scope = game.components[e].scope
    if len(local_policy) != len(scope):
        raise InvalidArgument(
            f"local policy covers {len(local_policy)} agents, scope {scope} has {len(scope)}"
        )
    idx = game._index[e]
    cols = []
    for j, i in enumerate(scope):
        beta = tuple(int(a) for a in local_policy[j])
        if len(beta) != game.type_sizes[i]:
            raise InvalidArgument(f"local policy for agent {i} has wrong type count")
        if any(a < 0 or a >= game.action_sizes[i] for a in beta):
            raise InvalidArgument(f"local policy for agent {i} has out-of-range action")
        types = idx.var_idx[:, j] - game.var_offsets[i]
        cols.append(np.asarray(beta, dtype=np.int64)[types])
    aidx = (np.stack(cols, axis=1) * idx.action_strides).sum(axis=1)
    return fold_sum(idx.contrib[np.arange(len(aidx)), aidx])


def local_contribution(game: CGBG, e: int, theta_e: Sequence[int], a_e: Sequence[int]) -> float:
    """Probability-weighted payoff of one local joint type and joint action."""
    e = _check_component(game, e)
    tshape = game.local_type_shape(e)
    ashape = game.local_action_shape(e)
    if len(theta_e) != len(tshape) or len(a_e) != len(ashape):
        raise InvalidArgument("local joint type/action must match the scope length")
    if any(not 0 <= int(t) < s for t, s in zip(theta_e, tshape)):
        raise InvalidArgument(f"local joint type {tuple(theta_e)} out of range")
    if any(not 0 <= int(a) < s for a, s in zip(a_e, ashape)):
        raise InvalidArgument(f"local joint action {tuple(a_e)} out of range")
    t = int(np.dot(row_major_strides(tshape), theta_e))
    a = int(np.dot(row_major_strides(ashape), a_e))
    return float(game.contribution_table(e)[t, a])


def best_response(game: CGBG, policy, i: int) -> tuple[int, ...]:
    """Best individual policy of agent ``i`` against the others in ``policy``.

    Each type is optimized independently; ties go to the lowest action.
    """
    if not 0 <= int(i) < game.n_agents:
        raise InvalidArgument(f"agent index {i} out of range")
    i = int(i)
    flat = policy_to_flat(game, policy)
    n_actions = game.action_sizes[i]
    scores = np.zeros((game.type_sizes[i], n_actions))
    for e in game.agent_components(i):
        idx = game._index[e]
        p = game.components[e].scope.index(i)
        chosen = flat[idx.var_idx] * idx.action_strides
        base = chosen.sum(axis=1) - chosen[:, p]
        aidx = base[:, None] + np.arange(n_actions) * idx.action_strides[p]
        rows = np.arange(len(base))[:, None]
        own_types = idx.var_idx[:, p] - game.var_offsets[i]
        np.add.at(scores, own_types, idx.contrib[rows, aidx])
    return tuple(int(a) for a in np.argmax(scores, axis=1))
