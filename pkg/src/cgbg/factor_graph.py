"""Additive factor graphs over finite-domain variables.

Two constructions turn a game into a factor graph:

* AI graph: one variable per agent whose values enumerate that agent's
  individual policies, one factor per payoff component holding its local
  value.
* ATI graph: one variable per (agent, type) pair whose values are actions,
  one factor per (component, local joint type) holding the local
  contributions.

Policy enumeration in the AI graph treats a policy as a base-|A_i| number
with type 0 as the least significant digit.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapacityError, InvalidArgument
from .game import CGBG, JointPolicy, fold_sum, row_major_strides

DEFAULT_MEMORY_CAP = 1 << 30


@dataclass(frozen=True, eq=False)
class Factor:
    label: str
    neighbors: tuple[int, ...]
    table: np.ndarray


class FactorGraph:
    """Bipartite graph of variables and dense additive factor tables.

    A factor table has one axis per neighbor, in neighbor order.
    """

    def __init__(self, variables: Sequence[tuple[str, int]], factors: Sequence[Factor]):
        self.variables = tuple((str(label), int(size)) for label, size in variables)
        if any(size < 1 for _, size in self.variables):
            raise InvalidArgument("variable domain sizes must be >= 1")
        sizes = self.domain_sizes
        checked = []
        for f in factors:
            nbrs = tuple(int(v) for v in f.neighbors)
            if len(set(nbrs)) != len(nbrs):
                raise InvalidArgument(f"factor {f.label!r} repeats a neighbor")
            if any(not 0 <= v < len(sizes) for v in nbrs):
                raise InvalidArgument(f"factor {f.label!r} references an unknown variable")
            table = np.asarray(f.table, dtype=np.float64)
            shape = tuple(int(sizes[v]) for v in nbrs)
            if table.size != int(np.prod(shape, dtype=np.int64)):
                raise InvalidArgument(
                    f"factor {f.label!r} table has {table.size} entries, expected shape {shape}"
                )
            table = table.reshape(shape)
            table.setflags(write=False)
            checked.append(Factor(f.label, nbrs, table))
        self.factors = tuple(checked)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @cached_property
    def domain_sizes(self) -> np.ndarray:
        return np.array([size for _, size in self.variables], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return sum(len(f.neighbors) for f in self.factors)

    @cached_property
    def variable_factors(self) -> tuple[tuple[int, ...], ...]:
        """Factors adjacent to each variable, in factor order."""
        adj = [[] for _ in range(self.n_variables)]
        for fi, f in enumerate(self.factors):
            for v in f.neighbors:
                adj[v].append(fi)
        return tuple(tuple(a) for a in adj)

    def is_acyclic(self) -> bool:
        parent = list(range(self.n_variables + self.n_factors))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for fi, f in enumerate(self.factors):
            node = self.n_variables + fi
            for v in f.neighbors:
                a, b = find(node), find(v)
                if a == b:
                    return False
                parent[a] = b
        return True

    @cached_property
    def _gather(self):
        # Flat tables plus padded neighbor/stride matrices for vectorized lookup.
        kmax = max((len(f.neighbors) for f in self.factors), default=0)
        n = self.n_factors
        nbrs = np.zeros((n, kmax), dtype=np.int64)
        strides = np.zeros((n, kmax), dtype=np.int64)
        offsets = np.zeros(n, dtype=np.int64)
        pos = 0
        for fi, f in enumerate(self.factors):
            k = len(f.neighbors)
            nbrs[fi, :k] = f.neighbors
            strides[fi, :k] = row_major_strides(f.table.shape)
            offsets[fi] = pos
            pos += f.table.size
        flat = (
            np.concatenate([f.table.ravel() for f in self.factors])
            if self.factors
            else np.zeros(0)
        )
        return flat, offsets, nbrs, strides

    def check_assignment(self, assignment) -> np.ndarray:
        x = np.asarray(assignment, dtype=np.int64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.n_variables:
            raise InvalidArgument(
                f"assignment must have {self.n_variables} entries, got shape {x.shape}"
            )
        if np.any(x < 0) or np.any(x >= self.domain_sizes):
            raise InvalidArgument("assignment entry outside its variable's domain")
        return x


def evaluate_assignment(fg: FactorGraph, assignment) -> float | np.ndarray:
    """Sum of the selected factor entries, factors folded in order.

    Accepts one assignment or a 2-D batch (one assignment per row).
    """
    x = fg.check_assignment(assignment)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    flat, offsets, nbrs, strides = fg._gather
    idx = offsets + (batch[:, nbrs] * strides).sum(axis=-1)
    values = fold_sum(flat[idx])
    return float(values[0]) if single else values


# -- AI graph ---------------------------------------------------------------


@dataclass(frozen=True)
class AiDecoder:
    action_sizes: tuple[int, ...]
    type_sizes: tuple[int, ...]

    def decode(self, assignment) -> JointPolicy:
        if len(assignment) != len(self.action_sizes):
            raise InvalidArgument("AI assignment needs one value per agent")
        policy = []
        for p, a, t in zip(assignment, self.action_sizes, self.type_sizes):
            p = int(p)
            if not 0 <= p < a**t:
                raise InvalidArgument(f"policy index {p} out of range")
            policy.append(tuple((p // a**d) % a for d in range(t)))
        return tuple(policy)

    def encode(self, policy) -> np.ndarray:
        if len(policy) != len(self.action_sizes):
            raise InvalidArgument("policy needs one entry per agent")
        out = []
        for beta, a, t in zip(policy, self.action_sizes, self.type_sizes):
            if len(beta) != t or any(not 0 <= int(x) < a for x in beta):
                raise InvalidArgument("individual policy does not match the agent")
            out.append(sum(int(x) * a**d for d, x in enumerate(beta)))
        return np.array(out, dtype=np.int64)


def policy_digits(n_actions: int, n_types: int) -> np.ndarray:
    """(A^T, T) table: entry [p, t] is the action policy p takes for type t."""
    p = np.arange(n_actions**n_types, dtype=np.int64)[:, None]
    return (p // n_actions ** np.arange(n_types, dtype=np.int64)) % n_actions


def build_ai_fg(game: CGBG, memory_cap: int = DEFAULT_MEMORY_CAP) -> tuple[FactorGraph, AiDecoder]:
    """Agent-independence factor graph of ``game``.

    Raises CapacityError when a policy domain overflows the index range or a
    factor table would exceed ``memory_cap`` bytes.
    """
    domains = []
    for i, (a, t) in enumerate(zip(game.action_sizes, game.type_sizes)):
        size = a**t
        if size > sys.maxsize:
            raise CapacityError(f"agent {i} has {a}^{t} policies; exceeds the index range")
        domains.append(size)
    total_bytes = 0
    for e, comp in enumerate(game.components):
        entries = 1
        for i in comp.scope:
            entries *= domains[i]
        total_bytes += 8 * entries
        if total_bytes > memory_cap:
            raise CapacityError(
                f"AI factor tables need {total_bytes} bytes by component {e}; cap is {memory_cap}"
            )
    digits = {}
    variables = [(f"agent{i}", d) for i, d in enumerate(domains)]
    factors = []
    for e, comp in enumerate(game.components):
        k = len(comp.scope)
        shape = tuple(domains[i] for i in comp.scope)
        astrides = row_major_strides(game.local_action_shape(e))
        tshape = game.local_type_shape(e)
        contrib = game.contribution_table(e)
        cols = []
        for j, i in enumerate(comp.scope):
            key = (game.action_sizes[i], game.type_sizes[i])
            if key not in digits:
                digits[key] = policy_digits(*key)
            view = [1] * k
            view[j] = -1
            cols.append((digits[key] * astrides[j], view))
        table = np.zeros(shape)
        for t, theta in enumerate(np.ndindex(*tshape)):
            aidx = sum(d[:, theta[j]].reshape(view) for j, (d, view) in enumerate(cols))
            table += contrib[t][aidx]
        factors.append(Factor(f"V{e}", comp.scope, table))
    return FactorGraph(variables, factors), AiDecoder(game.action_sizes, game.type_sizes)


# -- ATI graph --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtiIndex:
    """Bijections between (agent, type) and variables, and between
    (component, local joint type) and factors."""

    action_sizes: tuple[int, ...]
    type_sizes: tuple[int, ...]
    var_offsets: np.ndarray
    factor_offsets: np.ndarray
    var_agent: np.ndarray
    var_type: np.ndarray
    factor_component: np.ndarray
    factor_local_type: np.ndarray

    def variable(self, i: int, theta_i: int) -> int:
        if not 0 <= i < len(self.type_sizes) or not 0 <= theta_i < self.type_sizes[i]:
            raise InvalidArgument(f"(agent {i}, type {theta_i}) out of range")
        return int(self.var_offsets[i] + theta_i)

    def factor(self, e: int, theta_e: int) -> int:
        if not 0 <= e < len(self.factor_offsets) - 1:
            raise InvalidArgument(f"component {e} out of range")
        if not 0 <= theta_e < self.factor_offsets[e + 1] - self.factor_offsets[e]:
            raise InvalidArgument(f"local joint type {theta_e} out of range")
        return int(self.factor_offsets[e] + theta_e)


def build_ati_fg(game: CGBG) -> tuple[FactorGraph, AtiIndex]:
    """Agent-and-type-independence factor graph of ``game``."""
    off = game.var_offsets
    variables = [
        (f"agent{i}.type{t}", game.action_sizes[i])
        for i in range(game.n_agents)
        for t in range(game.type_sizes[i])
    ]
    factors = []
    factor_component = []
    factor_local_type = []
    factor_offsets = [0]
    for e, comp in enumerate(game.components):
        ashape = game.local_action_shape(e)
        contrib = game.contribution_table(e)
        var_idx = game._index[e].var_idx
        for t in range(contrib.shape[0]):
            theta = var_idx[t] - off[list(comp.scope)]
            label = f"C{e}[" + ",".join(map(str, theta.tolist())) + "]"
            factors.append(Factor(label, tuple(var_idx[t].tolist()), contrib[t].reshape(ashape)))
            factor_component.append(e)
            factor_local_type.append(t)
        factor_offsets.append(len(factors))
    index = AtiIndex(
        action_sizes=game.action_sizes,
        type_sizes=game.type_sizes,
        var_offsets=off.copy(),
        factor_offsets=np.array(factor_offsets, dtype=np.int64),
        var_agent=np.repeat(np.arange(game.n_agents), game.type_sizes),
        var_type=np.concatenate([np.arange(t) for t in game.type_sizes]),
        factor_component=np.array(factor_component, dtype=np.int64),
        factor_local_type=np.array(factor_local_type, dtype=np.int64),
    )
    return FactorGraph(variables, factors), index


def decode_ati(index: AtiIndex, assignment) -> JointPolicy:
    x = np.asarray(assignment, dtype=np.int64)
    if x.shape != (int(index.var_offsets[-1]),):
        raise InvalidArgument(
            f"ATI assignment must have {int(index.var_offsets[-1])} entries, got shape {x.shape}"
        )
    policy = []
    for i, a in enumerate(index.action_sizes):
        beta = tuple(x[index.var_offsets[i]:index.var_offsets[i + 1]].tolist())
        if any(not 0 <= b < a for b in beta):
            raise InvalidArgument(f"agent {i}: action outside its action set")
        policy.append(beta)
    return tuple(policy)


def encode_ati(index: AtiIndex, policy) -> np.ndarray:
    if len(policy) != len(index.type_sizes):
        raise InvalidArgument("policy needs one entry per agent")
    out = []
    for i, beta in enumerate(policy):
        if len(beta) != index.type_sizes[i]:
            raise InvalidArgument(f"agent {i}: policy covers the wrong number of types")
        if any(not 0 <= int(b) < index.action_sizes[i] for b in beta):
            raise InvalidArgument(f"agent {i}: action outside its action set")
        out.extend(int(b) for b in beta)
    return np.array(out, dtype=np.int64)


def build_fg(game: CGBG, form: str, memory_cap: int = DEFAULT_MEMORY_CAP):
    """Build either graph form and return ``(fg, decode)``.

    ``decode`` maps an assignment of ``fg`` back to a joint policy.
    """
    if form == "ati":
        fg, index = build_ati_fg(game)
        return fg, lambda x: decode_ati(index, x)
    if form == "ai":
        fg, dec = build_ai_fg(game, memory_cap)
        return fg, dec.decode
    raise InvalidArgument(f"unknown factor graph form {form!r}")

