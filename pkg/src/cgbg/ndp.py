"""Non-serial dynamic programming (variable elimination) on factor graphs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, InvalidArgument
from .factor_graph import DEFAULT_MEMORY_CAP, FactorGraph, evaluate_assignment

HEURISTICS = ("min-fill", "min-neighbors", "given-order")


@dataclass(frozen=True)
class NdpResult:
    assignment: tuple[int, ...]
    value: float
    induced_width: int
    ordering: tuple[int, ...]


def interaction_graph(fg: FactorGraph) -> list[set[int]]:
    """Variables are adjacent when they share a factor."""
    adj = [set() for _ in range(fg.n_variables)]
    for f in fg.factors:
        for v in f.neighbors:
            adj[v].update(f.neighbors)
    for v, nbrs in enumerate(adj):
        nbrs.discard(v)
    return adj


def _fill_in(adj: list[set[int]], v: int) -> int:
    nbrs = sorted(adj[v])
    missing = 0
    for j, a in enumerate(nbrs):
        row = adj[a]
        for b in nbrs[j + 1:]:
            if b not in row:
                missing += 1
    return missing


def elimination_order(
    fg: FactorGraph, heuristic: str = "min-fill", given: Sequence[int] | None = None
) -> tuple[int, ...]:
    """Greedy elimination ordering; ties go to the lowest variable index.

    ``given-order`` returns ``given`` after checking it is a permutation
    (the identity when omitted).
    """
    n = fg.n_variables
    if heuristic == "given-order":
        order = tuple(range(n)) if given is None else tuple(int(v) for v in given)
        if sorted(order) != list(range(n)):
            raise InvalidArgument("given order is not a permutation of the variables")
        return order
    if heuristic not in HEURISTICS:
        raise InvalidArgument(f"unknown elimination heuristic {heuristic!r}")

    adj = interaction_graph(fg)
    if heuristic == "min-neighbors":
        score = lambda v: len(adj[v])  # noqa: E731
    else:
        score = lambda v: _fill_in(adj, v)  # noqa: E731
    scores = {v: score(v) for v in range(n)}
    order = []
    while scores:
        v = min(scores, key=lambda u: (scores[u], u))
        del scores[v]
        order.append(v)
        nbrs = adj[v]
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(nbrs)
            adj[a].discard(a)
        adj[v] = set()
        touched = set(nbrs)
        if heuristic == "min-fill":
            for a in nbrs:
                touched.update(adj[a])
        for u in touched:
            if u in scores:
                scores[u] = score(u)
    return tuple(order)


def solve_ndp(
    fg: FactorGraph,
    ordering: Sequence[int] | None = None,
    heuristic: str = "min-fill",
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> NdpResult:
    """Exact maximization of the factor-graph sum by variable elimination.

    Without an explicit ``ordering`` one is computed with ``heuristic``. The
    forward pass stores, per eliminated variable, its best response to the
    remaining neighbors; the backward pass replays them in reverse. Raises
    CapacityError before allocating a table larger than ``memory_cap`` bytes.
    """
    if ordering is None:
        ordering = elimination_order(fg, heuristic)
    else:
        ordering = elimination_order(fg, "given-order", ordering)
    sizes = fg.domain_sizes

    # live factors: id -> (sorted variable tuple, table with axes in that order)
    live: dict[int, tuple[tuple[int, ...], np.ndarray]] = {}
    holders: list[set[int]] = [set() for _ in range(fg.n_variables)]
    for fid, f in enumerate(fg.factors):
        perm = np.argsort(f.neighbors, kind="stable")
        scope = tuple(f.neighbors[p] for p in perm)
        live[fid] = (scope, np.transpose(f.table, perm))
        for v in scope:
            holders[v].add(fid)
    next_id = fg.n_factors

    steps = []
    width = 0
    for step, v in enumerate(ordering):
        bucket = sorted(holders[v])
        union = sorted({u for fid in bucket for u in live[fid][0]} | {v})
        entries = 1
        for u in union:
            entries *= int(sizes[u])
        if 8 * entries > memory_cap:
            raise CapacityError(
                f"elimination step {step} (variable {v}) needs a table over "
                f"{len(union)} variables ({8 * entries} bytes); cap is {memory_cap} bytes"
            )
        width = max(width, len(union) - 1)
        shape = tuple(int(sizes[u]) for u in union)
        combined = np.zeros(shape)
        for fid in bucket:
            scope, table = live.pop(fid)
            view = [1] * len(union)
            for u in scope:
                view[union.index(u)] = int(sizes[u])
                if u != v:
                    holders[u].discard(fid)
            combined += table.reshape(view)
        holders[v] = set()
        axis = union.index(v)
        rest = tuple(u for u in union if u != v)
        steps.append((v, rest, np.argmax(combined, axis=axis)))
        if rest:
            live[next_id] = (rest, combined.max(axis=axis))
            for u in rest:
                holders[u].add(next_id)
            next_id += 1

    assignment = np.zeros(fg.n_variables, dtype=np.int64)
    for v, rest, best in reversed(steps):
        assignment[v] = best[tuple(assignment[u] for u in rest)]
    value = evaluate_assignment(fg, assignment)
    return NdpResult(tuple(assignment.tolist()), value, width, tuple(ordering))
