"""Loopy Max-Sum message passing with damping, restarts and anytime decoding.

Messages live on edges. Variable-to-factor messages are the sum of the
other incoming factor messages, centered by subtracting their mean.
Factor-to-variable messages maximize the factor table plus the other
incoming variable messages over the remaining neighbors, and are damped as
``lam * old + (1 - lam) * new``. Variable messages are a deterministic
function of the factor messages and carry no damping of their own.

Message arrays are padded to the largest variable domain; padded entries
are held at zero and never read.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidArgument
from .factor_graph import FactorGraph, evaluate_assignment
from .game import CGBG

log = logging.getLogger(__name__)

Schedule = Literal["parallel", "sequential-random"]


@dataclass(frozen=True)
class MaxSumConfig:
    max_iterations: int = 100
    damping: float = 0.5
    schedule: Schedule = "parallel"
    convergence_tolerance: float = 1e-6
    restarts: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise InvalidArgument("damping must lie in [0, 1)")
        if self.schedule not in ("parallel", "sequential-random"):
            raise InvalidArgument(f"unknown schedule {self.schedule!r}")
        if not self.convergence_tolerance > 0:
            raise InvalidArgument("convergence_tolerance must be > 0")
        if self.restarts < 1:
            raise InvalidArgument("restarts must be >= 1")


@dataclass(frozen=True)
class RestartStats:
    iterations: int
    converged: bool
    final_delta: float


@dataclass(frozen=True)
class MaxSumResult:
    assignment: tuple[int, ...]
    value: float
    restarts: tuple[RestartStats, ...]
    messages_sent_per_iteration: int
    # best value after every iteration, across restarts in run order
    best_trace: tuple[float, ...] = field(repr=False)

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.restarts)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.restarts)


def _max_except(total: np.ndarray, p: int) -> np.ndarray:
    """Max of a (G, d_1, ..., d_k) batch over every table axis except ``p``."""
    moved = np.moveaxis(total, p + 1, 1)
    flat = moved.reshape(moved.shape[0], moved.shape[1], -1)
    n = flat.shape[2]
    if n > 16:
        return flat.max(axis=2)
    out = flat[:, :, 0].copy()
    for j in range(1, n):
        np.maximum(out, flat[:, :, j], out=out)
    return out


class MaxSumEngine:
    """Mutable message state for one factor graph.

    ``q`` holds variable-to-factor and ``r`` factor-to-variable messages,
    both shaped (edges, max domain). Edges are numbered factor-major in
    neighbor order.
    """

    def __init__(self, fg: FactorGraph, damping: float = 0.5):
        self.fg = fg
        self.damping = float(damping)
        sizes = fg.domain_sizes
        self.width = int(sizes.max()) if len(sizes) else 1
        edge_factor, edge_pos, edge_var = [], [], []
        for fi, f in enumerate(fg.factors):
            for p, v in enumerate(f.neighbors):
                edge_factor.append(fi)
                edge_pos.append(p)
                edge_var.append(v)
        self.edge_factor = np.array(edge_factor, dtype=np.int64)
        self.edge_pos = np.array(edge_pos, dtype=np.int64)
        self.edge_var = np.array(edge_var, dtype=np.int64)
        self.n_edges = len(edge_var)
        self.edge_size = sizes[self.edge_var] if self.n_edges else np.zeros(0, np.int64)
        self.valid = np.arange(self.width) < self.edge_size[:, None]
        self.var_valid = np.arange(self.width) < sizes[:, None]

        first = np.zeros(fg.n_factors + 1, dtype=np.int64)
        np.cumsum([len(f.neighbors) for f in fg.factors], out=first[1:])
        self.factor_first_edge = first
        var_edges = [[] for _ in range(fg.n_variables)]
        for e, v in enumerate(edge_var):
            var_edges[v].append(e)
        self.var_edges = [np.array(es, dtype=np.int64) for es in var_edges]

        # factors batched by table shape
        groups: dict[tuple[int, ...], list[int]] = {}
        for fi, f in enumerate(fg.factors):
            groups.setdefault(f.table.shape, []).append(fi)
        self.groups = []
        for shape, fids in groups.items():
            fids = np.array(fids, dtype=np.int64)
            tables = np.stack([fg.factors[fi].table for fi in fids])
            edges = first[fids][:, None] + np.arange(len(shape))
            self.groups.append((shape, tables, edges))

        self.q = np.zeros((self.n_edges, self.width))
        self.r = np.zeros((self.n_edges, self.width))

    def reset(self, rng: np.random.Generator | None = None) -> None:
        """Zero messages, or independent uniform [0, 1) draws from ``rng``."""
        if rng is None:
            self.q = np.zeros((self.n_edges, self.width))
            self.r = np.zeros((self.n_edges, self.width))
        else:
            self.q = rng.random((self.n_edges, self.width)) * self.valid
            self.r = rng.random((self.n_edges, self.width)) * self.valid

    # -- message computations ---------------------------------------------

    def _beliefs(self, r: np.ndarray) -> np.ndarray:
        n = self.fg.n_variables
        belief = np.empty((n, self.width))
        for j in range(self.width):
            belief[:, j] = np.bincount(self.edge_var, weights=r[:, j], minlength=n)
        return belief

    def _variable_messages(self, r: np.ndarray) -> np.ndarray:
        q = self._beliefs(r)[self.edge_var] - r
        q *= self.valid
        mean = q.sum(axis=1) / self.edge_size
        q -= mean[:, None]
        q *= self.valid
        return q

    def _factor_messages(self, q: np.ndarray) -> np.ndarray:
        r = np.zeros_like(q)
        for shape, tables, edges in self.groups:
            k = len(shape)
            incoming = []
            for p in range(k):
                view = [-1] + [1] * k
                view[p + 1] = shape[p]
                incoming.append(q[edges[:, p], : shape[p]].reshape(view))
            for p in range(k):
                total = tables
                for p2 in range(k):
                    if p2 != p:
                        total = total + incoming[p2]
                r[edges[:, p], : shape[p]] = _max_except(total, p)
        return r

    def _damp(self, old: np.ndarray, new: np.ndarray) -> np.ndarray:
        if self.damping == 0.0:
            return new
        return self.damping * old + (1.0 - self.damping) * new

    def step_parallel(self) -> float:
        """One flooding iteration; returns the max message change.

        Every variable message is computed from the previous iteration's
        factor messages, then every factor message from the new variable
        messages.
        """
        q = self._variable_messages(self.r)
        r = self._damp(self.r, self._factor_messages(q))
        delta = 0.0
        if self.n_edges:
            delta = max(float(np.abs(q - self.q).max()), float(np.abs(r - self.r).max()))
        self.q, self.r = q, r
        return delta

    def step_sequential(self, rng: np.random.Generator) -> float:
        """Visit edges in a random order, updating both directions in place."""
        delta = 0.0
        fg = self.fg
        for e in rng.permutation(self.n_edges):
            v, fi, p = self.edge_var[e], self.edge_factor[e], self.edge_pos[e]
            d = int(self.edge_size[e])
            others = self.var_edges[v]
            msg = self.r[others, :d].sum(axis=0) - self.r[e, :d]
            msg = msg - msg.mean()
            delta = max(delta, float(np.abs(msg - self.q[e, :d]).max()))
            self.q[e, :d] = msg

            f = fg.factors[fi]
            k = len(f.neighbors)
            total = f.table
            first = self.factor_first_edge[fi]
            for p2 in range(k):
                if p2 != p:
                    view = [1] * k
                    view[p2] = f.table.shape[p2]
                    total = total + self.q[first + p2, : f.table.shape[p2]].reshape(view)
            axes = tuple(a for a in range(k) if a != p)
            new_r = self._damp(self.r[e, :d], total.max(axis=axes) if axes else total)
            delta = max(delta, float(np.abs(new_r - self.r[e, :d]).max()))
            self.r[e, :d] = new_r
        return delta

    def decode(self) -> np.ndarray:
        """Per variable, argmax of incoming factor messages (lowest index on ties)."""
        belief = self._beliefs(self.r)
        belief[~self.var_valid] = -np.inf
        return np.argmax(belief, axis=1).astype(np.int64)


def run_maxsum(fg: FactorGraph, config: MaxSumConfig | None = None) -> MaxSumResult:
    """Max-Sum with restarts, keeping the best exactly-evaluated assignment.

    Restart 0 starts from zero messages, later restarts from uniform noise.
    Every iteration's decoded assignment is evaluated with
    :func:`evaluate_assignment`; the first strictly better one replaces the
    incumbent.
    """
    config = config or MaxSumConfig()
    engine = MaxSumEngine(fg, config.damping)
    streams = np.random.SeedSequence(config.rng_seed).spawn(config.restarts)
    best_x = np.zeros(fg.n_variables, dtype=np.int64)
    best_value = -np.inf
    trace = []
    stats = []
    for restart, stream in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(stream))
        engine.reset(None if restart == 0 else rng)
        converged = False
        delta = np.inf
        it = 0
        while it < config.max_iterations:
            it += 1
            if config.schedule == "parallel":
                delta = engine.step_parallel()
            else:
                delta = engine.step_sequential(rng)
            x = engine.decode()
            value = evaluate_assignment(fg, x)
            if value > best_value:
                best_value, best_x = value, x
            trace.append(best_value)
            if delta < config.convergence_tolerance:
                converged = True
                break
        stats.append(RestartStats(it, converged, float(delta)))
        log.debug("restart %d: %d iterations, delta %.3g, best %.6g", restart, it, delta, best_value)
    return MaxSumResult(
        assignment=tuple(best_x.tolist()),
        value=float(best_value),
        restarts=tuple(stats),
        messages_sent_per_iteration=2 * fg.edge_count,
        best_trace=tuple(trace),
    )


@dataclass(frozen=True)
class CostReport:
    n_factors: int
    max_factor_degree: int
    max_variable_degree: int
    max_domain: int
    edges: int
    messages_per_iteration: int
    # game-level quantities, present when the game is supplied
    k: int | None = None
    rho: int | None = None
    rho_star: int | None = None


def message_cost_report(fg: FactorGraph, game: CGBG | None = None) -> CostReport:
    """Quantities that bound the cost of one Max-Sum iteration."""
    degrees = [len(f.neighbors) for f in fg.factors]
    var_degrees = [len(fs) for fs in fg.variable_factors]
    k = rho = rho_star = None
    if game is not None:
        k = game.max_scope
        rho = len(game.components)
        rho_star = max(len(game.agent_components(i)) for i in range(game.n_agents))
    return CostReport(
        n_factors=fg.n_factors,
        max_factor_degree=max(degrees, default=0),
        max_variable_degree=max(var_degrees, default=0),
        max_domain=int(fg.domain_sizes.max()) if fg.n_variables else 0,
        edges=fg.edge_count,
        messages_per_iteration=2 * sum(degrees),
        k=k,
        rho=rho,
        rho_star=rho_star,
    )
