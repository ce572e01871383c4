"""Parameter sweeps: one CSV row per (instance, solver) cell.

A sweep specification is a JSON document::

    {
      "version": 1,
      "experiment_id": "scale-agents",
      "domain": "random",                      # or "firefighting"
      "grid": {"n_agents": [10, 20], "k": [2], "n_actions": [4], "n_types": [4]},
      "seeds": [0, 1, 2],                      # or {"n_seeds": 10, "first_seed": 0}
      "base_seed": 0,
      "solvers": ["maxsum-ati", "maxsum-ai"],
      "time_limit_s": 5,
      "memory_limit_mb": 1024,
      "maxsum": {"restarts": 10, "damping": 0.5, ...},
      "skip_after_exceeded": true
    }

Each cell runs in a forked worker process that the runner kills at the
time limit; inside the worker, new address space is capped at the memory
limit. Breaches produce a row with the ``exceeded`` column set instead of
aborting the sweep. Cells of one ``n_agents`` value run as a batch;
with ``skip_after_exceeded`` a solver that breached a limit is not run at
larger ``n_agents`` for the same remaining parameters.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import multiprocessing as mp
import os
import time
import traceback
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .domains import FirefightingParams, gen_firefighting, gen_random_cgbg
from .errors import InvalidArgument
from .game import CGBG
from .maxsum import MaxSumConfig
from .solve import SOLVERS, SolverOptions, solve

log = logging.getLogger(__name__)

SWEEP_VERSION = 1
WORKERS_ENV = "CGBG_MAX_WORKERS"

COLUMNS = (
    "experiment_id",
    "domain",
    "n_agents",
    "n_actions",
    "n_types",
    "k",
    "seed",
    "solver",
    "value",
    "normalized_value",
    "wall_time_ms",
    "iterations",
    "converged",
    "induced_width",
    "restarts",
    "exceeded",
)

RANDOM_DEFAULTS = {"n_agents": [5], "k": [2], "n_actions": [3], "n_types": [3]}
FIREFIGHTING_DEFAULTS = {
    "n_agents": [2],
    "n_houses": [3],
    "n_observed": [1],
    "n_actionable": [2],
    "p_fire": [0.5],
    "obs_noise": [0.2],
    "attenuation": [0.4],
    "layout": ["line"],
}


class SweepError(InvalidArgument):
    """A sweep specification is malformed."""


@dataclass
class SweepSpec:
    experiment_id: str
    domain: str
    grid: dict
    seeds: list[int]
    solvers: list[str]
    base_seed: int = 0
    time_limit_s: float = 5.0
    memory_limit_mb: float = 1024.0
    build_time_limit_s: float = 10.0
    skip_after_exceeded: bool = True
    maxsum: dict = field(default_factory=dict)
    ndp: dict = field(default_factory=dict)
    altmax: dict = field(default_factory=dict)
    ce: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        if not isinstance(doc, dict):
            raise SweepError("sweep specification must be a JSON object")
        if doc.get("version") != SWEEP_VERSION:
            raise SweepError(f"unsupported sweep version {doc.get('version')!r}")
        known = {f.name for f in fields(cls)} | {"version"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise SweepError(f"unknown sweep keys: {unknown}")
        domain = doc.get("domain", "random")
        defaults = {"random": RANDOM_DEFAULTS, "firefighting": FIREFIGHTING_DEFAULTS}.get(domain)
        if defaults is None:
            raise SweepError(f"unknown domain {domain!r}")
        grid = dict(defaults)
        for key, values in doc.get("grid", {}).items():
            if key not in defaults:
                raise SweepError(f"grid key {key!r} does not apply to domain {domain!r}")
            grid[key] = list(values) if isinstance(values, list) else [values]
        seeds = doc.get("seeds", [0])
        if isinstance(seeds, dict):
            first = int(seeds.get("first_seed", 0))
            seeds = list(range(first, first + int(seeds["n_seeds"])))
        solvers = list(doc.get("solvers", ["maxsum-ati"]))
        bad = [s for s in solvers if s not in SOLVERS]
        if bad:
            raise SweepError(f"unknown solvers {bad}")
        kwargs = {k: v for k, v in doc.items() if k not in ("version", "grid", "seeds", "solvers", "domain")}
        spec = cls(
            domain=domain,
            grid=grid,
            seeds=[int(s) for s in seeds],
            solvers=solvers,
            **{"experiment_id": "sweep", **kwargs},
        )
        spec.solver_options(0)
        return spec

    def solver_options(self, seed: int) -> SolverOptions:
        try:
            ms = dict(self.maxsum)
            if "tolerance" in ms:
                ms["convergence_tolerance"] = ms.pop("tolerance")
            ms.pop("rng_seed", None)
            return SolverOptions(
                seed=seed,
                memory_cap=int(self.memory_limit_mb * (1 << 20)),
                maxsum=MaxSumConfig(**ms),
                heuristic=self.ndp.get("heuristic", "min-fill"),
                altmax_rounds=self.altmax.get("max_rounds", 100),
                ce_population=self.ce.get("population", 100),
                ce_elite_fraction=self.ce.get("elite_fraction", 0.1),
                ce_smoothing=self.ce.get("smoothing", 0.3),
                ce_iterations=self.ce.get("iterations", 50),
            )
        except TypeError as exc:
            raise SweepError(f"bad solver settings: {exc}") from exc

    def instances(self) -> list[dict]:
        """Instance parameter dicts in canonical order, seeds varying fastest."""
        keys = list(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            for seed in self.seeds:
                out.append({**dict(zip(keys, combo)), "seed": seed})
        return out


def cell_seed(experiment_id: str, base_seed: int, seed: int) -> int:
    """Solver seed of every cell of one instance."""
    key = zlib.crc32(experiment_id.encode())
    return int(np.random.SeedSequence([base_seed, key, seed]).generate_state(1)[0])


def make_instance(domain: str, params: dict) -> CGBG:
    if domain == "random":
        return gen_random_cgbg(
            params["n_agents"], params["k"], params["n_actions"], params["n_types"], params["seed"]
        )
    ff = {k: v for k, v in params.items() if k != "seed"}
    return gen_firefighting(FirefightingParams(**ff, rng_seed=params["seed"]))


# -- worker side --------------------------------------------------------------


def _vm_size_bytes() -> int | None:
    try:
        with open("/proc/self/status") as fh:
            for line in fh:
                if line.startswith("VmSize:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    return None


def _limit_memory(limit_bytes: int) -> None:
    try:
        import resource
    except ImportError:
        return
    current = _vm_size_bytes()
    if current is None:
        return
    resource.setrlimit(resource.RLIMIT_AS, (current + limit_bytes, resource.RLIM_INFINITY))


@dataclass(frozen=True)
class CellJob:
    index: int
    domain: str
    params: dict
    solver: str
    options: SolverOptions
    time_limit_s: float
    memory_limit_bytes: int


def run_cell(job: CellJob) -> dict:
    """Run one cell in the current process and return its raw outcome."""
    game = make_instance(job.domain, job.params)
    try:
        res = solve(game, job.solver, job.options)
    except MemoryError as exc:
        return {"status": "memory", "detail": str(exc), "k": game.max_scope}
    out = {
        "status": "ok",
        "k": game.max_scope,
        "n_actions": max(game.action_sizes),
        "n_types": max(game.type_sizes),
        "value": res.value,
        "wall_time_ms": res.wall_time_ms,
        "iterations": res.iterations,
        "converged": res.converged,
        "induced_width": res.induced_width,
        "restarts": res.restarts,
        "policy": res.policy,
    }
    if res.wall_time_ms > 1000.0 * job.time_limit_s:
        out["status"] = "time"
    return out


def _cell_main(conn, job: CellJob) -> None:
    try:
        _limit_memory(job.memory_limit_bytes)
        out = run_cell(job)
    except MemoryError as exc:
        out = {"status": "memory", "detail": str(exc)}
    except BaseException:
        out = {"status": "error", "detail": traceback.format_exc()}
    try:
        conn.send(out)
    finally:
        conn.close()


def _context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


def _run_jobs(jobs: list[CellJob], workers: int, hard_limit_s: float) -> dict[int, dict]:
    ctx = _context()
    pending = list(jobs)
    running = {}
    results = {}
    while pending or running:
        while pending and len(running) < workers:
            job = pending.pop(0)
            recv, send = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_cell_main, args=(send, job), daemon=True)
            proc.start()
            send.close()
            running[job.index] = (proc, recv, time.monotonic())
        for idx, (proc, recv, started) in list(running.items()):
            elapsed = time.monotonic() - started
            if recv.poll():
                try:
                    results[idx] = recv.recv()
                except EOFError:
                    results[idx] = {"status": "memory", "detail": "worker died"}
            elif not proc.is_alive():
                results[idx] = {"status": "memory", "detail": f"worker exit code {proc.exitcode}"}
            elif elapsed > hard_limit_s:
                proc.kill()
                results[idx] = {"status": "time", "wall_time_ms": 1000.0 * elapsed}
            else:
                continue
            proc.join()
            recv.close()
            del running[idx]
        if running:
            time.sleep(0.002)
    return results


def _run_inline(jobs: list[CellJob]) -> dict[int, dict]:
    return {job.index: run_cell(job) for job in jobs}


def default_workers() -> int:
    workers = os.cpu_count() or 1
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


# -- sweep driver ---------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(spec: SweepSpec, params: dict, solver: str, out: dict, denom, timing: bool) -> dict:
    ok = out["status"] == "ok"
    value = out.get("value") if ok else None
    normalized = None
    if ok and denom is not None and denom != 0.0:
        normalized = 1.0 if solver == "maxsum-ati" else value / denom
    if spec.domain == "random":
        n_actions, n_types, k = params["n_actions"], params["n_types"], params["k"]
    else:
        n_actions = params["n_actionable"]
        n_types = 2 ** params["n_observed"]
        k = out.get("k")
    wall = out.get("wall_time_ms") if timing else None
    return {
        "experiment_id": spec.experiment_id,
        "domain": spec.domain,
        "n_agents": params["n_agents"],
        "n_actions": n_actions,
        "n_types": n_types,
        "k": k,
        "seed": params["seed"],
        "solver": solver,
        "value": value,
        "normalized_value": normalized,
        "wall_time_ms": None if wall is None else float(f"{wall:.3f}"),
        "iterations": out.get("iterations") if ok else None,
        "converged": out.get("converged") if ok else None,
        "induced_width": out.get("induced_width") if ok else None,
        "restarts": out.get("restarts") if ok else None,
        "exceeded": "" if ok else out["status"],
    }


def run_sweep(
    spec: SweepSpec,
    workers: int | None = None,
    timing: bool = True,
    isolate: bool = True,
) -> list[dict]:
    """Run every cell of ``spec`` and return BenchRow dicts in output order.

    ``isolate=False`` runs cells in-process: no hard kill and no address
    space cap, only the solvers' own capacity checks and the measured time.
    """
    workers = workers or default_workers()
    instances = spec.instances()
    others = [k for k in spec.grid if k != "n_agents"]
    blocked: set[tuple] = set()
    rows = []
    for n in sorted({p["n_agents"] for p in instances}):
        batch = [p for p in instances if p["n_agents"] == n]
        jobs = []
        plan = []
        for params in batch:
            seed = cell_seed(spec.experiment_id, spec.base_seed, params["seed"])
            opts = spec.solver_options(seed)
            solvers = list(spec.solvers)
            if "maxsum-ati" not in solvers:
                solvers.append("maxsum-ati")
            for solver in solvers:
                group = (solver, tuple(params[k] for k in others))
                job = None
                if group not in blocked:
                    job = CellJob(
                        index=len(jobs),
                        domain=spec.domain,
                        params=params,
                        solver=solver,
                        options=opts,
                        time_limit_s=spec.time_limit_s,
                        memory_limit_bytes=int(spec.memory_limit_mb * (1 << 20)),
                    )
                    jobs.append(job)
                plan.append((params, solver, job))
        hard = spec.time_limit_s + spec.build_time_limit_s
        results = _run_jobs(jobs, workers, hard) if isolate else _run_inline(jobs)
        errors = [r["detail"] for r in results.values() if r["status"] == "error"]
        if errors:
            raise RuntimeError(f"solver crashed in sweep {spec.experiment_id}:\n{errors[0]}")

        denoms = {}
        for params, solver, job in plan:
            if solver == "maxsum-ati" and job is not None:
                out = results[job.index]
                denoms[id(params)] = out["value"] if out["status"] == "ok" else None
        for params, solver, job in plan:
            if solver not in spec.solvers:
                continue
            out = results[job.index] if job is not None else {"status": "skipped"}
            if out["status"] in ("time", "memory") and spec.skip_after_exceeded:
                blocked.add((solver, tuple(params[k] for k in others)))
            rows.append(_row(spec, params, solver, out, denoms.get(id(params)), timing))
        log.info("n_agents=%d: %d cells done", n, len(jobs))
    return rows


def format_rows(rows: list[dict], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def write_rows(rows: list[dict], path: str | Path, append: bool = False) -> None:
    """Write rows as CSV; in append mode the header is written only once."""
    path = Path(path)
    header_line = ",".join(COLUMNS)
    if append and path.exists() and path.stat().st_size > 0:
        with path.open() as fh:
            first = fh.readline().rstrip("\n")
        if first != header_line:
            raise InvalidArgument(f"{path} has a different header; refusing to append")
        with path.open("a") as fh:
            fh.write(format_rows(rows, header=False))
    else:
        path.write_text(format_rows(rows))
