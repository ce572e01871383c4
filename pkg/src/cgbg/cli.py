"""``cgbg`` command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 unreadable
or malformed input file, 4 unknown solver, 5 time or memory limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict

from .bench import SweepError, SweepSpec, default_workers, format_rows, run_sweep, write_rows
from .domains import FirefightingParams, gen_firefighting, gen_random_cgbg
from .errors import CapacityError, InvalidArgument
from .gamefile import GameFileError, load_game, save_game
from .game import evaluate_policy
from .maxsum import MaxSumConfig
from .solve import EXACT_SOLVERS, SOLVERS, SolverOptions, solve

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_BAD_FILE = 3
EXIT_UNKNOWN_SOLVER = 4
EXIT_LIMIT = 5

REL_TOL = 1e-9
ABS_TOL = 1e-12


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, allow_nan=False)


def _agree(value: float, optimum: float) -> bool:
    return math.isclose(value, optimum, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def _gap(value: float, optimum: float) -> float:
    return (optimum - value) / abs(optimum) if optimum != 0.0 else optimum - value


def _solver_options(args) -> SolverOptions:
    ms = MaxSumConfig(
        max_iterations=args.max_iterations,
        damping=args.damping,
        schedule=args.schedule,
        convergence_tolerance=args.tolerance,
        restarts=args.restarts,
        rng_seed=args.seed,
    )
    return SolverOptions(
        seed=args.seed,
        memory_cap=int(args.memory_limit_mb * (1 << 20)),
        maxsum=ms,
        heuristic=args.heuristic,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--schedule", default="parallel", choices=("parallel", "sequential-random"))
    p.add_argument("--heuristic", default="min-fill", choices=("min-fill", "min-neighbors"))
    p.add_argument("--memory-limit-mb", type=float, default=1024.0)
    p.add_argument("--allow-disconnected", action="store_true", help="accept games whose interaction graph is disconnected")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgbg", description="Solve cooperative graphical Bayesian games.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a seeded game file")
    gsub = gen.add_subparsers(dest="domain", required=True, parser_class=_Parser)
    rnd = gsub.add_parser("random")
    rnd.add_argument("--n-agents", type=int, required=True)
    rnd.add_argument("--k", type=int, default=2)
    rnd.add_argument("--n-actions", type=int, default=2)
    rnd.add_argument("--n-types", type=int, default=2)
    rnd.add_argument("--seed", type=int, default=0)
    rnd.add_argument("-o", "--output", required=True)
    ff = gsub.add_parser("firefighting")
    ff.add_argument("--n-agents", type=int, required=True)
    ff.add_argument("--n-houses", type=int, required=True)
    ff.add_argument("--n-observed", type=int, default=1)
    ff.add_argument("--n-actionable", type=int, default=2)
    ff.add_argument("--p-fire", type=float, default=0.5)
    ff.add_argument("--obs-noise", type=float, default=0.2)
    ff.add_argument("--attenuation", type=float, default=0.4)
    ff.add_argument("--layout", default="line", choices=("line", "uniform-square"))
    ff.add_argument("--seed", type=int, default=0)
    ff.add_argument("-o", "--output", required=True)

    sol = sub.add_parser("solve", help="solve a game file and print a JSON summary")
    sol.add_argument("game")
    sol.add_argument("--solver", required=True)
    sol.add_argument("--timing", action="store_true", help="include wall-clock timings in the output")
    sol.add_argument("--time-limit-s", type=float, default=None)
    _add_solver_flags(sol)

    ver = sub.add_parser("verify", help="compare every solver against brute force")
    ver.add_argument("game")
    _add_solver_flags(ver)

    ben = sub.add_parser("bench", help="run a parameter sweep and write CSV")
    ben.add_argument("sweep")
    ben.add_argument("-o", "--output", default="-", help="CSV path, '-' for standard output")
    ben.add_argument("--append", action="store_true")
    ben.add_argument("--workers", type=int, default=None)
    ben.add_argument("--no-timing", action="store_true", help="leave wall_time_ms empty")
    ben.add_argument("--in-process", action="store_true", help="run cells without worker processes")
    return parser


def _cmd_generate(args) -> int:
    if args.domain == "random":
        game = gen_random_cgbg(args.n_agents, args.k, args.n_actions, args.n_types, args.seed)
        meta = {
            "domain": "random",
            "n_agents": args.n_agents,
            "k": args.k,
            "n_actions": args.n_actions,
            "n_types": args.n_types,
            "seed": args.seed,
        }
    else:
        params = FirefightingParams(
            n_agents=args.n_agents,
            n_houses=args.n_houses,
            n_observed=args.n_observed,
            n_actionable=args.n_actionable,
            p_fire=args.p_fire,
            obs_noise=args.obs_noise,
            attenuation=args.attenuation,
            layout=args.layout,
            rng_seed=args.seed,
        )
        game = gen_firefighting(params)
        meta = {"domain": "firefighting", **asdict(params)}
    save_game(game, args.output, meta)
    return EXIT_OK


def _cmd_solve(args) -> int:
    if args.solver not in SOLVERS:
        print(f"unknown solver {args.solver!r}; choose from {', '.join(SOLVERS)}", file=sys.stderr)
        return EXIT_UNKNOWN_SOLVER
    game = load_game(args.game, require_connected=not args.allow_disconnected)
    try:
        res = solve(game, args.solver, _solver_options(args))
    except (CapacityError, MemoryError) as exc:
        print(_dump({"solver": args.solver, "exceeded": "memory", "detail": str(exc)}))
        return EXIT_LIMIT
    doc = {
        "solver": res.solver,
        "policy": [list(p) for p in res.policy],
        "value": res.value,
        "iterations": res.iterations,
        "converged": res.converged,
        "induced_width": res.induced_width,
        "restarts": res.restarts,
    }
    if args.timing:
        doc["build_ms"] = res.build_ms
        doc["wall_time_ms"] = res.wall_time_ms
    code = EXIT_OK
    if args.time_limit_s is not None and res.wall_time_ms > 1000.0 * args.time_limit_s:
        doc["exceeded"] = "time"
        code = EXIT_LIMIT
    print(_dump(doc))
    return code


def _cmd_verify(args) -> int:
    game = load_game(args.game, require_connected=not args.allow_disconnected)
    opts = _solver_options(args)
    try:
        oracle = solve(game, "brute", opts)
    except CapacityError as exc:
        print(f"brute force not possible: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    report = {"optimum": oracle.value, "policy": [list(p) for p in oracle.policy], "solvers": {}}
    failed = []
    for solver in SOLVERS:
        if solver == "brute":
            continue
        try:
            res = solve(game, solver, opts)
        except (CapacityError, MemoryError) as exc:
            report["solvers"][solver] = {"exceeded": "memory", "detail": str(exc)}
            continue
        assert res.value == evaluate_policy(game, res.policy)
        ok = _agree(res.value, oracle.value)
        report["solvers"][solver] = {"value": res.value, "gap": 0.0 if ok else _gap(res.value, oracle.value)}
        if solver in EXACT_SOLVERS and not ok:
            failed.append(solver)
    report["failed"] = failed
    print(_dump(report))
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def _cmd_bench(args) -> int:
    try:
        with open(args.sweep) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise GameFileError(f"cannot read {args.sweep}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GameFileError(f"{args.sweep} is not valid JSON: {exc}") from exc
    try:
        spec = SweepSpec.from_dict(doc)
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_SOLVER if str(exc).startswith("unknown solver") else EXIT_BAD_FILE
    workers = args.workers or default_workers()
    rows = run_sweep(spec, workers=workers, timing=not args.no_timing, isolate=not args.in_process)
    if args.output == "-":
        sys.stdout.write(format_rows(rows))
    else:
        write_rows(rows, args.output, append=args.append)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    handler = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "verify": _cmd_verify,
        "bench": _cmd_bench,
    }[args.command]
    try:
        return handler(args)
    except GameFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_FILE
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
