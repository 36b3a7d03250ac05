"""Command-line entry point: ``exactot {gen,solve,bench,certify}``.

Exit codes: 0 when the run produced a certified (exact methods) or converged
(Sinkhorn) result, 1 on a library error, 2 on a usage error, 3 when the run
finished without a certificate or hit its budget.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .bcdns import BlockConfig, certify_optimal
from .bench import (
    COMPARISON_SIZES,
    EXACT_METHODS,
    LARGE_EPOCHS,
    METHODS,
    RS_BLOCK_SIZE,
    default_grid_axes,
    run_comparison,
    run_exact,
    run_gap_vs_time,
    run_grid,
    run_large_scale,
    warmup,
)
from .core import DEFAULT_SCALE, check_feasibility, generate_samples, make_instance, objective
from .errors import ExactOTError, InvalidBasis
from .formats import load_instance, load_plan, save_instance, save_plan, save_report, write_outer_trace, write_sinkhorn_trace
from .simplex import PRICING_RULES, solve_full, state_from_basis
from .sinkhorn import STOP_RULES, SinkhornConfig, sinkhorn_solve

log = logging.getLogger("exactot")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INCOMPLETE = 0, 1, 2, 3


def parse_fraction_of_n(text: str, n: int) -> float:
    """Parse ``0.04``, ``2/n`` or ``20/n`` into a float."""
    text = text.strip()
    if text.endswith("/n"):
        return float(text[:-2]) / n
    return float(text)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def apply_thread_cap() -> None:
    """Honour ``OT_THREADS`` as an upper bound on numba worker threads."""
    raw = os.environ.get("OT_THREADS")
    if not raw:
        return
    import numba

    try:
        cap = int(raw)
    except ValueError:
        log.warning("ignoring non-integer OT_THREADS=%r", raw)
        return
    numba.set_num_threads(max(1, min(cap, numba.config.NUMBA_NUM_THREADS)))


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("instance")
    src.add_argument("--instance", type=Path, help="instance JSON file (overrides --problem/--n)")
    src.add_argument("--problem", default="uniform-normal", help="<source>-<target>, e.g. uniform-normal")
    src.add_argument("--n", type=int, default=50, help="points per side")
    src.add_argument("--dim", type=int, default=1, choices=(1, 2))
    src.add_argument("--seed", type=int, default=0)
    src.add_argument("--scale", type=int, default=DEFAULT_SCALE, help="integer cost scaling factor S")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exactot", description="Exact discrete optimal transport solvers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    _add_instance_args(gen)
    gen.add_argument("-o", "--output", type=Path, required=True)

    solve = sub.add_parser("solve", help="solve one instance")
    _add_instance_args(solve)
    solve.add_argument("--method", choices=METHODS, default="ns")
    solve.add_argument("--s", help="block fraction (number or k/n; default 2/n)")
    solve.add_argument("--t", help="screening fraction for gs-bcdns (number or k/n; required for gs-bcdns)")
    solve.add_argument("--block-size", type=int, help=f"rs-bcdns block size (default {RS_BLOCK_SIZE})")
    solve.add_argument("--pricing", choices=PRICING_RULES, default="most-negative")
    solve.add_argument("--max-outer", type=int, help="safety cap on outer iterations for block methods")
    solve.add_argument("--eps", type=float, default=1e-2, help="Sinkhorn accuracy parameter")
    solve.add_argument("--delta", type=float, default=1e-6, help="Sinkhorn stopping tolerance")
    solve.add_argument("--stop-rule", choices=STOP_RULES, default="objective")
    solve.add_argument("--max-time", type=float, default=2000.0, help="Sinkhorn wall-clock budget (s)")
    solve.add_argument("--trace-stride", type=int, default=1)
    solve.add_argument("--report", type=Path, help="write the JSON report here")
    solve.add_argument("--plan", type=Path, help="write the sparse plan here")
    solve.add_argument("--trace", type=Path, help="write the per-iteration trace CSV here")
    solve.add_argument("--no-warmup", action="store_true", help="skip kernel warmup before timing")

    bench = sub.add_parser("bench", help="run an experiment")
    bsub = bench.add_subparsers(dest="experiment", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", default="uniform-normal")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", type=Path, default=Path("results"))
    common.add_argument("--no-warmup", action="store_true", help="skip kernel warmup before timing")

    grid = bsub.add_parser("grid", parents=[common], help="(s, t) grid study")
    grid.add_argument("--n", type=int, default=250)
    grid.add_argument("--s-list", help="comma list of s values (numbers or k/n)")
    grid.add_argument("--t-list", help="comma list of t values (numbers or k/n)")

    cmp_ = bsub.add_parser("compare", parents=[common], help="NS vs RS-BCDNS vs GS-BCDNS")
    cmp_.add_argument("--n-list", type=_int_list, default=list(COMPARISON_SIZES))
    cmp_.add_argument("--methods", default=",".join(EXACT_METHODS))

    gap = bsub.add_parser("gap", parents=[common], help="gap versus time against Sinkhorn")
    gap.add_argument("--n", type=int, default=200)
    gap.add_argument("--dim", type=int, default=1, choices=(1, 2))
    gap.add_argument("--eps", type=_float_list, default=[1e-1, 1e-3])
    gap.add_argument("--delta", type=float, default=1e-6)
    gap.add_argument("--stop-rule", choices=STOP_RULES, default="objective")
    gap.add_argument("--max-time", type=float, default=2000.0)
    gap.add_argument("--trace-stride", type=int, default=1000,
                     help="sweeps between trace points; the objective stop rule compares successive points")

    large = bsub.add_parser("large", parents=[common], help="large 1D run with barycentric snapshots")
    large.set_defaults(problem="uniform-beta")
    large.add_argument("--n", type=int, default=4000)
    large.add_argument("--epochs", type=_int_list, default=list(LARGE_EPOCHS))

    cert = sub.add_parser("certify", help="check a plan file for feasibility and optimality")
    _add_instance_args(cert)
    cert.add_argument("--plan", type=Path, required=True)
    return parser


def _load(args) -> tuple:
    if args.instance is not None:
        inst = load_instance(args.instance)
        return inst, {"instance": str(args.instance)}
    samples = generate_samples(args.problem, args.n, args.seed, dim=args.dim)
    return make_instance(samples, scale=args.scale), {
        "problem": args.problem, "n": args.n, "dim": args.dim, "seed": args.seed, "scale": args.scale}


def cmd_gen(args) -> int:
    inst, _ = _load(args)
    save_instance(inst, args.output)
    print(f"wrote {args.output} ({inst.n}x{inst.m}, dim={args.dim}, seed={args.seed})")
    return EXIT_OK


def _block_config(args, parser, n: int) -> BlockConfig:
    try:
        s = parse_fraction_of_n(args.s, n) if args.s is not None else 2.0 / n
        t = parse_fraction_of_n(args.t, n) if args.t is not None else None
    except ValueError as exc:
        parser.error(f"bad --s/--t value: {exc}")
    if args.method == "gs-bcdns":
        if t is None:
            parser.error("--method gs-bcdns requires --t (for example --t 20/n)")
        if not s < t:
            parser.error(f"gs-bcdns needs s < t, got s={s:g}, t={t:g}")
        return BlockConfig(s=s, t=t, seed=args.seed, pricing=args.pricing, max_outer=args.max_outer)
    return BlockConfig(s=s, block_size=args.block_size or RS_BLOCK_SIZE, seed=args.seed,
                       pricing=args.pricing, max_outer=args.max_outer)


def cmd_solve(args, parser) -> int:
    inst, source = _load(args)
    if not args.no_warmup:
        warmup()
    config = {"command": "solve", "method": args.method, **source}
    if args.method == "sinkhorn":
        cfg = SinkhornConfig(args.eps, delta=args.delta, max_time=args.max_time,
                             trace_stride=args.trace_stride, stop_rule=args.stop_rule)
        config["sinkhorn"] = asdict(cfg)
        res = sinkhorn_solve(inst, cfg)
        obj = objective(res.plan, inst)
        report = {"config": config, "objective_scaled": obj.scaled, "objective_denominator": obj.denominator,
                  "objective": float(obj), "iterations": res.iterations, "gamma": res.gamma,
                  "converged": res.converged, "truncated": res.truncated, "wall_time": res.wall_time,
                  "feasible": check_feasibility(res.plan, inst).feasible}
        if args.trace:
            write_sinkhorn_trace(res, args.trace, config)
        plan, ok = res.plan, res.converged
        print(f"sinkhorn eps={args.eps:g}: objective={report['objective']:.9g} iterations={res.iterations} "
              f"converged={res.converged} time={res.wall_time:.3f}s")
    else:
        block = None
        if args.method != "ns":
            block = _block_config(args, parser, inst.n)
            config["block"] = block.to_dict()
        else:
            config["pricing"] = args.pricing
        run = run_exact(inst, args.method, block, pricing=args.pricing)
        cert = run.certificate
        report = {"config": config, "objective_scaled": run.objective.scaled,
                  "objective_denominator": run.objective.denominator,
                  "objective": float(run.objective), "pivots": run.pivots,
                  "evaluations": run.evaluations, "wall_time": run.runtime_s,
                  "certificate": {"min_reduced_cost": cert.min_reduced_cost, "arc": cert.arc,
                                  "optimal": cert.optimal}}
        if run.outer is not None:
            report["outer_iterations"] = run.outer.outer_iterations
            report["full_scans"] = run.outer.full_scans
            report["monotone_violations"] = run.outer.monotone_violations()
            if args.trace:
                write_outer_trace(run.outer, args.trace, config)
        plan, ok = run.plan, cert.optimal
        print(f"{args.method}: objective={report['objective']:.9g} scaled={run.objective.scaled} "
              f"pivots={run.pivots} evals={run.evaluations} time={run.runtime_s:.3f}s "
              f"certified={cert.optimal}")
    if args.report:
        save_report(report, args.report)
    if args.plan and plan is not None:
        save_plan(plan, args.plan, config)
    return EXIT_OK if ok else EXIT_INCOMPLETE


def cmd_bench(args) -> int:
    if not args.no_warmup:
        warmup()
    out = args.out_dir
    if args.experiment == "grid":
        n = args.n
        s_list, t_list = default_grid_axes(n)
        if args.s_list:
            s_list = [parse_fraction_of_n(x, n) for x in args.s_list.split(",")]
        if args.t_list:
            t_list = [parse_fraction_of_n(x, n) for x in args.t_list.split(",")]
        res = run_grid(args.problem, n, s_list, t_list, seed=args.seed, out_dir=out,
                       on_cell=lambda c: print(f"s={c.s:.5g} t={c.t:.5g} evals={c.evaluations} "
                                               f"pivots={c.pivots} time={c.runtime_s:.3f}s optimal={c.optimal}"))
        print(f"wrote {out / f'grid_results_{n}.csv'}")
        return EXIT_OK if all(c.optimal for c in res.cells) else EXIT_INCOMPLETE
    if args.experiment == "compare":
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        rows = run_comparison(args.problem, args.n_list, methods, seed=args.seed, out_dir=out,
                              on_row=lambda r: print(f"n={r.n} {r.method}: time={r.runtime_s:.3f}s "
                                                     f"evals={r.evals} objective={r.objective} "
                                                     f"speedup={r.speedup_vs_ns:.2f}x"))
        print(f"wrote {out / f'comparison_{args.problem}.csv'}; exact objectives agree")
        return EXIT_OK if all(r.certified for r in rows) else EXIT_INCOMPLETE
    if args.experiment == "gap":
        base = SinkhornConfig(args.eps[0], delta=args.delta, max_time=args.max_time,
                              trace_stride=args.trace_stride, stop_rule=args.stop_rule)
        res = run_gap_vs_time(args.problem, args.n, args.eps, seed=args.seed, dim=args.dim,
                              sinkhorn=base, out_dir=out)
        for tr in res.traces:
            print(f"{tr.method} eps={tr.label}: final gap={float(tr.final_gap):.6g} points={len(tr.points)} "
                  f"converged={tr.converged}")
        return EXIT_OK if res.trace("gs-bcdns").final_gap == 0 else EXIT_INCOMPLETE
    if args.experiment == "large":
        rep = run_large_scale(args.n, args.problem, seed=args.seed, epochs=args.epochs, out_dir=out)
        print(f"n={rep.n}: epochs={rep.outer.outer_iterations} certified={rep.certified} "
              f"objective={rep.objective:.9g} oracle={rep.oracle:.9g} |diff|={rep.abs_diff:.3g} "
              f"tol={rep.tolerance:.3g} time={rep.outer.wall_time:.1f}s")
        return EXIT_OK if rep.certified and rep.within_tolerance else EXIT_INCOMPLETE
    raise AssertionError(args.experiment)


def cmd_certify(args) -> int:
    inst, _ = _load(args)
    plan = load_plan(args.plan)
    verdict = check_feasibility(plan, inst)
    if not verdict.feasible:
        print(f"infeasible: worst violation {verdict.max_violation} at {verdict.worst}, "
              f"{verdict.negative_entries} negative entries")
        return EXIT_INCOMPLETE
    obj = objective(plan, inst)
    arcs = [(int(i), int(j)) for i, j in zip(plan.rows, plan.cols)]
    try:
        state = state_from_basis(inst, arcs)
    except InvalidBasis:
        state = None
    if state is not None and state.objective().value == obj.value:
        cert = certify_optimal(state)
        print(f"feasible; basis certificate min reduced cost={cert.min_reduced_cost} optimal={cert.optimal}")
        return EXIT_OK if cert.optimal else EXIT_INCOMPLETE
    best = solve_full(inst)[1].objective
    gap = obj.value - best.value
    print(f"feasible; objective={float(obj):.9g} optimum={float(best):.9g} "
          f"gap={float(gap):.3g} optimal={gap == 0}")
    return EXIT_OK if gap == 0 else EXIT_INCOMPLETE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    apply_thread_cap()
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args, parser)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_certify(args)
    except ExactOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
