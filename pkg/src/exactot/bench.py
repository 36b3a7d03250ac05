"""Experiment drivers: (s, t) grid study, method comparison, gap traces and the large 1D run.

Each driver builds its instances from ``(problem, n, seed)`` so results are
reproducible, optionally writes CSVs with an embedded config line, and returns
plain dataclasses for programmatic use.  Timing uses ``time.perf_counter``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .bcdns import BlockConfig, Certificate, OuterReport, certify_optimal, gs_bcdns, rs_bcdns
from .core import Objective, OTInstance, SamplePair, TransportPlan, generate_samples, make_instance
from .errors import ExactnessViolation, InvalidConfig, InvalidInput
from .formats import write_csv
from .oracles import oracle_1d_monotone
from .simplex import solve_full
from .sinkhorn import SinkhornConfig, sinkhorn_solve

EXACT_METHODS = ("ns", "rs-bcdns", "gs-bcdns")
METHODS = EXACT_METHODS + ("sinkhorn",)
RS_BLOCK_SIZE = 256
COMPARISON_SIZES = (50, 100, 150, 200, 250, 300, 350, 400)
SINKHORN_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)
LARGE_EPOCHS = (10, 20, 50, 100)


def default_s_t(n: int) -> tuple[float, float]:
    """``(2/n, 20/n)``, capped so tiny instances still get a valid ``s < t <= 1``."""
    t = min(20.0 / n, 1.0)
    return min(2.0 / n, t / 2), t


def default_grid_axes(n: int) -> tuple[list[float], list[float]]:
    """Log-spaced axes spanning the ``2/n .. 3/n`` and ``20/n .. 30/n`` sweet spot."""
    s_list = [1 / n, 2 / n, 3 / n, 10 / n, 0.1, 0.5]
    t_list = [10 / n, 20 / n, 30 / n, 100 / n, 0.5, 0.9]
    return s_list, t_list


def warmup() -> None:
    """Load or compile every numba kernel so later timings exclude JIT cost."""
    samples = generate_samples("uniform-normal", 8, 0)
    inst = make_instance(samples)
    solve_full(inst)
    solve_full(inst, pricing="bland")
    rs_bcdns(inst, BlockConfig(s=0.1, block_size=4))
    gs_bcdns(inst, BlockConfig(s=0.05, t=0.3))
    sinkhorn_solve(inst, SinkhornConfig(0.1, max_iter=2))


@dataclass
class RunResult:
    """Outcome of one exact solve, whatever the method."""

    method: str
    objective: Objective
    runtime_s: float
    evaluations: int
    pivots: int
    certificate: Certificate
    plan: TransportPlan
    outer: OuterReport | None = None

    @property
    def certified(self) -> bool:
        return self.certificate.optimal


def block_config(method: str, n: int, s: float | None = None, t: float | None = None,
                 seed: int = 0, **extra) -> BlockConfig:
    ds, dt = default_s_t(n)
    s = ds if s is None else s
    if method == "rs-bcdns":
        extra.setdefault("block_size", RS_BLOCK_SIZE)
        return BlockConfig(s=s, t=t, seed=seed, **extra)
    return BlockConfig(s=s, t=dt if t is None else t, seed=seed, **extra)


def run_exact(inst: OTInstance, method: str, config: BlockConfig | None = None,
              pricing: str = "most-negative", on_iteration=None) -> RunResult:
    """Solve ``inst`` exactly with ``ns``, ``rs-bcdns`` or ``gs-bcdns``."""
    if method == "ns":
        state, rep = solve_full(inst, pricing=pricing)
        cert = certify_optimal(state)
        return RunResult(method, rep.objective, rep.wall_time, rep.evaluations, rep.pivots, cert,
                         state.plan())
    if method not in EXACT_METHODS:
        raise InvalidConfig(f"unknown exact method {method!r}; expected one of {EXACT_METHODS}")
    config = config or block_config(method, inst.n)
    solver = rs_bcdns if method == "rs-bcdns" else gs_bcdns
    state, rep = solver(inst, config, on_iteration=on_iteration)
    return RunResult(method, rep.objective, rep.wall_time, rep.evaluations, rep.pivots,
                     rep.certificate, state.plan(), rep)


def _instance(problem: str, n: int, seed: int, dim: int = 1, scale: int | None = None) -> OTInstance:
    samples = generate_samples(problem, n, seed, dim=dim)
    return make_instance(samples) if scale is None else make_instance(samples, scale=scale)


# --------------------------------------------------------------------------- grid


@dataclass
class GridCell:
    s: float
    t: float
    evaluations: int
    pivots: int
    runtime_s: float
    objective_scaled: int
    outer_iterations: int
    optimal: bool


@dataclass
class GridResult:
    problem: str
    n: int
    seed: int
    s_values: list[float]
    t_values: list[float]
    cells: list[GridCell] = field(default_factory=list)

    def cell(self, s: float, t: float) -> GridCell | None:
        for c in self.cells:
            if c.s == s and c.t == t:
                return c
        return None

    def table(self, metric: str) -> list[list]:
        """Rows indexed by ``s``, columns by ``t``; ``None`` where ``s >= t``."""
        out = []
        for s in self.s_values:
            row = []
            for t in self.t_values:
                c = self.cell(s, t)
                row.append(None if c is None else getattr(c, metric))
            out.append(row)
        return out


GRID_HEADER = ["s", "t", "evaluations", "pivots", "runtime_s", "objective_scaled", "outer_iterations", "optimal"]


def run_grid(problem: str, n: int, s_list: Sequence[float], t_list: Sequence[float], seed: int = 0,
             out_dir=None, on_cell: Callable[[GridCell], None] | None = None) -> GridResult:
    """Run GS-BCDNS for every ``s < t`` pair on one shared instance."""
    inst = _instance(problem, n, seed)
    result = GridResult(problem, n, seed, list(s_list), list(t_list))
    for s in s_list:
        for t in t_list:
            if s >= t:
                continue
            run = run_exact(inst, "gs-bcdns", BlockConfig(s=s, t=t, seed=seed))
            cell = GridCell(s, t, run.evaluations, run.pivots, run.runtime_s,
                            run.objective.scaled, run.outer.outer_iterations, run.certified)
            result.cells.append(cell)
            if on_cell is not None:
                on_cell(cell)
    if out_dir is not None:
        config = {"experiment": "grid", "problem": problem, "n": n, "seed": seed,
                  "s_values": list(s_list), "t_values": list(t_list), "scale": inst.scale}
        write_csv(Path(out_dir) / f"grid_results_{n}.csv", GRID_HEADER,
                  [[getattr(c, h) for h in GRID_HEADER] for c in result.cells], config)
    return result


# --------------------------------------------------------------------------- comparison


@dataclass
class ComparisonRow:
    n: int
    method: str
    runtime_s: float
    evals: int
    pivots: int
    objective: int
    speedup_vs_ns: float | None
    certified: bool


COMPARISON_HEADER = ["n", "method", "runtime_s", "evals", "pivots", "objective", "speedup_vs_ns", "certified"]


def check_agreement(rows: Iterable[ComparisonRow]) -> None:
    """Raise ``ExactnessViolation`` unless exact methods agree per ``n``."""
    by_n: dict[int, dict[str, int]] = {}
    for row in rows:
        if row.method in EXACT_METHODS:
            by_n.setdefault(row.n, {})[row.method] = row.objective
    for n, objs in by_n.items():
        if len(set(objs.values())) > 1:
            raise ExactnessViolation(f"n={n}: exact methods disagree: {objs}")


def run_comparison(problem: str, n_list: Sequence[int] = COMPARISON_SIZES,
                   methods: Sequence[str] = EXACT_METHODS, seed: int = 0, s: float | None = None,
                   t: float | None = None, out_dir=None,
                   on_row: Callable[[ComparisonRow], None] | None = None) -> list[ComparisonRow]:
    """Run each method on the same instance per ``n`` and report speedups against NS.

    The instance for size ``n`` is drawn with ``seed``; NS always runs first
    so speedups are available even when it is not listed in ``methods``.
    """
    unknown = set(methods) - set(EXACT_METHODS)
    if unknown:
        raise InvalidConfig(f"comparison supports only exact methods, got {sorted(unknown)}")
    rows: list[ComparisonRow] = []
    for n in n_list:
        inst = _instance(problem, n, seed)
        ns = run_exact(inst, "ns")
        per_n = []
        for method in methods:
            run = ns if method == "ns" else run_exact(inst, method, block_config(method, n, s, t, seed))
            speedup = ns.runtime_s / run.runtime_s if run.runtime_s > 0 else None
            row = ComparisonRow(n, method, run.runtime_s, run.evaluations, run.pivots,
                                run.objective.scaled, 1.0 if method == "ns" else speedup, run.certified)
            if run.objective.scaled != ns.objective.scaled:
                raise ExactnessViolation(
                    f"n={n}: {method} objective {run.objective.scaled} != NS {ns.objective.scaled}")
            per_n.append(row)
            if on_row is not None:
                on_row(row)
        rows.extend(per_n)
    check_agreement(rows)
    if out_dir is not None:
        config = {"experiment": "compare", "problem": problem, "n_list": list(n_list),
                  "methods": list(methods), "seed": seed, "s": s, "t": t,
                  "rs_block_size": RS_BLOCK_SIZE}
        write_csv(Path(out_dir) / f"comparison_{problem}.csv", COMPARISON_HEADER,
                  [[getattr(r, h) for h in COMPARISON_HEADER] for r in rows], config)
    return rows


# --------------------------------------------------------------------------- gap vs time


@dataclass
class GapPoint:
    time_s: float
    iteration: int
    objective: Objective
    gap: Fraction


@dataclass
class GapTrace:
    method: str
    epsilon: float | None
    points: list[GapPoint]
    converged: bool = True
    truncated: bool = False

    @property
    def final_gap(self) -> Fraction:
        return self.points[-1].gap

    @property
    def label(self) -> str:
        return "exact" if self.epsilon is None else f"{self.epsilon:g}"


@dataclass
class GapResult:
    problem: str
    n: int
    dim: int
    seed: int
    optimum: Objective
    traces: list[GapTrace]

    def trace(self, method: str, epsilon: float | None = None) -> GapTrace:
        for tr in self.traces:
            if tr.method == method and tr.epsilon == epsilon:
                return tr
        raise KeyError((method, epsilon))


GAP_HEADER = ["time_s", "iteration", "objective", "gap", "gap_exact"]


def run_gap_vs_time(problem: str = "uniform-normal", n: int = 200, eps_list: Sequence[float] = (1e-1, 1e-3),
                    seed: int = 0, dim: int = 1, s: float | None = None, t: float | None = None,
                    sinkhorn: SinkhornConfig | None = None, out_dir=None) -> GapResult:
    """Gap ``f(x(t)) - f*`` traces for GS-BCDNS and Sinkhorn at each ``eps``.

    ``f*`` comes from the full network simplex.  Gaps are exact fractions
    measured with the scaled integer costs, so every value is ``>= 0``.
    ``sinkhorn`` supplies the budget and stop rule; its ``epsilon`` is
    replaced by each entry of ``eps_list``.
    """
    inst = _instance(problem, n, seed, dim=dim)
    optimum = run_exact(inst, "ns").objective
    f_star = optimum.value
    traces = []

    gs = run_exact(inst, "gs-bcdns", block_config("gs-bcdns", n, s, t, seed))
    rep = gs.outer
    den = optimum.denominator
    pts = [GapPoint(0.0, 0, Objective(rep.initial_objective_scaled, den),
                    Fraction(rep.initial_objective_scaled, den) - f_star)]
    for rec in rep.iterations:
        pts.append(GapPoint(rec.time_s, rec.k + 1, Objective(rec.objective_scaled, den),
                            Fraction(rec.objective_scaled, den) - f_star))
    traces.append(GapTrace("gs-bcdns", None, pts))

    base = sinkhorn or SinkhornConfig(epsilon=eps_list[0] if eps_list else 0.1)
    for eps in eps_list:
        cfg = SinkhornConfig(**{**asdict(base), "epsilon": eps, "gamma": None})
        res = sinkhorn_solve(inst, cfg)
        pts = [GapPoint(tp.time_s, tp.iteration, tp.objective, tp.objective.value - f_star)
               for tp in res.trace]
        traces.append(GapTrace("sinkhorn", eps, pts, res.converged, res.truncated))

    result = GapResult(problem, n, dim, seed, optimum, traces)
    if out_dir is not None:
        for tr in traces:
            config = {"experiment": "gap", "problem": problem, "n": n, "dim": dim, "seed": seed,
                      "method": tr.method, "epsilon": tr.epsilon, "optimum_scaled": optimum.scaled,
                      "optimum_denominator": den, "converged": tr.converged, "truncated": tr.truncated}
            if tr.method == "sinkhorn":
                config["sinkhorn"] = {**asdict(base), "epsilon": tr.epsilon, "gamma": None}
            else:
                config["block"] = rep.config
            rows = [(p.time_s, p.iteration, float(p.objective), float(p.gap), str(p.gap)) for p in tr.points]
            write_csv(Path(out_dir) / f"gap_trace_{tr.method}_{tr.label}.csv", GAP_HEADER, rows, config)
    return result


# --------------------------------------------------------------------------- large scale


def barycentric_projection(plan, samples: SamplePair | np.ndarray, p) -> np.ndarray:
    """``T(u_i) = (1/p_i) sum_j v_j x_ij`` for every source point.

    ``plan`` may be a :class:`TransportPlan` or a dense array; ``samples`` is
    the pair (its targets are used) or the target array itself.  Returns an
    ``(n, dim)`` array, or length ``n`` for 1D targets given as a flat array.
    """
    v = samples.v if isinstance(samples, SamplePair) else np.asarray(samples, dtype=np.float64)
    p = np.array([float(x) for x in p], dtype=np.float64)
    if np.any(p <= 0):
        raise InvalidInput("barycentric projection needs p_i > 0 for every source")
    if isinstance(plan, TransportPlan):
        flat = v.ndim == 1
        vv = v[:, None] if flat else v
        out = np.zeros((plan.n, vv.shape[1]))
        np.add.at(out, plan.rows, vv[plan.cols] * (plan.mass / plan.denominator)[:, None])
        out = out[:, 0] if flat else out
    else:
        out = np.asarray(plan, dtype=np.float64) @ v
    return out / (p if out.ndim == 1 else p[:, None])


@dataclass
class LargeScaleReport:
    n: int
    problem: str
    seed: int
    outer: OuterReport
    objective: float
    oracle: float
    tolerance: float
    snapshots: dict[int | str, np.ndarray]

    @property
    def certified(self) -> bool:
        return self.outer.certificate is not None and self.outer.certificate.optimal

    @property
    def abs_diff(self) -> float:
        return abs(self.objective - self.oracle)

    @property
    def within_tolerance(self) -> bool:
        return self.abs_diff <= self.tolerance


def run_large_scale(n: int = 4000, problem: str = "uniform-beta", seed: int = 0,
                    epochs: Sequence[int] = LARGE_EPOCHS, s: float | None = None, t: float | None = None,
                    out_dir=None, on_iteration=None) -> LargeScaleReport:
    """GS-BCDNS on a large 1D instance with barycentric snapshots at ``epochs``."""
    samples = generate_samples(problem, n, seed)
    inst = make_instance(samples)
    p = inst.p_float()
    snapshots: dict[int | str, np.ndarray] = {}
    wanted = set(epochs)

    def hook(k, state):
        if k in wanted:
            snapshots[k] = barycentric_projection(state.plan(), samples, p)
        if on_iteration is not None:
            on_iteration(k, state)

    config = block_config("gs-bcdns", n, s, t, seed)
    state, rep = gs_bcdns(inst, config, on_iteration=hook)
    snapshots["final"] = barycentric_projection(state.plan(), samples, p)
    report = LargeScaleReport(n, problem, seed, rep, float(rep.objective),
                              oracle_1d_monotone(samples), n * n / inst.scale, snapshots)
    if out_dir is not None:
        order = np.argsort(samples.u[:, 0], kind="stable")
        base = {"experiment": "large", "problem": problem, "n": n, "seed": seed,
                "block": rep.config, "outer_iterations": rep.outer_iterations,
                "certified": report.certified, "objective": report.objective, "oracle": report.oracle}
        for key, proj in snapshots.items():
            rows = [(int(i), float(samples.u[i, 0]), float(proj[i, 0])) for i in order]
            write_csv(Path(out_dir) / f"barycentric_{n}_{key}.csv", ["i", "u", "T"], rows,
                      {**base, "epoch": key})
    return report
