"""Log-domain Sinkhorn baseline with exact feasibility rounding.

Iterates are kept as log-scalings ``log_u``, ``log_v``; the Gibbs kernel is
never formed.  Every traced iterate is rounded onto the transport polytope and
then snapped onto an integer mass grid so that its cost can be compared with
the exact optimum in integer arithmetic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import Objective, OTInstance, TransportPlan, _integer_marginals, check_feasibility, objective
from .errors import InvalidConfig, InvalidInput
from .simplex import northwest_corner_arcs

STOP_RULES = ("objective", "scaling")
GRID_REFINEMENT = 2**20


def gamma_from_eps(epsilon: float, n: int) -> float:
    """Regularization ``epsilon / (4 ln n)``."""
    if n < 2:
        raise InvalidConfig("gamma_from_eps needs n >= 2")
    if not epsilon > 0:
        raise InvalidConfig("epsilon must be positive")
    return epsilon / (4.0 * math.log(n))


@dataclass
class SinkhornConfig:
    epsilon: float
    gamma: float | None = None
    delta: float = 1e-6
    max_time: float = 2000.0
    trace_stride: int = 1
    stop_rule: str = "objective"
    max_iter: int | None = None

    def resolved_gamma(self, n: int) -> float:
        g = gamma_from_eps(self.epsilon, n) if self.gamma is None else self.gamma
        if not g > 0:
            raise InvalidConfig("gamma must be positive")
        return g

    def validate(self) -> None:
        if not self.epsilon > 0 or not self.delta > 0:
            raise InvalidConfig("epsilon and delta must be positive")
        if self.stop_rule not in STOP_RULES:
            raise InvalidConfig(f"stop_rule must be one of {STOP_RULES}")
        if self.trace_stride < 1:
            raise InvalidConfig("trace_stride must be >= 1")


@dataclass
class ScalingState:
    log_u: np.ndarray
    log_v: np.ndarray


@dataclass
class TracePoint:
    iteration: int
    time_s: float
    objective: Objective
    """Exact cost of the rounded iterate under the scaled integer costs."""
    du_max: float
    dv_max: float
    feasible: bool

    @property
    def objective_rounded(self) -> float:
        return float(self.objective)


@dataclass
class SinkhornResult:
    state: ScalingState
    gamma: float
    iterations: int
    converged: bool
    truncated: bool
    plan: TransportPlan
    """Best rounded plan seen at a trace point."""
    trace: list[TracePoint] = field(default_factory=list)
    wall_time: float = 0.0


def plan_from_scalings(state: ScalingState, inst: OTInstance, gamma: float) -> np.ndarray:
    """Dense ``diag(u) K diag(v)`` evaluated in log space."""
    return np.exp(state.log_u[:, None] - inst.cost / gamma + state.log_v[None, :])


def _round_float(x: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    r = x.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fr = np.where(r > p, p / r, 1.0)
    x = x * fr[:, None]
    c = x.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fc = np.where(c > q, q / c, 1.0)
    x = x * fc[None, :]
    err_r = np.maximum(p - x.sum(axis=1), 0.0)
    err_c = np.maximum(q - x.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        x = x + np.outer(err_r, err_c) / total
    return x


def _snap_to_grid(x: np.ndarray, supply: np.ndarray, demand: np.ndarray, grid: int) -> np.ndarray:
    """Integer matrix with row sums ``supply * grid`` and column sums ``demand * grid``."""
    target_r = supply.astype(np.int64) * grid
    target_c = demand.astype(np.int64) * grid
    total = float(target_r.sum())
    units = np.floor(x / x.sum() * total).astype(np.int64)
    for axis, target in ((1, target_r), (0, target_c)):
        sums = units.sum(axis=axis)
        over = sums > target
        if over.any():
            f = np.where(over, target / np.maximum(sums, 1), 1.0)
            units = np.floor(units * (f[:, None] if axis == 1 else f[None, :])).astype(np.int64)
    dr = target_r - units.sum(axis=1)
    dc = target_c - units.sum(axis=0)
    for i, j, amount in northwest_corner_arcs(dr, dc):
        units[i, j] += amount
    return units


def round_to_feasible(plan: np.ndarray, p, q, refinement: int = GRID_REFINEMENT) -> TransportPlan:
    """Round a positive matrix onto the transport polytope of ``(p, q)``.

    Rows are scaled down to at most ``p``, then columns to at most ``q``, then
    the rank-one correction ``err_p err_q^T / |err_p|_1`` is added.  The result
    is snapped onto masses that are multiples of ``1 / (denominator * refinement)``
    with a northwest-corner repair of the integer residuals, so marginals hold
    exactly.
    """
    x = np.asarray(plan, dtype=np.float64)
    if x.ndim != 2 or x.shape != (len(p), len(q)):
        raise InvalidInput("plan shape does not match the marginals")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise InvalidInput("plan must be finite and nonnegative")
    if not x.sum() > 0:
        raise InvalidInput("plan carries zero total mass")
    supply, demand, den = _integer_marginals(p, q)
    return _round_units(x, supply, demand, den, refinement)


def _round_units(x, supply, demand, den, refinement=GRID_REFINEMENT) -> TransportPlan:
    rounded = _round_float(x, supply / den, demand / den)
    units = _snap_to_grid(rounded, supply, demand, refinement)
    return TransportPlan.from_dense_units(units, den * refinement)


def sinkhorn_solve(inst: OTInstance, config: SinkhornConfig) -> SinkhornResult:
    """Alternate row and column log-domain updates until the configured stop rule fires.

    With ``stop_rule="objective"`` the run stops once two consecutive trace
    points differ in rounded objective by less than ``delta``; with
    ``"scaling"`` it stops once both log-scaling vectors move less than
    ``delta`` in max norm.  Hitting ``max_time`` or ``max_iter`` sets
    ``truncated`` and returns the best rounded plan seen so far.
    """
    config.validate()
    if np.any(inst.supply <= 0) or np.any(inst.demand <= 0):
        raise InvalidInput("Sinkhorn needs strictly positive marginals")
    gamma = config.resolved_gamma(inst.n)
    log_p = np.log(inst.p_float())
    log_q = np.log(inst.q_float())
    neg_cost = np.ascontiguousarray(-inst.cost / gamma)
    log_u = np.zeros(inst.n)
    log_v = np.zeros(inst.m)
    trace: list[TracePoint] = []
    best_plan, best_obj = None, None
    prev_obj = None
    converged = truncated = False
    t0 = time.perf_counter()
    it = 0
    while True:
        it += 1
        du = K.log_sweep(neg_cost, log_p, log_v, log_u, False)
        dv = K.log_sweep(neg_cost, log_q, log_u, log_v, True)
        stop_scaling = du < config.delta and dv < config.delta
        elapsed = time.perf_counter() - t0
        out_of_budget = elapsed > config.max_time or (config.max_iter is not None and it >= config.max_iter)
        if it % config.trace_stride == 0 or stop_scaling or out_of_budget:
            state = ScalingState(log_u, log_v)
            plan = _round_units(plan_from_scalings(state, inst, gamma), inst.supply, inst.demand,
                                inst.denominator)
            obj = objective(plan, inst)
            feasible = check_feasibility(plan, inst).feasible
            trace.append(TracePoint(it, time.perf_counter() - t0, obj, du, dv, feasible))
            if best_obj is None or obj.value < best_obj.value:
                best_plan, best_obj = plan, obj
            if (config.stop_rule == "objective" and prev_obj is not None
                    and abs(float(obj) - float(prev_obj)) < config.delta):
                converged = True
            prev_obj = obj
        if config.stop_rule == "scaling" and stop_scaling:
            converged = True
        if converged:
            break
        if out_of_budget:
            truncated = True
            break
    return SinkhornResult(ScalingState(log_u.copy(), log_v.copy()), gamma, it, converged, truncated,
                          best_plan, trace, time.perf_counter() - t0)
