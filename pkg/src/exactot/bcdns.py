"""Block-coordinate network simplex: random (RS) and grouped (GS) block selection.

Both variants keep the current basis inside every working set, so each
restricted solve warm-starts from the previous basic solution and the outer
objective never increases.  Every solved block contains at least one arc with
negative reduced cost.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .core import Objective, OTInstance, TransportPlan
from .errors import InvalidConfig, NeedFullScan
from .rng import substream
from .simplex import (
    DEFAULT_DEGENERATE_STREAK,
    SimplexState,
    northwest_corner,
    solve_restricted,
)


def ceil_count(x: float) -> int:
    """``ceil`` that ignores float noise, so ``ceil(0.1 * 0.2 * 100)`` is 2, not 3."""
    return math.ceil(round(x, 9))


@dataclass
class BlockConfig:
    s: float
    t: float | None = None
    exploration_fraction: float = 0.1
    threshold: float = 0.0
    """Constant regrading threshold ``e_k``, in scaled cost units."""
    resample_cap: int = 32
    block_size: int | None = None
    seed: int = 0
    pricing: str = "most-negative"
    degenerate_streak: int = DEFAULT_DEGENERATE_STREAK
    check_invariants: bool = False
    max_outer: int | None = None

    def validate(self, grouped: bool) -> None:
        if not 0 < self.s < 1:
            raise InvalidConfig(f"s must lie in (0, 1), got {self.s}")
        if grouped:
            if self.t is None:
                raise InvalidConfig("grouped selection needs t")
            if not self.s < self.t <= 1:
                raise InvalidConfig(f"need 0 < s < t <= 1, got s={self.s}, t={self.t}")
            if not self.exploration_fraction >= 0:
                raise InvalidConfig("exploration_fraction must be nonnegative")
        if self.block_size is not None and self.block_size < 1:
            raise InvalidConfig("block_size must be positive")
        if self.resample_cap < 1:
            raise InvalidConfig("resample_cap must be positive")

    def block(self, num_arcs: int) -> int:
        if self.block_size is not None:
            return self.block_size
        return max(1, ceil_count(self.s * num_arcs))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Certificate:
    min_reduced_cost: int
    arc: tuple[int, int] | None
    evaluations: int

    @property
    def optimal(self) -> bool:
        return self.min_reduced_cost >= 0


@dataclass
class IterationRecord:
    k: int
    h_size: int
    pivots: int
    evaluations: int
    objective_scaled: int
    time_s: float
    block_min_reduced_cost: int
    screen_rounds: int = 1


@dataclass
class OuterReport:
    method: str
    initial_objective_scaled: int
    objective: Objective
    iterations: list[IterationRecord]
    certificate: Certificate | None
    full_scans: int
    pivots: int
    evaluations: int
    wall_time: float
    config: dict = field(default_factory=dict)

    @property
    def outer_iterations(self) -> int:
        return len(self.iterations)

    def objective_column(self) -> list[int]:
        return [rec.objective_scaled for rec in self.iterations]

    def monotone_violations(self) -> int:
        col = [self.initial_objective_scaled] + self.objective_column()
        return sum(1 for a, b in zip(col, col[1:]) if b > a)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "objective_scaled": self.objective.scaled,
            "objective_denominator": self.objective.denominator,
            "objective": float(self.objective),
            "initial_objective_scaled": self.initial_objective_scaled,
            "outer_iterations": self.outer_iterations,
            "full_scans": self.full_scans,
            "pivots": self.pivots,
            "evaluations": self.evaluations,
            "wall_time": self.wall_time,
            "certificate": None if self.certificate is None else {
                "min_reduced_cost": self.certificate.min_reduced_cost,
                "arc": self.certificate.arc,
                "optimal": self.certificate.optimal,
            },
            "config": self.config,
            "iterations": [asdict(rec) for rec in self.iterations],
        }


def negative_set(state: SimplexState, candidates) -> np.ndarray:
    """Candidates with negative reduced cost (each candidate is priced once)."""
    candidates = np.asarray(candidates, dtype=np.int64)
    r = state.reduced_costs(candidates)
    return candidates[r < 0]


def certify_optimal(state: SimplexState) -> Certificate:
    """One pricing pass over every arc; returns the minimum and the first arc attaining it."""
    r = state.reduced_costs()
    k = int(np.argmin(r))
    return Certificate(int(r[k]), state.inst.arc(k), len(r))


def plan_direction(before: TransportPlan, after: TransportPlan) -> dict[tuple[int, int], int]:
    """Nonzero entries of ``after - before`` in integer mass units."""
    d: dict[tuple[int, int], int] = {}
    for i, j, x in zip(before.rows.tolist(), before.cols.tolist(), before.mass.tolist()):
        d[(i, j)] = d.get((i, j), 0) - x
    for i, j, x in zip(after.rows.tolist(), after.cols.tolist(), after.mass.tolist()):
        d[(i, j)] = d.get((i, j), 0) + x
    return {a: x for a, x in d.items() if x}


def _check_direction(inst: OTInstance, before: TransportPlan, after: TransportPlan, h: np.ndarray) -> None:
    d = plan_direction(before, after)
    hset = set(h.tolist())
    rows = np.zeros(inst.n, dtype=np.int64)
    cols = np.zeros(inst.m, dtype=np.int64)
    for (i, j), x in d.items():
        if i * inst.m + j not in hset:
            raise AssertionError(f"direction touches arc {(i, j)} outside the working set")
        rows[i] += x
        cols[j] += x
    if rows.any() or cols.any():
        raise AssertionError("direction does not conserve mass")


class ArcQueue:
    """FIFO of arc indices backed by a growable circular numpy buffer."""

    def __init__(self, items=None, capacity: int = 1024):
        items = np.empty(0, dtype=np.int64) if items is None else np.asarray(items, dtype=np.int64)
        cap = max(capacity, 2 * len(items), 16)
        self._buf = np.empty(cap, dtype=np.int64)
        self._buf[: len(items)] = items
        self._head = 0
        self._size = len(items)

    def __len__(self) -> int:
        return self._size

    def _grow(self, need: int) -> None:
        cap = len(self._buf)
        if need <= cap:
            return
        data = self.to_array()
        self._buf = np.empty(max(need, 2 * cap), dtype=np.int64)
        self._buf[: len(data)] = data
        self._head = 0

    def push(self, items) -> None:
        items = np.asarray(items, dtype=np.int64)
        k = len(items)
        if not k:
            return
        self._grow(self._size + k)
        cap = len(self._buf)
        start = (self._head + self._size) % cap
        first = min(k, cap - start)
        self._buf[start:start + first] = items[:first]
        self._buf[: k - first] = items[first:]
        self._size += k

    def pop(self, k: int) -> np.ndarray:
        k = min(k, self._size)
        cap = len(self._buf)
        end = self._head + k
        if end <= cap:
            out = self._buf[self._head:end].copy()
        else:
            out = np.concatenate([self._buf[self._head:], self._buf[: end - cap]])
        self._head = end % cap
        self._size -= k
        return out

    def to_array(self) -> np.ndarray:
        cap = len(self._buf)
        end = self._head + self._size
        if end <= cap:
            return self._buf[self._head:end].copy()
        return np.concatenate([self._buf[self._head:], self._buf[: end - cap]])

    def discard_marked(self, mark: np.ndarray) -> None:
        """Drop every arc ``a`` with ``mark[a]`` set, preserving order."""
        self._size = K.compact_unmarked(self.to_array(), mark, self._buf)
        self._head = 0


@dataclass
class GroupState:
    R: ArcQueue
    S: ArcQueue

    @classmethod
    def initial(cls, state: SimplexState, rng: np.random.Generator) -> "GroupState":
        order = rng.permutation(state.inst.num_arcs)
        order = order[state.in_basis[order] == 0]
        return cls(ArcQueue(order), ArcQueue(capacity=max(16, len(order) // 8)))

    def check_partition(self, state: SimplexState) -> None:
        r, s = self.R.to_array(), self.S.to_array()
        seen = np.zeros(state.inst.num_arcs, dtype=np.int64)
        np.add.at(seen, r, 1)
        np.add.at(seen, s, 1)
        seen += state.in_basis
        if np.any(seen != 1):
            raise AssertionError("R, S and the basis do not partition the arcs")


def gs_select_block(groups: GroupState, state: SimplexState, config: BlockConfig,
                    ) -> tuple[np.ndarray, GroupState, int, int]:
    """Screen the head of R plus an exploration slice of S; keep the cheapest arcs.

    Returns ``(block, groups, block_min_reduced_cost, rounds)``.  Screened arcs
    that are not kept go to the tail of S.  Raises :class:`NeedFullScan` once R
    is empty and no screened arc had negative reduced cost.
    """
    num_arcs = state.inst.num_arcs
    block = config.block(num_arcs)
    from_r = max(1, ceil_count(config.t * num_arcs))
    from_s = ceil_count(config.exploration_fraction * config.t * num_arcs)
    rounds = 0
    while True:
        if not len(groups.R):
            raise NeedFullScan()
        rounds += 1
        cand = np.concatenate([groups.R.pop(from_r), groups.S.pop(from_s)])
        r = state.reduced_costs(cand)
        if len(r) and r.min() < 0:
            if block < len(r):
                part = np.argpartition(r, block - 1)
                chosen, rest = part[:block], np.sort(part[block:])
            else:
                chosen, rest = np.arange(len(r)), np.empty(0, dtype=np.int64)
            chosen = chosen[np.argsort(r[chosen], kind="stable")]
            groups.S.push(cand[rest])
            return cand[chosen], groups, int(r[chosen[0]]), rounds
        groups.S.push(cand)


def _finish(method, state, t0, ev0, pv0, obj0, records, cert, scans, config) -> OuterReport:
    return OuterReport(method, obj0, state.objective(), records, cert, scans,
                       state.pivots - pv0, state.evaluations - ev0,
                       time.perf_counter() - t0, config)


OnIteration = Callable[[int, SimplexState], None]


def _solve_block(inst, state, h, config, k, t0, ev_start, block_min, rounds) -> IterationRecord:
    before = state.plan() if config.check_invariants else None
    pv = state.pivots
    solve_restricted(inst, h, state, pricing=config.pricing,
                     degenerate_streak=config.degenerate_streak)
    if config.check_invariants:
        _check_direction(inst, before, state.plan(), h)
        state.check_invariants()
    return IterationRecord(k, len(h), state.pivots - pv, state.evaluations - ev_start,
                           state.objective_scaled, time.perf_counter() - t0, block_min, rounds)


def rs_bcdns(inst: OTInstance, config: BlockConfig, init: SimplexState | None = None,
             on_iteration: OnIteration | None = None) -> tuple[SimplexState, OuterReport]:
    """Random block selection; every outer iteration starts with a full pricing pass."""
    config.validate(grouped=False)
    t0 = time.perf_counter()
    state = northwest_corner(inst) if init is None else init
    rng = substream(config.seed, "blocks/random")
    ev0, pv0, obj0 = state.evaluations, state.pivots, state.objective_scaled
    num_arcs = inst.num_arcs
    records: list[IterationRecord] = []
    scans = 0
    k = 0
    while True:
        ev_start = state.evaluations
        r = state.reduced_costs()
        scans += 1
        best = int(np.argmin(r))
        if r[best] >= 0:
            cert = Certificate(int(r[best]), inst.arc(best), num_arcs)
            break
        if config.max_outer is not None and k >= config.max_outer:
            cert = Certificate(int(r[best]), inst.arc(best), num_arcs)
            break
        del r
        nonbasic = np.flatnonzero(state.in_basis == 0)
        size = min(config.block(num_arcs), len(nonbasic))
        attempts = 0
        while True:
            block = nonbasic[rng.choice(len(nonbasic), size, replace=False)]
            rb = state.reduced_costs(block)
            if rb.min() < 0:
                break
            attempts += 1
            if attempts >= config.resample_cap:
                block[-1] = best
                rb[-1] = -1
                break
        h = np.union1d(state.basic_arcs(), block)
        records.append(_solve_block(inst, state, h, config, k, t0, ev_start, int(rb.min()), attempts + 1))
        if on_iteration is not None:
            on_iteration(k + 1, state)
        k += 1
    return state, _finish("rs-bcdns", state, t0, ev0, pv0, obj0, records, cert, scans, config.to_dict())


def gs_bcdns(inst: OTInstance, config: BlockConfig, init: SimplexState | None = None,
             on_iteration: OnIteration | None = None) -> tuple[SimplexState, OuterReport]:
    """Grouped block selection with a promising group R and a low-priority group S."""
    config.validate(grouped=True)
    t0 = time.perf_counter()
    state = northwest_corner(inst) if init is None else init
    rng = substream(config.seed, "blocks/grouped")
    ev0, pv0, obj0 = state.evaluations, state.pivots, state.objective_scaled
    groups = GroupState.initial(state, rng)
    records: list[IterationRecord] = []
    cert = None
    scans = 0
    k = 0
    ev_start = state.evaluations
    mark = np.empty(inst.num_arcs, dtype=np.uint8)
    while True:
        if not len(groups.R):
            negatives = np.empty(inst.num_arcs, dtype=np.int64)
            best_r, best, count = state.scan_negatives(mark, negatives)
            scans += 1
            if best_r >= 0 or (config.max_outer is not None and k >= config.max_outer):
                cert = Certificate(best_r, inst.arc(best), inst.num_arcs)
                break
            groups.S.discard_marked(mark)
            groups.R.push(rng.permutation(negatives[:count]))
            del negatives
        try:
            block, groups, block_min, rounds = gs_select_block(groups, state, config)
        except NeedFullScan:
            continue
        h = np.union1d(state.basic_arcs(), block)
        records.append(_solve_block(inst, state, h, config, k, t0, ev_start, block_min, rounds))
        _regrade(state, h, groups, config.threshold)
        if config.check_invariants:
            groups.check_partition(state)
        if on_iteration is not None:
            on_iteration(k + 1, state)
        k += 1
        ev_start = state.evaluations
        if config.max_outer is not None and k >= config.max_outer:
            cert = certify_optimal(state)
            break
    return state, _finish("gs-bcdns", state, t0, ev0, pv0, obj0, records, cert, scans, config.to_dict())


def _regrade(state: SimplexState, h: np.ndarray, groups: GroupState, threshold: float) -> None:
    nonbasic = h[state.in_basis[h] == 0]
    if threshold <= 0:
        # restricted optimality already gives r >= 0 >= threshold on all of h
        groups.S.push(nonbasic)
        return
    r = state.reduced_costs(nonbasic)
    promising = r < threshold
    groups.R.push(nonbasic[promising])
    groups.S.push(nonbasic[~promising])
