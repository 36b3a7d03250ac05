"""Network simplex over the complete bipartite transport graph.

All arithmetic is on the integer-scaled costs and integer mass units of the
instance, so optimality and feasibility checks are exact.  Pricing is counted:
every reduced cost computed anywhere in the package is added to the
``evaluations`` counter of the :class:`DualPotentials` it was computed from.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import Objective, OTInstance, TransportPlan, objective
from .errors import InvalidBasis, InvalidConfig, InvalidPivot, SuccessionViolation

PRICING_RULES = ("most-negative", "bland")
DEFAULT_DEGENERATE_STREAK = 50
_CHUNK = 4096


@dataclass
class SpanningTreeBasis:
    """Rooted spanning tree on the ``n + m`` nodes; node 0 is the root."""

    n: int
    m: int
    parent: np.ndarray
    parent_arc: np.ndarray
    depth: np.ndarray
    first_child: np.ndarray
    next_sibling: np.ndarray
    prev_sibling: np.ndarray
    root: int = 0

    @classmethod
    def from_arcs(cls, n: int, m: int, arcs) -> "SpanningTreeBasis":
        arcs = [a if isinstance(a, (int, np.integer)) else a[0] * m + a[1] for a in arcs]
        arcs = [int(a) for a in arcs]
        M = n + m
        if len(arcs) != M - 1 or len(set(arcs)) != len(arcs):
            raise InvalidBasis(f"a basis needs {M - 1} distinct arcs, got {len(arcs)}")
        if any(a < 0 or a >= n * m for a in arcs):
            raise InvalidBasis("arc index out of range")
        adj: list[list[tuple[int, int]]] = [[] for _ in range(M)]
        for a in arcs:
            i, j = divmod(a, m)
            adj[i].append((n + j, a))
            adj[n + j].append((i, a))
        parent = np.full(M, -1, dtype=np.int64)
        parent_arc = np.full(M, -1, dtype=np.int64)
        depth = np.zeros(M, dtype=np.int64)
        first = np.full(M, -1, dtype=np.int64)
        nxt = np.full(M, -1, dtype=np.int64)
        prv = np.full(M, -1, dtype=np.int64)
        seen = np.zeros(M, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w, a in adj[v]:
                if seen[w]:
                    continue
                seen[w] = True
                parent[w], parent_arc[w], depth[w] = v, a, depth[v] + 1
                if first[v] != -1:
                    prv[first[v]] = w
                nxt[w] = first[v]
                first[v] = w
                queue.append(w)
        if not seen.all():
            raise InvalidBasis("arc set does not connect all nodes")
        return cls(n, m, parent, parent_arc, depth, first, nxt, prv)

    @property
    def num_nodes(self) -> int:
        return self.n + self.m

    def arcs(self) -> np.ndarray:
        """Basic arc indices in ascending order."""
        return np.sort(self.parent_arc[self.parent_arc >= 0])

    def preorder(self) -> list[int]:
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            c = self.first_child[v]
            while c != -1:
                stack.append(int(c))
                c = self.next_sibling[c]
        return order

    def validate(self) -> None:
        """Union-find check that the basic arcs form a spanning tree."""
        arcs = self.arcs()
        M = self.num_nodes
        if len(arcs) != M - 1:
            raise InvalidBasis(f"expected {M - 1} basic arcs, found {len(arcs)}")
        root = list(range(M))

        def find(x):
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        for a in arcs:
            i, j = divmod(int(a), self.m)
            ra, rb = find(i), find(self.n + j)
            if ra == rb:
                raise InvalidBasis("basic arcs contain a cycle")
            root[ra] = rb

    def copy(self) -> "SpanningTreeBasis":
        return SpanningTreeBasis(self.n, self.m, self.parent.copy(), self.parent_arc.copy(),
                                 self.depth.copy(), self.first_child.copy(),
                                 self.next_sibling.copy(), self.prev_sibling.copy(), self.root)


@dataclass
class DualPotentials:
    """Node potentials with ``pi[root] == 0``; ``evaluations`` counts priced arcs."""

    pi: np.ndarray
    evaluations: int = 0
    work: int = 0


def compute_potentials(basis: SpanningTreeBasis, inst: OTInstance) -> DualPotentials:
    """Solve ``pi_i - pi_{n+j} = c_ij`` on the basic arcs by one tree traversal."""
    n, m = basis.n, basis.m
    if (n, m) != (inst.n, inst.m):
        raise InvalidBasis("basis and instance sizes differ")
    order = basis.preorder()
    if len(order) != basis.num_nodes:
        raise InvalidBasis("basis tree does not reach every node")
    cs = inst.cost_scaled
    pi = np.zeros(basis.num_nodes, dtype=np.int64)
    work = 0
    for v in order[1:]:
        i, j = divmod(int(basis.parent_arc[v]), m)
        if v >= n:
            pi[v] = pi[i] - cs[i, j]
        else:
            pi[v] = cs[i, j] + pi[n + j]
        work += 1
    return DualPotentials(pi, work=work)


def reduced_cost(i: int, j: int, potentials: DualPotentials, inst: OTInstance) -> int:
    potentials.evaluations += 1
    return int(inst.cost_scaled[i, j]) - int(potentials.pi[i]) + int(potentials.pi[inst.n + j])


@dataclass
class SimplexState:
    inst: OTInstance
    basis: SpanningTreeBasis
    flow: np.ndarray
    potentials: DualPotentials
    in_basis: np.ndarray
    objective_scaled: int = 0
    pivots: int = 0
    degenerate_pivots: int = 0
    _stack: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._stack is None:
            self._stack = np.empty(self.basis.num_nodes, dtype=np.int64)

    @property
    def evaluations(self) -> int:
        return self.potentials.evaluations

    @property
    def pi(self) -> np.ndarray:
        return self.potentials.pi

    def basic_arcs(self) -> np.ndarray:
        return self.basis.arcs()

    def plan(self) -> TransportPlan:
        """Flows on the basic arcs (zero-flow basic arcs included)."""
        nodes = np.flatnonzero(self.basis.parent_arc >= 0)
        arcs = self.basis.parent_arc[nodes]
        order = np.argsort(arcs)
        arcs = arcs[order]
        return TransportPlan(self.inst.n, self.inst.m, arcs // self.inst.m, arcs % self.inst.m,
                             self.flow[nodes][order].copy(), self.inst.denominator)

    def objective(self) -> Objective:
        return Objective(self.objective_scaled, self.inst.scale * self.inst.denominator)

    def copy(self) -> "SimplexState":
        return SimplexState(self.inst, self.basis.copy(), self.flow.copy(),
                            DualPotentials(self.pi.copy(), self.potentials.evaluations),
                            self.in_basis.copy(), self.objective_scaled, self.pivots,
                            self.degenerate_pivots)

    def reduced_costs(self, arcs: np.ndarray | None = None) -> np.ndarray:
        """Counted reduced costs of ``arcs`` (every arc, row-major, when ``None``)."""
        cs = self.inst.cost_scaled.ravel()
        n, m = self.inst.n, self.inst.m
        if arcs is None:
            out = np.empty(n * m, dtype=np.int64)
            K.reduced_costs_dense(cs, n, m, self.pi, out)
        else:
            arcs = np.ascontiguousarray(arcs, dtype=np.int64)
            out = np.empty(len(arcs), dtype=np.int64)
            K.reduced_costs(cs, n, m, self.pi, arcs, out)
        self.potentials.evaluations += len(out)
        return out

    def scan_negatives(self, mark: np.ndarray, out: np.ndarray) -> tuple[int, int, int]:
        """Counted full pricing pass; see :func:`exactot._kernels.scan_negatives`."""
        n, m = self.inst.n, self.inst.m
        best_r, best, count = K.scan_negatives(self.inst.cost_scaled.ravel(), n, m, self.pi, mark, out)
        self.potentials.evaluations += n * m
        return int(best_r), int(best), int(count)

    def check_invariants(self) -> None:
        """Tree shape, zero reduced cost on basic arcs and exact marginals; raises on failure."""
        self.basis.validate()
        arcs = self.basic_arcs()
        cs = self.inst.cost_scaled.ravel()
        n, m = self.inst.n, self.inst.m
        r = cs[arcs] - self.pi[arcs // m] + self.pi[n + arcs % m]
        if np.any(r != 0):
            raise InvalidBasis("potentials inconsistent with basis")
        if self.pi[self.basis.root] != 0:
            raise InvalidBasis("root potential is not zero")
        if np.any(self.flow[self.basis.parent_arc >= 0] < 0):
            raise InvalidBasis("negative flow on a basic arc")
        plan = self.plan()
        rows = np.bincount(plan.rows, weights=plan.mass, minlength=n)
        cols = np.bincount(plan.cols, weights=plan.mass, minlength=m)
        if not (np.array_equal(rows, self.inst.supply) and np.array_equal(cols, self.inst.demand)):
            raise InvalidBasis("basic flows violate the marginals")
        if int(self.in_basis.sum()) != n + m - 1 or not np.all(self.in_basis[arcs] == 1):
            raise InvalidBasis("basis membership mask out of sync")


def state_from_basis(inst: OTInstance, arcs) -> SimplexState:
    """Basic solution of ``arcs``; raises :class:`InvalidBasis` unless it is feasible."""
    basis = SpanningTreeBasis.from_arcs(inst.n, inst.m, arcs)
    n = inst.n
    net = np.concatenate([inst.supply, -inst.demand]).astype(np.int64)
    flow = np.zeros(basis.num_nodes, dtype=np.int64)
    for v in reversed(basis.preorder()[1:]):
        # flow on the parent arc is the net supply leaving the subtree of v
        flow[v] = net[v] if v < n else -net[v]
        net[basis.parent[v]] += net[v]
    if np.any(flow < 0):
        raise InvalidBasis("basis is not primal feasible")
    potentials = compute_potentials(basis, inst)
    in_basis = np.zeros(inst.num_arcs, dtype=np.uint8)
    in_basis[basis.arcs()] = 1
    state = SimplexState(inst, basis, flow, potentials, in_basis)
    state.objective_scaled = objective(state.plan(), inst).scaled
    return state


def northwest_corner_arcs(supply, demand) -> list[tuple[int, int, int]]:
    """``(i, j, mass)`` cells of the northwest corner rule.

    When a row and a column run out together the pointer moves to the next
    column, so the degenerate zero-mass cell sits in the current row.
    """
    rp = [int(a) for a in supply]
    rq = [int(b) for b in demand]
    n, m = len(rp), len(rq)
    i = j = 0
    cells = []
    while True:
        x = min(rp[i], rq[j])
        cells.append((i, j, x))
        rp[i] -= x
        rq[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if rq[j] == 0 and j < m - 1:
            j += 1
        else:
            i += 1
    return cells


def northwest_corner(inst: OTInstance) -> SimplexState:
    cells = northwest_corner_arcs(inst.supply, inst.demand)
    state = state_from_basis(inst, [i * inst.m + j for i, j, _ in cells])
    return state


@dataclass
class PivotResult:
    entering: tuple[int, int]
    leaving: tuple[int, int]
    delta: int
    reduced_cost: int


def pivot(state: SimplexState, entering) -> PivotResult:
    """Push flow around the cycle closed by ``entering`` and swap it into the basis."""
    inst = state.inst
    i, j = entering if isinstance(entering, tuple) else divmod(int(entering), inst.m)
    e = i * inst.m + j
    if state.in_basis[e]:
        raise InvalidPivot(f"arc {(i, j)} is already basic")
    r = reduced_cost(i, j, state.potentials, inst)
    b = state.basis
    leave, delta = K.pivot(inst.n, inst.m, e, r, b.parent, b.parent_arc, state.flow, b.depth,
                           b.first_child, b.next_sibling, b.prev_sibling, state.pi,
                           state.in_basis, state._stack)
    state.pivots += 1
    state.degenerate_pivots += int(delta == 0)
    state.objective_scaled += int(delta) * r
    return PivotResult((i, j), inst.arc(leave), int(delta), r)


@dataclass
class SolveReport:
    objective: Objective
    pivots: int
    evaluations: int
    degenerate_pivots: int
    wall_time: float
    optimal: bool
    trace: list[tuple[float, int, int]] = field(default_factory=list)
    """(seconds since start, pivots so far, scaled objective)."""


def _drive(state: SimplexState, arcs, full: bool, pricing: str, streak_limit: int,
           max_pivots: int | None, trace_every: int) -> SolveReport:
    if pricing not in PRICING_RULES:
        raise InvalidConfig(f"unknown pricing rule {pricing!r}; expected one of {PRICING_RULES}")
    inst, b = state.inst, state.basis
    cs = inst.cost_scaled.ravel()
    bland_only = pricing == "bland"
    use_bland = bland_only
    streak = 0
    if arcs is None:
        arcs = np.empty(0, dtype=np.int64)
    t0 = time.perf_counter()
    ev0, pv0, dg0 = state.evaluations, state.pivots, state.degenerate_pivots
    trace = [(0.0, 0, state.objective_scaled)]
    optimal = False
    budget = np.inf if max_pivots is None else max_pivots
    chunk = max(1, trace_every)
    while not optimal and state.pivots - pv0 < budget:
        step = int(min(chunk, budget - (state.pivots - pv0)))
        pivots, evals, obj_delta, optimal, streak, use_bland, degenerate = K.run(
            cs, inst.n, inst.m, arcs, full, b.parent, b.parent_arc, state.flow, b.depth,
            b.first_child, b.next_sibling, b.prev_sibling, state.pi, state.in_basis,
            state._stack, bland_only, streak_limit, streak, use_bland, step)
        state.pivots += pivots
        state.degenerate_pivots += degenerate
        state.potentials.evaluations += evals
        if obj_delta > 0:
            raise AssertionError("simplex pivots increased the objective")
        state.objective_scaled += int(obj_delta)
        if pivots:
            trace.append((time.perf_counter() - t0, state.pivots - pv0, state.objective_scaled))
    return SolveReport(state.objective(), state.pivots - pv0, state.evaluations - ev0,
                       state.degenerate_pivots - dg0, time.perf_counter() - t0, bool(optimal), trace)


def solve_full(inst: OTInstance, init: SimplexState | None = None, pricing: str = "most-negative",
               degenerate_streak: int = DEFAULT_DEGENERATE_STREAK, max_pivots: int | None = None,
               trace_every: int = _CHUNK) -> tuple[SimplexState, SolveReport]:
    """Solve to global optimality, pricing all ``n * m`` arcs before every pivot.

    ``init`` defaults to the northwest corner solution and is updated in place.
    ``wall_time`` includes building that start, matching the block solvers.
    """
    t0 = time.perf_counter()
    state = northwest_corner(inst) if init is None else init
    report = _drive(state, None, True, pricing, degenerate_streak, max_pivots, trace_every)
    report.wall_time = time.perf_counter() - t0
    return state, report


def working_set(arcs, num_arcs: int) -> np.ndarray:
    """Sorted, de-duplicated int64 index array."""
    h = np.unique(np.asarray(arcs, dtype=np.int64))
    if len(h) and (h[0] < 0 or h[-1] >= num_arcs):
        raise InvalidConfig("working-set arc index out of range")
    return h


def check_succession(state: SimplexState, h: np.ndarray) -> None:
    """Raise :class:`SuccessionViolation` unless every basic arc lies in ``h``."""
    basic = state.basic_arcs()
    pos = np.searchsorted(h, basic)
    pos[pos == len(h)] = 0
    missing = h[pos] != basic if len(h) else np.ones(len(basic), dtype=bool)
    if np.any(missing):
        arc = state.inst.arc(basic[np.argmax(missing)])
        raise SuccessionViolation(f"basic arc {arc} is outside the working set")


def solve_restricted(inst: OTInstance, working, warm: SimplexState, pricing: str = "most-negative",
                     degenerate_streak: int = DEFAULT_DEGENERATE_STREAK,
                     max_pivots: int | None = None, trace_every: int = _CHUNK,
                     ) -> tuple[SimplexState, SolveReport]:
    """Optimize over the arcs in ``working`` only, warm-started from ``warm`` (updated in place).

    Arcs outside the working set are never priced and never enter, so the
    flow change is supported on the working set.
    """
    if warm.inst is not inst:
        raise InvalidConfig("warm state belongs to a different instance")
    h = working if _is_working_set(working) else working_set(working, inst.num_arcs)
    check_succession(warm, h)
    report = _drive(warm, h, False, pricing, degenerate_streak, max_pivots, trace_every)
    return warm, report


def _is_working_set(arcs) -> bool:
    return (isinstance(arcs, np.ndarray) and arcs.dtype == np.int64 and arcs.ndim == 1
            and (len(arcs) < 2 or bool(np.all(arcs[1:] > arcs[:-1]))))
