"""Reference optima computed without the network simplex code path.

Both oracles are deliberately naive.  ``oracle_lp_bruteforce`` enumerates every
arc subset of size ``n + m - 1``, keeps those forming a spanning tree, solves
the tree flow by leaf elimination and takes the cheapest nonnegative one.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import Objective, OTInstance, SamplePair
from .errors import OracleUnsupported

BRUTEFORCE_MAX_ARCS = 12


def oracle_1d_monotone(samples: SamplePair) -> float:
    """Squared-distance OT cost between equal-size 1D uniform clouds via the sorted coupling."""
    if samples.dim != 1:
        raise OracleUnsupported(f"monotone oracle needs 1D samples, got dim={samples.dim}")
    if samples.n != samples.m:
        raise OracleUnsupported("monotone oracle needs n == m (uniform marginals)")
    u = np.sort(samples.u[:, 0])
    v = np.sort(samples.v[:, 0])
    return math.fsum((u - v) ** 2) / samples.n


def _is_spanning_tree(arcs, n, m) -> bool:
    parent = list(range(n + m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in arcs:
        ra, rb = find(i), find(n + j)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _tree_flow(arcs, supply, demand) -> dict | None:
    n = len(supply)
    residual = {i: int(supply[i]) for i in range(n)}
    residual.update({n + j: -int(demand[j]) for j in range(len(demand))})
    incident: dict[int, set] = {v: set() for v in residual}
    for a in arcs:
        incident[a[0]].add(a)
        incident[n + a[1]].add(a)
    flow = {}
    leaves = [v for v, e in incident.items() if len(e) == 1]
    while leaves:
        v = leaves.pop()
        if len(incident[v]) != 1:
            continue
        (a,) = incident[v]
        i, j = a
        x = residual[v] if v < n else -residual[v]
        flow[a] = x
        other = n + j if v < n else i
        residual[other] += -x if other < n else x
        residual[v] = 0
        incident[v].clear()
        incident[other].discard(a)
        if len(incident[other]) == 1:
            leaves.append(other)
    if len(flow) != len(arcs) or any(residual.values()):
        return None
    return flow


def oracle_lp_bruteforce(inst: OTInstance) -> Objective:
    """Exact optimum of a tiny instance (``n * m <= 12``) by basis enumeration."""
    n, m = inst.n, inst.m
    if n * m > BRUTEFORCE_MAX_ARCS:
        raise OracleUnsupported(f"brute force limited to n*m <= {BRUTEFORCE_MAX_ARCS}, got {n * m}")
    all_arcs = [(i, j) for i in range(n) for j in range(m)]
    best = None
    for arcs in itertools.combinations(all_arcs, n + m - 1):
        if not _is_spanning_tree(arcs, n, m):
            continue
        flow = _tree_flow(arcs, inst.supply, inst.demand)
        if flow is None or any(x < 0 for x in flow.values()):
            continue
        value = sum(int(inst.cost_scaled[i, j]) * x for (i, j), x in flow.items())
        if best is None or value < best:
            best = value
    assert best is not None, "balanced instance always has a basic feasible solution"
    return Objective(best, inst.scale * inst.denominator)
