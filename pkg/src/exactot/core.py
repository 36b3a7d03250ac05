"""Instances, transport plans, sample generation and exact plan evaluation.

Masses are kept as integers: every instance carries a ``denominator`` so that
``p_i = supply[i] / denominator`` and ``q_j = demand[j] / denominator``.  Costs
are kept twice, as the float matrix and as ``round(scale * cost)`` in int64; all
pivoting and every exactness check runs on the integer copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidInstance
from .rng import substream

DEFAULT_SCALE = 10**6

# Keeps flow-weighted sums and tree potentials inside int64.
_INT_LIMIT = 2**62

DISTRIBUTIONS = ("uniform", "normal", "mixture", "beta")


@dataclass(frozen=True)
class SamplePair:
    """Source and target point clouds, shape ``(n, dim)`` and ``(m, dim)``."""

    u: np.ndarray
    v: np.ndarray
    seed: int | None = None
    kind_u: str | None = None
    kind_v: str | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if u.ndim != 2 or v.ndim != 2:
            raise InvalidInstance("sample arrays must be 1D or 2D")
        if u.shape[0] == 0 or v.shape[0] == 0:
            raise InvalidInstance("empty sample set")
        if u.shape[1] != v.shape[1]:
            raise InvalidInstance(
                f"dimension mismatch between source ({u.shape[1]}) and target ({v.shape[1]}) points"
            )
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def m(self) -> int:
        return self.v.shape[0]

    @property
    def dim(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class OTInstance:
    n: int
    m: int
    cost: np.ndarray
    scale: int
    cost_scaled: np.ndarray
    supply: np.ndarray
    demand: np.ndarray
    denominator: int
    samples: SamplePair | None = field(default=None, compare=False)

    @property
    def num_arcs(self) -> int:
        return self.n * self.m

    @property
    def num_nodes(self) -> int:
        return self.n + self.m

    @property
    def total_mass(self) -> int:
        """Total mass in integer units (one unit is ``1/denominator``)."""
        return int(self.supply.sum())

    @property
    def p(self) -> list[Fraction]:
        return [Fraction(int(a), self.denominator) for a in self.supply]

    @property
    def q(self) -> list[Fraction]:
        return [Fraction(int(b), self.denominator) for b in self.demand]

    def p_float(self) -> np.ndarray:
        return self.supply / self.denominator

    def q_float(self) -> np.ndarray:
        return self.demand / self.denominator

    def arc(self, index: int) -> tuple[int, int]:
        return divmod(int(index), self.m)


@dataclass(frozen=True)
class TransportPlan:
    """Sparse plan; ``mass[k] / denominator`` flows on arc ``(rows[k], cols[k])``."""

    n: int
    m: int
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    denominator: int

    @classmethod
    def from_entries(cls, n: int, m: int, entries: dict, denominator: int) -> "TransportPlan":
        keys = sorted(entries)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        mass = np.array([entries[k] for k in keys], dtype=np.int64)
        return cls(n, m, rows, cols, mass, denominator)

    @classmethod
    def from_dense_units(cls, units: np.ndarray, denominator: int) -> "TransportPlan":
        units = np.asarray(units, dtype=np.int64)
        rows, cols = np.nonzero(units)
        return cls(units.shape[0], units.shape[1], rows.astype(np.int64), cols.astype(np.int64),
                   units[rows, cols], denominator)

    def __len__(self) -> int:
        return len(self.mass)

    def items(self) -> Iterator[tuple[tuple[int, int], Fraction]]:
        for i, j, x in zip(self.rows, self.cols, self.mass):
            yield (int(i), int(j)), Fraction(int(x), self.denominator)

    def dense_units(self) -> np.ndarray:
        out = np.zeros((self.n, self.m), dtype=np.int64)
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def to_dense(self) -> np.ndarray:
        return self.dense_units() / self.denominator

    def support(self) -> set[tuple[int, int]]:
        nz = self.mass != 0
        return set(zip(self.rows[nz].tolist(), self.cols[nz].tolist()))


@dataclass(frozen=True)
class Objective:
    """Exact objective: ``scaled`` is the integer cost in units of ``1/denominator``."""

    scaled: int
    denominator: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.scaled, self.denominator)

    def __float__(self) -> float:
        return self.scaled / self.denominator


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    max_violation: Fraction
    worst: str | None
    negative_entries: int = 0


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    # decimal-exact reading of floats so 0.1 means 1/10
    return Fraction(repr(float(x)))


def _integer_marginals(p: Sequence, q: Sequence) -> tuple[np.ndarray, np.ndarray, int]:
    fp = [_to_fraction(a) for a in p]
    fq = [_to_fraction(b) for b in q]
    if any(a < 0 for a in fp) or any(b < 0 for b in fq):
        raise InvalidInstance("marginals must be nonnegative")
    sp, sq = sum(fp), sum(fq)
    if sp != sq:
        raise InvalidInstance(f"unbalanced marginals: sum(p) = {sp} but sum(q) = {sq}")
    if sp == 0:
        raise InvalidInstance("marginals carry no mass")
    den = math.lcm(*(f.denominator for f in fp + fq))
    supply = np.array([int(a * den) for a in fp], dtype=np.int64)
    demand = np.array([int(b * den) for b in fq], dtype=np.int64)
    return supply, demand, den


def _scale_costs(cost: np.ndarray, scale: int) -> np.ndarray:
    if not np.all(np.isfinite(cost)):
        raise InvalidInstance("cost matrix has non-finite entries")
    if np.any(cost < 0):
        raise InvalidInstance("cost matrix has negative entries")
    scaled = np.rint(cost * scale)
    if scaled.size and scaled.max() >= _INT_LIMIT:
        raise InvalidInstance("scaled costs overflow int64; lower the scale")
    return scaled.astype(np.int64)


def _build(cost, scale, supply, demand, den, samples=None) -> OTInstance:
    n, m = cost.shape
    if int(scale) < 1:
        raise InvalidInstance("scale must be a positive integer")
    scaled = _scale_costs(cost, int(scale))
    top = int(scaled.max()) if scaled.size else 0
    if top * int(supply.sum()) >= _INT_LIMIT or top * (n + m) >= _INT_LIMIT:
        raise InvalidInstance("scaled problem exceeds exact int64 range; lower the scale")
    for a in (cost, scaled, supply, demand):
        a.setflags(write=False)
    return OTInstance(n, m, cost, int(scale), scaled, supply, demand, int(den), samples)


def squared_distances(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    cost = np.zeros((u.shape[0], v.shape[0]))
    for d in range(u.shape[1]):
        diff = u[:, d, None] - v[None, :, d]
        cost += diff * diff
    return cost


def make_instance(samples: SamplePair, scale: int = DEFAULT_SCALE) -> OTInstance:
    """Squared-Euclidean instance between two point clouds with uniform marginals."""
    n, m = samples.n, samples.m
    den = math.lcm(n, m)
    supply = np.full(n, den // n, dtype=np.int64)
    demand = np.full(m, den // m, dtype=np.int64)
    return _build(squared_distances(samples.u, samples.v), scale, supply, demand, den, samples)


def instance_from_matrix(cost, p=None, q=None, scale: int = 1) -> OTInstance:
    """Instance from an explicit cost matrix; marginals default to uniform.

    ``p`` and ``q`` accept ints, floats (read as their decimal repr), Fractions or
    ``"a/b"`` strings.
    """
    cost = np.array(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] == 0 or cost.shape[1] == 0:
        raise InvalidInstance("cost must be a nonempty 2D matrix")
    n, m = cost.shape
    p = [Fraction(1, n)] * n if p is None else p
    q = [Fraction(1, m)] * m if q is None else q
    if len(p) != n or len(q) != m:
        raise InvalidInstance(f"marginal lengths ({len(p)}, {len(q)}) do not match cost shape {cost.shape}")
    supply, demand, den = _integer_marginals(p, q)
    return _build(cost, scale, supply, demand, den)


def sample_distribution(kind: str, size: int, rng: np.random.Generator, dim: int = 1) -> np.ndarray:
    if dim not in (1, 2):
        raise InvalidConfig(f"dimension must be 1 or 2, got {dim}")
    if kind == "uniform":
        return rng.uniform(-1.0, 1.0, size=(size, dim))
    if kind == "normal":
        return rng.standard_normal((size, dim))
    if kind == "mixture":
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return 2.0 * sign[:, None] + rng.standard_normal((size, dim))
    if kind == "beta":
        return 2.0 * rng.beta(0.5, 0.5, size=(size, dim)) - 1.0
    raise InvalidConfig(f"unknown distribution {kind!r}; expected one of {DISTRIBUTIONS}")


def parse_problem(problem: str) -> tuple[str, str]:
    """``"uniform-normal"`` -> ``("uniform", "normal")``."""
    parts = problem.split("-")
    if len(parts) != 2 or any(p not in DISTRIBUTIONS for p in parts):
        raise InvalidConfig(
            f"unknown problem {problem!r}; expected '<source>-<target>' over {DISTRIBUTIONS}"
        )
    return parts[0], parts[1]


def generate_samples(problem: str, n: int, seed: int, dim: int = 1, m: int | None = None) -> SamplePair:
    """Draw ``n`` source and ``m`` (default ``n``) target points for ``problem``."""
    kind_u, kind_v = parse_problem(problem)
    if n < 1 or (m is not None and m < 1):
        raise InvalidConfig("sample counts must be positive")
    m = n if m is None else m
    u = sample_distribution(kind_u, n, substream(seed, "samples/source"), dim)
    v = sample_distribution(kind_v, m, substream(seed, "samples/target"), dim)
    return SamplePair(u, v, seed=seed, kind_u=kind_u, kind_v=kind_v)


def _check_dims(plan: TransportPlan, inst: OTInstance) -> None:
    if (plan.n, plan.m) != (inst.n, inst.m):
        raise InvalidInstance(f"plan is {plan.n}x{plan.m} but instance is {inst.n}x{inst.m}")


def objective(plan: TransportPlan, inst: OTInstance) -> Objective:
    """Exact ``sum scaled_cost * mass``; the descaled value is ``scaled / (scale * denominator)``."""
    _check_dims(plan, inst)
    c = inst.cost_scaled[plan.rows, plan.cols]
    if len(c) and int(c.max()) * int(np.abs(plan.mass).sum()) < _INT_LIMIT:
        total = int(np.dot(c, plan.mass))
    else:
        total = sum(int(a) * int(b) for a, b in zip(c, plan.mass))
    return Objective(total, inst.scale * plan.denominator)


def check_feasibility(plan: TransportPlan, inst: OTInstance) -> FeasibilityVerdict:
    _check_dims(plan, inst)
    den = math.lcm(plan.denominator, inst.denominator)
    fp, fi = den // plan.denominator, den // inst.denominator
    rows = np.zeros(inst.n, dtype=np.int64)
    np.add.at(rows, plan.rows, plan.mass)
    cols = np.zeros(inst.m, dtype=np.int64)
    np.add.at(cols, plan.cols, plan.mass)
    row_res = [int(r) * fp - int(s) * fi for r, s in zip(rows, inst.supply)]
    col_res = [int(c) * fp - int(d) * fi for c, d in zip(cols, inst.demand)]
    worst, worst_val = None, 0
    for i, r in enumerate(row_res):
        if abs(r) > worst_val:
            worst, worst_val = f"row {i}", abs(r)
    for j, c in enumerate(col_res):
        if abs(c) > worst_val:
            worst, worst_val = f"column {j}", abs(c)
    negatives = int((plan.mass < 0).sum())
    return FeasibilityVerdict(
        feasible=worst is None and negatives == 0,
        max_violation=Fraction(worst_val, den),
        worst=worst,
        negative_entries=negatives,
    )
