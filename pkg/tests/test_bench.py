from fractions import Fraction

import numpy as np
import pytest

from exactot.bench import (
    ComparisonRow,
    barycentric_projection,
    check_agreement,
    run_comparison,
    run_exact,
    run_gap_vs_time,
    run_grid,
    run_large_scale,
)
from exactot.core import SamplePair, TransportPlan, generate_samples, make_instance
from exactot.errors import ExactnessViolation, InvalidConfig, InvalidInput
from exactot.formats import read_csv
from exactot.oracles import oracle_1d_monotone
from exactot.sinkhorn import SinkhornConfig


def test_grid_skips_invalid_cells_and_agrees(tmp_path):
    n = 30
    res = run_grid("uniform-normal", n, [2 / n, 0.5], [0.3, 0.4, 0.9], seed=1, out_dir=tmp_path)
    pairs = {(c.s, c.t) for c in res.cells}
    assert (0.5, 0.4) not in pairs and len(pairs) == 4
    assert len({c.objective_scaled for c in res.cells}) == 1
    assert all(c.optimal for c in res.cells)
    table = res.table("evaluations")
    assert table[1][:2] == [None, None] and None not in table[0]
    config, rows = read_csv(tmp_path / "grid_results_30.csv")
    assert config["n"] == 30 and len(rows) == 4


def test_comparison_rows(tmp_path):
    rows = run_comparison("normal-mixture", [20, 30], seed=2, out_dir=tmp_path)
    assert len(rows) == 6
    for n in (20, 30):
        objs = {r.objective for r in rows if r.n == n}
        assert len(objs) == 1
    assert all(r.speedup_vs_ns == 1.0 for r in rows if r.method == "ns")
    assert all(r.certified for r in rows)
    config, csv_rows = read_csv(tmp_path / "comparison_normal-mixture.csv")
    assert config["methods"] == ["ns", "rs-bcdns", "gs-bcdns"] and len(csv_rows) == 6


def test_comparison_rejects_sinkhorn():
    with pytest.raises(InvalidConfig):
        run_comparison("uniform-normal", [10], methods=["sinkhorn"])


def test_disagreement_raises():
    rows = [ComparisonRow(10, "ns", 1, 1, 1, 5, 1.0, True), ComparisonRow(10, "gs-bcdns", 1, 1, 1, 6, 1.0, True)]
    with pytest.raises(ExactnessViolation):
        check_agreement(rows)


def test_gap_traces(tmp_path):
    res = run_gap_vs_time("uniform-normal", 25, [1e-1], seed=0,
                          sinkhorn=SinkhornConfig(0.1, max_iter=300), out_dir=tmp_path)
    gs = res.trace("gs-bcdns")
    assert gs.final_gap == 0
    for tr in res.traces:
        assert all(p.gap >= 0 for p in tr.points)
        assert all(isinstance(p.gap, Fraction) for p in tr.points)
    assert (tmp_path / "gap_trace_gs-bcdns_exact.csv").exists()
    config, rows = read_csv(tmp_path / "gap_trace_sinkhorn_0.1.csv")
    assert config["epsilon"] == 0.1 and float(rows[-1]["gap"]) >= 0


def test_run_exact_unknown_method():
    inst = make_instance(generate_samples("uniform-normal", 5, 0))
    with pytest.raises(InvalidConfig):
        run_exact(inst, "hungarian")


class TestBarycentric:
    def test_diagonal_plan(self):
        v = np.array([[0.5], [-1.0], [2.0]])
        plan = TransportPlan.from_dense_units(np.eye(3, dtype=np.int64), 3)
        t = barycentric_projection(plan, v, [Fraction(1, 3)] * 3)
        assert np.allclose(t[:, 0], v[:, 0])

    def test_independent_coupling_gives_mean(self):
        v = np.array([1.0, 2.0, 6.0])
        x = np.full((3, 3), 1 / 9)
        t = barycentric_projection(x, v, [1 / 3] * 3)
        assert np.allclose(t, 3.0)

    def test_optimal_1d_is_monotone(self):
        samples = generate_samples("uniform-beta", 40, 3)
        inst = make_instance(samples)
        run = run_exact(inst, "gs-bcdns")
        t = barycentric_projection(run.plan, samples, inst.p_float())[:, 0]
        order = np.argsort(samples.u[:, 0])
        assert np.all(np.diff(t[order]) >= -1e-12)

    def test_zero_mass_source(self):
        with pytest.raises(InvalidInput):
            barycentric_projection(np.zeros((2, 2)), np.ones(2), [0, 1])


def test_large_scale_small_n(tmp_path):
    seen = []
    rep = run_large_scale(60, seed=1, epochs=(1, 2), out_dir=tmp_path, on_iteration=lambda k, s: seen.append(k))
    assert rep.certified and rep.within_tolerance
    assert set(rep.snapshots) >= {1, 2, "final"}
    assert seen == list(range(1, rep.outer.outer_iterations + 1))
    assert rep.oracle == oracle_1d_monotone(generate_samples("uniform-beta", 60, 1))
    config, rows = read_csv(tmp_path / "barycentric_60_final.csv")
    assert len(rows) == 60 and config["certified"]
    us = [float(r["u"]) for r in rows]
    assert us == sorted(us)
