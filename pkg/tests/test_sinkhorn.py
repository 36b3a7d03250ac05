import math
from fractions import Fraction

import numpy as np
import pytest

from exactot.core import check_feasibility, generate_samples, instance_from_matrix, make_instance, objective
from exactot.errors import InvalidConfig, InvalidInput
from exactot.oracles import oracle_lp_bruteforce
from exactot.simplex import solve_full
from exactot.sinkhorn import (
    ScalingState,
    SinkhornConfig,
    gamma_from_eps,
    plan_from_scalings,
    round_to_feasible,
    sinkhorn_solve,
)


class TestGamma:
    def test_values(self):
        assert gamma_from_eps(0.01, 100) == pytest.approx(5.4287e-4, rel=1e-4)
        assert gamma_from_eps(1e-4, 1000) == pytest.approx(3.619e-6, rel=1e-3)

    def test_log_n_equal_four(self):
        assert gamma_from_eps(0.1, math.exp(4)) == pytest.approx(6.25e-3)

    def test_needs_two_points(self):
        with pytest.raises(InvalidConfig):
            gamma_from_eps(0.1, 1)

    def test_config_validation(self):
        with pytest.raises(InvalidConfig):
            SinkhornConfig(epsilon=0.0).validate()
        with pytest.raises(InvalidConfig):
            SinkhornConfig(epsilon=0.1, delta=-1).validate()
        with pytest.raises(InvalidConfig):
            SinkhornConfig(epsilon=0.1, stop_rule="never").validate()


class TestSolve:
    def test_constant_cost_two_sweeps(self):
        inst = instance_from_matrix(np.full((3, 4), 2.5), [0.2, 0.3, 0.5], None)
        res = sinkhorn_solve(inst, SinkhornConfig(0.1, stop_rule="scaling"))
        assert res.converged and res.iterations <= 2
        expected = np.outer(inst.p_float(), inst.q_float())
        assert np.allclose(res.plan.to_dense(), expected, atol=1e-12)
        assert np.allclose(plan_from_scalings(res.state, inst, res.gamma), expected, atol=1e-12)

    def test_single_point(self):
        inst = instance_from_matrix([[3.0]])
        for eps in (1e-1, 1e-4):
            res = sinkhorn_solve(inst, SinkhornConfig(eps, gamma=eps))
            assert res.plan.to_dense().tolist() == [[1.0]]

    def test_swap_cost_reaches_zero(self):
        inst = instance_from_matrix([[1, 0], [0, 1]], scale=1000)
        res = sinkhorn_solve(inst, SinkhornConfig(1e-2))
        assert res.trace[-1].objective.value <= Fraction(1, 100)

    def test_converged_row_sums(self):
        inst = instance_from_matrix([[1, 0], [0, 1]], scale=1000)
        cfg = SinkhornConfig(1e-2, stop_rule="scaling", delta=1e-9)
        res = sinkhorn_solve(inst, cfg)
        x = plan_from_scalings(res.state, inst, res.gamma)
        assert np.all(x > 0)
        assert np.abs(x.sum(axis=1) - inst.p_float()).max() < 1e-6

    def test_every_iterate_feasible_and_above_optimum(self):
        inst = make_instance(generate_samples("uniform-normal", 30, 2))
        f_star = solve_full(inst)[1].objective.value
        res = sinkhorn_solve(inst, SinkhornConfig(0.05, max_iter=200))
        assert all(tp.feasible for tp in res.trace)
        assert all(tp.objective.value >= f_star for tp in res.trace)
        assert check_feasibility(res.plan, inst).feasible

    def test_budget_truncates(self):
        inst = make_instance(generate_samples("uniform-normal", 30, 2))
        res = sinkhorn_solve(inst, SinkhornConfig(1e-4, max_iter=5))
        assert res.truncated and not res.converged and res.iterations == 5

    def test_trace_stride(self):
        inst = make_instance(generate_samples("uniform-normal", 20, 2))
        res = sinkhorn_solve(inst, SinkhornConfig(1e-3, max_iter=30, trace_stride=10))
        assert [tp.iteration for tp in res.trace] == [10, 20, 30]

    def test_deterministic_trace(self):
        inst = make_instance(generate_samples("uniform-normal", 20, 2))
        cfg = SinkhornConfig(0.1, max_iter=50)
        a = sinkhorn_solve(inst, cfg)
        b = sinkhorn_solve(inst, cfg)
        assert [tp.objective for tp in a.trace] == [tp.objective for tp in b.trace]
        assert np.array_equal(a.state.log_u, b.state.log_u)

    def test_log_domain_survives_tiny_gamma(self):
        inst = make_instance(generate_samples("uniform-normal", 20, 1))
        res = sinkhorn_solve(inst, SinkhornConfig(1e-4, gamma=1e-7, max_iter=20))
        assert np.all(np.isfinite(res.state.log_u)) and np.all(np.isfinite(res.state.log_v))

    def test_zero_marginal_rejected(self):
        inst = instance_from_matrix(np.ones((2, 2)), [1, 0], [0.5, 0.5])
        with pytest.raises(InvalidInput):
            sinkhorn_solve(inst, SinkhornConfig(0.1))


class TestRounding:
    def test_feasible_plan_unchanged(self):
        p = [Fraction(1, 4), Fraction(3, 4)]
        q = [Fraction(1, 2), Fraction(1, 2)]
        x = np.outer([0.25, 0.75], [0.5, 0.5])
        plan = round_to_feasible(x, p, q)
        assert np.array_equal(plan.to_dense(), x)

    def test_scaled_plan_rescaled(self):
        p = q = [Fraction(1, 2)] * 2
        x = 2 * np.full((2, 2), 0.25)
        assert np.array_equal(round_to_feasible(x, p, q).to_dense(), np.full((2, 2), 0.25))

    def test_random_3x3_exact_and_above_lp(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            cost = rng.integers(0, 10, size=(3, 3))
            inst = instance_from_matrix(cost)
            x = rng.random((3, 3)) + 1e-3
            plan = round_to_feasible(x, inst.p, inst.q)
            assert check_feasibility(plan, inst).feasible
            assert objective(plan, inst).value >= oracle_lp_bruteforce(inst).value

    def test_raw_iterate_infeasible_until_rounded(self):
        inst = make_instance(generate_samples("uniform-normal", 10, 0))
        res = sinkhorn_solve(inst, SinkhornConfig(0.1, max_iter=1))
        x = plan_from_scalings(res.state, inst, res.gamma)
        assert np.abs(x.sum(axis=0) - inst.q_float()).max() < 1e-12
        assert np.abs(x.sum(axis=1) - inst.p_float()).max() > 1e-6
        assert check_feasibility(round_to_feasible(x, inst.p, inst.q), inst).feasible

    def test_zero_mass_rejected(self):
        with pytest.raises(InvalidInput):
            round_to_feasible(np.zeros((2, 2)), [0.5, 0.5], [0.5, 0.5])

    def test_shape_and_sign_checked(self):
        with pytest.raises(InvalidInput):
            round_to_feasible(np.ones((2, 3)), [0.5, 0.5], [0.5, 0.5])
        with pytest.raises(InvalidInput):
            round_to_feasible(-np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5])

    def test_underflowing_state_stays_nonnegative(self):
        inst = make_instance(generate_samples("uniform-normal", 5, 0))
        state = ScalingState(np.full(5, -50.0), np.full(5, -50.0))
        assert np.all(plan_from_scalings(state, inst, 0.01) >= 0)
