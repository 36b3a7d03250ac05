import numpy as np
import pytest

from exactot.bcdns import certify_optimal
from exactot.core import check_feasibility, generate_samples, instance_from_matrix, make_instance, objective
from exactot.errors import InvalidBasis, InvalidConfig, InvalidPivot, SuccessionViolation
from exactot.oracles import oracle_lp_bruteforce
from exactot.simplex import (
    DualPotentials,
    SpanningTreeBasis,
    compute_potentials,
    northwest_corner,
    northwest_corner_arcs,
    pivot,
    reduced_cost,
    solve_full,
    solve_restricted,
    state_from_basis,
)


@pytest.fixture
def swap2():
    """Cost [[1, 0], [0, 1]] with uniform marginals, unscaled."""
    return instance_from_matrix([[1, 0], [0, 1]])


class TestNorthwestCorner:
    def test_forced_cells(self):
        cells = northwest_corner_arcs([3, 2], [1, 4])
        assert cells == [(0, 0, 1), (0, 1, 2), (1, 1, 2)]

    def test_degenerate_adds_zero_arc(self):
        cells = northwest_corner_arcs([1, 1], [1, 1])
        assert len(cells) == 3
        assert [(i, j) for i, j, x in cells if x] == [(0, 0), (1, 1)]
        assert sum(x == 0 for *_, x in cells) == 1

    def test_staircase_5x5(self):
        inst = instance_from_matrix(np.ones((5, 5)))
        state = northwest_corner(inst)
        assert len(state.basic_arcs()) == 9
        assert check_feasibility(state.plan(), inst).feasible
        diag = {(k, k) for k in range(5)}
        assert state.plan().support() == diag

    def test_state_invariants(self):
        inst = make_instance(generate_samples("uniform-normal", 7, 1, m=4))
        northwest_corner(inst).check_invariants()


class TestPotentials:
    def test_hand_solved_tree(self):
        inst = instance_from_matrix([[0, 1], [5, 0]])
        basis = SpanningTreeBasis.from_arcs(2, 2, [(0, 0), (0, 1), (1, 1)])
        pot = compute_potentials(basis, inst)
        assert pot.pi.tolist() == [0, -1, 0, -1]
        assert reduced_cost(1, 0, pot, inst) == 6

    def test_zero_costs_zero_potentials(self):
        inst = instance_from_matrix(np.zeros((3, 4)))
        pot = compute_potentials(northwest_corner(inst).basis, inst)
        assert not pot.pi.any()

    def test_linear_work(self):
        inst = make_instance(generate_samples("uniform-normal", 12, 0))
        pot = compute_potentials(northwest_corner(inst).basis, inst)
        assert pot.work == inst.num_nodes - 1

    def test_basic_reduced_costs_vanish(self):
        inst = make_instance(generate_samples("uniform-normal", 9, 3))
        state = northwest_corner(inst)
        assert not state.reduced_costs(state.basic_arcs()).any()

    def test_reduced_cost_arithmetic_and_counter(self):
        inst = instance_from_matrix([[3]])
        pot = DualPotentials(np.array([1, -1]))
        assert reduced_cost(0, 0, pot, inst) == 1
        assert pot.evaluations == 1

    def test_cost_shift_only_moves_demand_potentials(self):
        base = make_instance(generate_samples("uniform-normal", 6, 2), scale=1000)
        shifted = instance_from_matrix(base.cost + 2.0, scale=1000)
        b = northwest_corner(base).basis
        pa, pb = compute_potentials(b, base).pi, compute_potentials(b, shifted).pi
        n = base.n
        assert np.array_equal(pa[:n], pb[:n])
        assert np.all(pb[n:] - pa[n:] == -2000)

    def test_disconnected_basis(self):
        with pytest.raises(InvalidBasis):
            SpanningTreeBasis.from_arcs(2, 2, [(0, 0), (1, 1), (1, 1)])
        with pytest.raises(InvalidBasis):
            SpanningTreeBasis.from_arcs(2, 3, [(0, 0), (0, 1), (1, 0), (1, 1)])

    def test_infeasible_basis(self):
        inst = instance_from_matrix(np.ones((2, 2)), [3, 1], [1, 3])
        with pytest.raises(InvalidBasis):
            state_from_basis(inst, [(0, 0), (1, 0), (1, 1)])


class TestPivot:
    def test_hand_traced_cycle(self, swap2):
        state = northwest_corner(swap2)
        assert objective(state.plan(), swap2).value == 1
        res = pivot(state, (1, 0))
        assert res.leaving == (0, 0)
        assert res.delta == 1 and res.reduced_cost == -2
        assert state.objective_scaled == 0
        assert objective(state.plan(), swap2).scaled == 0
        state.check_invariants()

    def test_degenerate_pivot_keeps_plan(self):
        inst = instance_from_matrix(np.ones((3, 3)))
        state = northwest_corner(inst)
        before = state.plan()
        res = pivot(state, (0, 2))
        assert res.delta == 0
        assert state.plan().support() == before.support()
        assert state.objective_scaled == objective(before, inst).scaled
        state.check_invariants()

    def test_basic_arc_rejected(self, swap2):
        state = northwest_corner(swap2)
        with pytest.raises(InvalidPivot):
            pivot(state, (0, 0))

    def test_random_pivots_never_increase_objective_on_negative_arcs(self):
        inst = make_instance(generate_samples("normal-mixture", 8, 4, m=6))
        state = northwest_corner(inst)
        rng = np.random.default_rng(0)
        for _ in range(60):
            r = state.reduced_costs()
            neg = np.flatnonzero(r < 0)
            if not len(neg):
                break
            before = state.objective_scaled
            pivot(state, int(rng.choice(neg)))
            assert state.objective_scaled <= before
            assert objective(state.plan(), inst).scaled == state.objective_scaled
            state.check_invariants()


class TestSolveFull:
    def test_already_optimal(self, swap2):
        state, _ = solve_full(swap2)
        _, rep = solve_full(swap2, init=state)
        assert rep.pivots == 0 and rep.optimal

    def test_swap_cost(self, swap2):
        _, rep = solve_full(swap2)
        assert rep.objective.value == 0 == oracle_lp_bruteforce(swap2).value

    def test_pricing_rules_agree(self):
        inst = make_instance(generate_samples("uniform-normal", 10, 9))
        _, a = solve_full(inst, pricing="most-negative")
        _, b = solve_full(inst, pricing="bland")
        assert a.objective == b.objective

    def test_certificate_and_invariants(self):
        inst = make_instance(generate_samples("normal-mixture", 25, 5, m=19))
        state, rep = solve_full(inst)
        state.check_invariants()
        assert rep.evaluations == state.evaluations
        assert certify_optimal(state).optimal
        assert state.evaluations == rep.evaluations + inst.num_arcs

    def test_cost_shift_preserves_optimal_plan(self):
        base = make_instance(generate_samples("uniform-normal", 12, 6))
        shifted = instance_from_matrix(base.cost + 3.0, scale=base.scale)
        s_state, s_rep = solve_full(shifted)
        b_state, b_rep = solve_full(base)
        assert objective(s_state.plan(), base) == b_rep.objective
        assert s_rep.objective.value - b_rep.objective.value == 3

    def test_unknown_pricing(self, swap2):
        with pytest.raises(InvalidConfig):
            solve_full(swap2, pricing="steepest")

    def test_single_cell(self):
        inst = instance_from_matrix([[2.5]], scale=2)
        _, rep = solve_full(inst)
        assert rep.pivots == 0 and float(rep.objective) == 2.5

    def test_pivot_budget(self):
        inst = make_instance(generate_samples("uniform-normal", 30, 1))
        _, rep = solve_full(inst, max_pivots=3)
        assert rep.pivots == 3 and not rep.optimal


class TestSolveRestricted:
    def test_full_working_set_equals_full_solve(self):
        inst = make_instance(generate_samples("uniform-normal", 11, 8))
        warm = northwest_corner(inst)
        solve_restricted(inst, np.arange(inst.num_arcs), warm)
        _, rep = solve_full(inst)
        assert warm.objective() == rep.objective

    def test_basis_only_is_noop(self):
        inst = make_instance(generate_samples("uniform-normal", 11, 8))
        warm = northwest_corner(inst)
        before = warm.plan()
        _, rep = solve_restricted(inst, warm.basic_arcs(), warm)
        assert rep.pivots == 0
        assert warm.plan().support() == before.support()

    def test_hand_example(self, swap2):
        warm = northwest_corner(swap2)
        h = np.append(warm.basic_arcs(), 2)
        solve_restricted(swap2, h, warm)
        assert warm.objective_scaled == 0

    def test_succession_violation(self, swap2):
        warm = northwest_corner(swap2)
        with pytest.raises(SuccessionViolation):
            solve_restricted(swap2, [0, 2], warm)

    def test_locality_and_pricing_budget(self):
        inst = make_instance(generate_samples("normal-mixture", 15, 2))
        warm = northwest_corner(inst)
        rng = np.random.default_rng(1)
        extra = rng.choice(inst.num_arcs, 40, replace=False)
        h = np.union1d(warm.basic_arcs(), extra)
        before = warm.plan().dense_units()
        ev0 = warm.evaluations
        _, rep = solve_restricted(inst, h, warm)
        d = warm.plan().dense_units() - before
        outside = np.ones(inst.num_arcs, dtype=bool)
        outside[h] = False
        assert not d.ravel()[outside].any()
        assert not d.sum(axis=0).any() and not d.sum(axis=1).any()
        assert warm.evaluations - ev0 <= rep.pivots * len(h) + len(h)
        assert warm.reduced_costs(h).min() >= 0
