import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asht.bounds import (
    BoundsReport,
    _best_response_enum,
    _best_response_lp,
    _divergence_matrix,
    compute_bounds_report,
    hamiltonian,
    hamiltonian_arm_values,
    hamiltonian_batch,
    r_go_1,
    r_hopf,
    r_static,
    r_ub,
    terminal_g,
    terminal_g_batch,
)
from asht.errors import InternalCheckError, SolverBudgetError
from asht.instances import BanditClass, chernoff_information, zeta_all_arms

from conftest import random_bernoulli_instance


def momentum_strategy(m=3, lo=-4.0, hi=4.0):
    return st.lists(
        st.floats(lo, hi, allow_nan=False), min_size=m, max_size=m
    ).map(np.array)


class TestTerminalCost:
    def test_second_smallest(self):
        assert terminal_g(np.array([3.0, 1.0, 2.0])) == 2.0
        assert terminal_g(np.array([5.0, 5.0])) == 5.0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(40, 3))
        batch = terminal_g_batch(xs)
        for k in range(40):
            assert batch[k] == terminal_g(xs[k])


class TestHamiltonian:
    def test_boundary_agrees_with_zeta(self, table1):
        rng = np.random.default_rng(1)
        for _ in range(50):
            beta = rng.dirichlet(np.ones(3))
            h, _ = hamiltonian(table1, beta)
            assert abs(h - np.max(zeta_all_arms(table1, beta))) <= 1e-12

    def test_negative_orthant_branch(self, table1):
        # when sum(p) <= 0 the value is max_a min_x of -<p, log nu_a(x)>
        p = np.array([-1.0, -0.5, -0.25])
        h, arm = hamiltonian(table1, p)
        expect = max(
            np.min(-(p @ table1.log_probs[:, a, :])) for a in range(3)
        )
        assert abs(h - expect) < 1e-12

    @given(momentum_strategy())
    @settings(max_examples=300, deadline=None)
    def test_positive_homogeneity(self, p):
        inst = BanditClass(np.array([
            [[0.6, 0.4], [0.3, 0.7], [0.23, 0.77]],
            [[0.35, 0.65], [0.8, 0.2], [0.35, 0.65]],
            [[0.2, 0.8], [0.3, 0.7], [0.75, 0.25]],
        ]))
        for c in (0.5, 2.0):
            h1, _ = hamiltonian(inst, p)
            h2, _ = hamiltonian(inst, c * p)
            assert abs(h2 - c * h1) <= 1e-9 * max(1.0, abs(h1))

    @given(momentum_strategy(), st.integers(0, 2), st.floats(1e-3, 2.0))
    @settings(max_examples=300, deadline=None)
    def test_coordinate_monotone(self, p, i, delta):
        inst = BanditClass(np.array([
            [[0.6, 0.4], [0.3, 0.7], [0.23, 0.77]],
            [[0.35, 0.65], [0.8, 0.2], [0.35, 0.65]],
            [[0.2, 0.8], [0.3, 0.7], [0.75, 0.25]],
        ]))
        q = p.copy()
        q[i] += delta
        h1, _ = hamiltonian(inst, p)
        h2, _ = hamiltonian(inst, q)
        assert h2 >= h1 - 1e-10

    @given(momentum_strategy(), momentum_strategy())
    @settings(max_examples=300, deadline=None)
    def test_lipschitz_ratio(self, p, q):
        inst = BanditClass(np.array([
            [[0.6, 0.4], [0.3, 0.7], [0.23, 0.77]],
            [[0.35, 0.65], [0.8, 0.2], [0.35, 0.65]],
            [[0.2, 0.8], [0.3, 0.7], [0.75, 0.25]],
        ]))
        dist = float(np.linalg.norm(p - q))
        if dist < 1e-9:
            return
        h1, _ = hamiltonian(inst, p)
        h2, _ = hamiltonian(inst, q)
        assert abs(h1 - h2) / dist <= math.sqrt(3) * inst.a_bound + 1e-9

    def test_tiny_positive_sum_is_stable(self, table1):
        # s barely positive: the log-sum-exp branch must not overflow
        p = np.array([1.0, -0.5, -0.5 + 1e-14])
        h, _ = hamiltonian(table1, p)
        assert np.isfinite(h)

    def test_batch_matches_scalar(self, table1):
        rng = np.random.default_rng(2)
        ps = rng.normal(size=(25, 3)) * 2.0
        hb = hamiltonian_batch(table1, ps)
        for k in range(25):
            h, _ = hamiltonian(table1, ps[k])
            assert abs(hb[k] - h) < 1e-12

    def test_arm_values_match_hamiltonian(self, table1):
        rng = np.random.default_rng(3)
        ps = rng.normal(size=(10, 3))
        vals = hamiltonian_arm_values(table1, ps)
        for k in range(10):
            h, arm = hamiltonian(table1, ps[k])
            assert abs(np.max(vals[k]) - h) < 1e-12
            assert int(np.argmax(vals[k])) == arm


class TestRUb:
    def test_table1(self, table1):
        assert abs(r_ub(table1) - 0.14618440) < 1e-6

    def test_table2(self, table2):
        assert abs(r_ub(table2) - 0.0073001) < 1e-4

    def test_m2_single_arm_is_chernoff(self, m2_single_arm):
        c = chernoff_information(
            m2_single_arm.probs[0, 0], m2_single_arm.probs[1, 0]
        )
        assert abs(r_ub(m2_single_arm) - c) < 1e-12

    def test_near_identical_hypotheses_near_zero(self):
        inst = BanditClass(np.array([
            [[0.5, 0.5]],
            [[0.5 + 1e-6, 0.5 - 1e-6]],
        ]))
        assert r_ub(inst) < 1e-9


class TestRStatic:
    def test_table1(self, table1):
        v, w = r_static(table1)
        assert abs(v - 0.07814) < 1e-3
        assert w.weights.shape == (3,)

    def test_table2(self, table2):
        v, _ = r_static(table2)
        assert abs(v - 0.007003) < 1e-4

    def test_m2_equals_r_ub(self, m2_simple):
        # binary case: playing the most discriminating arm is optimal
        v, _ = r_static(m2_simple)
        assert abs(v - r_ub(m2_simple)) < 1e-7

    def test_w_star_attains_value(self, table1):
        from asht.bounds import _static_objective

        v, w = r_static(table1)
        assert abs(_static_objective(table1, w.weights) - v) < 1e-9


class TestBestResponseOracle:
    def test_enum_matches_lp(self, table1):
        rng = np.random.default_rng(7)
        for _ in range(40):
            q = rng.dirichlet(np.ones(2), size=3)
            d = _divergence_matrix(table1, q)
            v_enum = _best_response_enum(d, 3, 3)
            v_lp = _best_response_lp(d, 3, 3)
            assert abs(v_enum - v_lp) < 1e-9


class TestRGo1:
    def test_table1(self, table1):
        v, meta = r_go_1(table1)
        assert abs(v - 0.13205) < 2e-3
        assert meta.converged

    def test_m2_equals_r_ub(self, m2_simple):
        v, _ = r_go_1(m2_simple)
        assert abs(v - r_ub(m2_simple)) < 1e-5

    def test_budget_error_carries_bracket(self, table1):
        with pytest.raises(SolverBudgetError) as exc:
            r_go_1(table1, maxiter=1, tol=0.0)
        assert exc.value.best is not None
        assert exc.value.bracket[1] is not None


class TestRHopf:
    def test_m2_reduces_to_r_ub(self, m2_simple):
        v, meta = r_hopf(m2_simple)
        assert meta.method == "single_pair_exact"
        assert abs(v - r_ub(m2_simple)) < 1e-9

    def test_above_pde_value_table1(self, table1):
        from asht.pde import UpwindGridSpec, solve_r_go_inf

        spec = UpwindGridSpec(
            m=3, a_bound=table1.a_bound, N_x=32, N_t=32
        )
        pde_v, _ = solve_r_go_inf(table1, spec, refine=False)
        v, _ = r_hopf(table1)
        assert v >= pde_v - 1e-3


class TestLadder:
    def test_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            inst = random_bernoulli_instance(rng)
            report = compute_bounds_report(inst, seed=0)
            assert report.r_static <= report.r_go_1 + 1e-6
            assert report.r_go_1 <= report.r_ub + 2e-6

    def test_violation_raises(self):
        with pytest.raises(InternalCheckError, match="ladder"):
            BoundsReport(
                m=3, n_arms=3, support_size=2, eps=0.2, a_bound=1.6,
                r_static=0.5, r_ub=0.1, r_go_1=0.3,
            )

    def test_report_serializes(self, table2):
        report = compute_bounds_report(table2, seed=0)
        d = report.to_dict()
        assert set(["r_static", "r_ub", "r_go_1"]).issubset(d)
        assert d["w_static"] is not None


class TestPermutationInvariance:
    def test_bounds_invariant(self, table1):
        perm = [1, 2, 0]
        p = table1.permuted(perm)
        assert abs(r_ub(p) - r_ub(table1)) < 1e-12
        v1, _ = r_static(table1, seed=0)
        v2, _ = r_static(p, seed=0)
        assert abs(v1 - v2) < 1e-6
