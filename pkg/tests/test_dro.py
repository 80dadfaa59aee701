import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from kdebo.dro import (RobustInstance, inf_ucb_over_context, robust_values, solve_dual,
                       worst_case_value)
from kdebo.gp import GpHyperparams, posterior


def lp_oracle(u, w, u_inf, delta):
    """min sum q_i u_i + q_inf u_inf  s.t.  sum |q - p| <= delta, sum q = 1, q >= 0.

    Variables: q (M atoms + the infimum atom) and slacks s >= |q - p|.
    """
    M = len(u)
    vals = np.append(u, u_inf)
    p = np.append(w, 0.0)
    n = M + 1
    c = np.concatenate([vals, np.zeros(n)])
    I = np.eye(n)
    A_ub = np.vstack([np.hstack([I, -I]), np.hstack([-I, -I]),
                      np.concatenate([np.zeros(n), np.ones(n)])[None]])
    b_ub = np.concatenate([p, -p, [delta]])
    A_eq = np.concatenate([np.ones(n), np.zeros(n)])[None]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (2 * n), method="highs")
    assert res.status == 0
    return res.fun


def random_instance(rng, max_m=64):
    M = int(rng.integers(1, max_m + 1))
    u = rng.normal(size=M) * rng.uniform(0.1, 5)
    if rng.uniform() < 0.3:
        u = np.round(u)  # ties
    u_inf = u.min() - rng.exponential(1.0) * (rng.uniform() < 0.7)
    w = rng.dirichlet(np.ones(M)) if rng.uniform() < 0.3 else None
    return RobustInstance(u, float(u_inf), float(rng.uniform(0, 3)), w)


class TestPrimal:
    def test_zero_radius_is_mean(self):
        u = np.array([0.0, 1.0, 2.0, 3.0])
        assert worst_case_value(RobustInstance(u, 0.0, 0.0)) == pytest.approx(1.5)

    @pytest.mark.parametrize("delta", [2.0, 2.5, 10.0])
    def test_large_radius_is_infimum(self, delta):
        inst = RobustInstance(np.array([0.0, 1.0, 2.0, 3.0]), -1.0, delta)
        assert worst_case_value(inst) == pytest.approx(-1.0)

    def test_small_example(self):
        u = np.array([0.0, 1.0, 2.0, 3.0])
        assert lp_oracle(u, np.full(4, 0.25), 0.0, 1.0) == pytest.approx(0.25, abs=1e-9)
        assert worst_case_value(RobustInstance(u, 0.0, 1.0)) == pytest.approx(0.25, abs=1e-12)


class TestDual:
    @pytest.mark.parametrize("delta", [0.0, 0.3, 1.0, 2.0, 5.0])
    def test_constant_support(self, delta):
        assert solve_dual(RobustInstance(np.full(7, 2.5), 2.5, delta)).value == pytest.approx(2.5)

    def test_two_point_example(self):
        u = np.array([0.0, 1.0])
        assert lp_oracle(u, np.full(2, 0.5), 0.0, 0.5) == pytest.approx(0.25, abs=1e-9)
        assert solve_dual(RobustInstance(u, 0.0, 0.5)).value == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("u,u_inf,delta", [
        ([0.0, 1.0, 2.0, 3.0], 0.0, 0.0),
        ([0.0, 1.0, 2.0, 3.0], -1.0, 2.5),
        ([0.0, 1.0, 2.0, 3.0], 0.0, 1.0),
    ])
    def test_reproduces_primal_examples(self, u, u_inf, delta):
        inst = RobustInstance(np.array(u), u_inf, delta)
        assert solve_dual(inst).value == pytest.approx(worst_case_value(inst), abs=1e-8)

    def test_dual_objective_at_returned_point(self, rng):
        for _ in range(200):
            inst = random_instance(rng)
            sol = solve_dual(inst)
            obj = inst.weights @ (-sol.beta - inst.delta * sol.alpha
                                  + np.minimum(inst.u + sol.beta, sol.alpha))
            assert obj == pytest.approx(sol.value, abs=1e-9)

    def test_feasible(self, rng):
        for _ in range(300):
            inst = random_instance(rng)
            sol = solve_dual(inst)
            assert sol.alpha >= 0
            assert sol.alpha + sol.beta >= -inst.u_inf - 1e-12


class TestConsistency:
    def test_primal_dual_gap_random(self, rng):
        for _ in range(1000):
            inst = random_instance(rng)
            assert abs(solve_dual(inst).value - worst_case_value(inst)) <= 1e-8

    def test_match_lp_oracle(self, rng):
        for _ in range(100):
            inst = random_instance(rng, max_m=16)
            ref = lp_oracle(inst.u, inst.weights, inst.u_inf, inst.delta)
            assert worst_case_value(inst) == pytest.approx(ref, abs=1e-7)
            assert solve_dual(inst).value == pytest.approx(ref, abs=1e-7)

    def test_batched_matches_single(self, rng):
        U = rng.normal(size=(30, 50))
        u_inf = U.min(axis=1) - rng.exponential(size=30)
        got = robust_values(U, u_inf, 0.7)
        ref = [solve_dual(RobustInstance(U[i], u_inf[i], 0.7)).value for i in range(30)]
        np.testing.assert_allclose(got, ref, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=40),
           st.floats(0, 3), st.floats(0, 3), st.floats(0, 5), st.floats(-50, 50))
    def test_properties(self, u, d1, d2, gap, kappa):
        u = np.array(u)
        u_inf = u.min() - gap
        lo, hi = sorted((d1, d2))
        v_lo = solve_dual(RobustInstance(u, u_inf, lo)).value
        v_hi = solve_dual(RobustInstance(u, u_inf, hi)).value
        assert v_hi <= v_lo + 1e-10
        assert v_lo <= u.mean() + 1e-10
        assert v_hi >= u_inf - 1e-10
        shifted = solve_dual(RobustInstance(u + kappa, u_inf + kappa, lo)).value
        assert shifted - v_lo == pytest.approx(kappa, abs=1e-10 * max(1.0, abs(kappa)) * 10)

    def test_rejects_infimum_above_samples(self):
        with pytest.raises(ValueError):
            RobustInstance(np.array([1.0, 2.0]), 1.5, 0.1)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            RobustInstance(np.array([1.0, 2.0]), 0.0, 0.1, np.array([0.3, 0.3]))


class TestInfOverContext:
    C_BOX = (np.zeros(1), np.ones(1))

    def test_prior_constant(self):
        post = posterior(np.zeros((0, 2)), [], GpHyperparams(np.ones(2), 1.0, 1e-2))
        assert inf_ucb_over_context(post, [0.3], 1.5, 64, self.C_BOX) == pytest.approx(1.5)

    def test_single_grid_point(self, rng):
        X = rng.uniform(size=(8, 2))
        post = posterior(X, rng.normal(size=8), GpHyperparams(np.ones(2) * 0.3, 1.0, 1e-2))
        # the one-point Sobol grid is the origin of the context box
        expect = post.ucb(np.array([[0.3, 0.0]]), 1.5)[0]
        assert inf_ucb_over_context(post, [0.3], 1.5, 1, self.C_BOX) == pytest.approx(expect)

    def test_monotone_function_minimum(self):
        # zero-noise GP through f(x, c) = x + 2c on a dense grid; min over c is at c = 0
        g = np.linspace(0, 1, 12)
        X = np.array([[a, b] for a in g for b in g])
        y = X[:, 0] + 2 * X[:, 1]
        post = posterior(X, y, GpHyperparams(np.array([2.0, 2.0]), 1.0, 1e-10))
        dense_c = np.linspace(0, 1, 100_000)
        Z = np.column_stack([np.full_like(dense_c, 0.37), dense_c])
        oracle = post.ucb(Z, 0.0).min()
        assert oracle == pytest.approx(0.37, abs=2e-2)
        got = inf_ucb_over_context(post, [0.37], 0.0, 1024, self.C_BOX)
        assert got == pytest.approx(oracle, abs=2e-2)
