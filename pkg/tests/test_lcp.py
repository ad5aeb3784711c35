import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from sgobstacle.lcp import (SolverConfig, SparseObstacleSystem,
                            active_set_solve, brute_force_solve,
                            complementarity_residual, psor_solve, solve_lcp)


def random_lcp(rng, n=8):
    """Random diagonally dominant SPD matrix with mixed-sign rhs/obstacle."""
    A = rng.standard_normal((n, n))
    A = 0.5 * (A + A.T)
    A += n * np.eye(n)
    b = rng.standard_normal(n)
    obs = rng.standard_normal(n) - 0.5
    return A, b, obs


class TestBruteForce:
    def test_unconstrained_case(self):
        rng = np.random.default_rng(0)
        A, b, _ = random_lcp(rng, 5)
        obs = np.full(5, -1e9)
        u = brute_force_solve(A, b, obs)
        assert_allclose(u, np.linalg.solve(A, b), rtol=1e-10)

    def test_fully_constrained_case(self):
        # obstacle so high that u = obs everywhere (requires lambda >= 0,
        # so pick b making Au - b positive at the obstacle)
        A = np.eye(3) * 4.0
        obs = np.array([1.0, 2.0, 3.0])
        b = A @ obs - 1.0
        u = brute_force_solve(A, b, obs)
        assert_allclose(u, obs, rtol=1e-12)

    def test_size_cap(self):
        rng = np.random.default_rng(1)
        A, b, obs = random_lcp(rng, 17)
        with pytest.raises(ValueError):
            brute_force_solve(A, b, obs)


class TestSolversAgainstEnumeration:
    def test_both_methods_match_brute_force(self):
        rng = np.random.default_rng(123)
        psor_cfg = SolverConfig(method="psor", tol=1e-12, max_iter=20_000)
        pdas_cfg = SolverConfig(method="active-set", tol=1e-12)
        for trial in range(100):
            A, b, obs = random_lcp(rng)
            exact = brute_force_solve(A, b, obs)
            system = SparseObstacleSystem(sp.csr_array(A), b)
            u_psor, rep_psor = psor_solve(system, obs, psor_cfg)
            u_pdas, rep_pdas = active_set_solve(system, obs, pdas_cfg)
            assert rep_psor.converged and rep_pdas.converged
            assert np.max(np.abs(u_psor - exact)) <= 1e-10
            assert np.max(np.abs(u_pdas - exact)) <= 1e-10
            assert complementarity_residual(system, u_psor, obs) <= 1e-10
            assert complementarity_residual(system, u_pdas, obs) <= 1e-10

    def test_solution_feasible_and_complementary(self):
        rng = np.random.default_rng(7)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        u, rep = active_set_solve(system, obs, SolverConfig(tol=1e-12))
        lam = A @ u - b
        assert np.all(u >= obs - 1e-12)
        assert np.all(lam >= -1e-10)
        assert np.max(np.abs(np.minimum(u - obs, lam))) <= 1e-10
        assert rep.active_count == int(np.sum(np.isclose(u, obs, atol=1e-9)))


class TestPSOR:
    def test_energy_monotone(self):
        rng = np.random.default_rng(11)
        A, b, obs = random_lcp(rng, 12)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        cfg = SolverConfig(method="psor", tol=1e-12, max_iter=500,
                           record_energy=True)
        u, rep = psor_solve(system, obs, cfg)
        trace = np.array(rep.energy_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) <= 1e-12)

    def test_iteration_budget_respected(self):
        rng = np.random.default_rng(13)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        cfg = SolverConfig(method="psor", tol=1e-14, max_iter=2)
        u, rep = psor_solve(system, obs, cfg)
        assert rep.iterations <= 2
        assert not rep.converged

    def test_omega_one_is_projected_gauss_seidel(self):
        rng = np.random.default_rng(17)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        cfg = SolverConfig(method="psor", omega=1.0, tol=1e-12, max_iter=20_000)
        u, rep = psor_solve(system, obs, cfg)
        assert rep.converged
        assert complementarity_residual(system, u, obs) <= 1e-10


class TestActiveSet:
    def test_inactive_obstacle_gives_linear_solution(self):
        rng = np.random.default_rng(19)
        A, b, _ = random_lcp(rng, 10)
        obs = np.full(10, -1e6)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        u, rep = active_set_solve(system, obs, SolverConfig(tol=1e-12))
        assert rep.active_count == 0
        assert_allclose(u, np.linalg.solve(A, b), atol=1e-9)

    def test_warm_start_agrees_with_cold(self):
        rng = np.random.default_rng(23)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        cfg = SolverConfig(tol=1e-12)
        u_cold, _ = active_set_solve(system, obs, cfg)
        x0 = obs + np.abs(rng.standard_normal(8))
        u_warm, _ = active_set_solve(system, obs, cfg, x0=x0)
        assert np.max(np.abs(u_cold - u_warm)) <= 1e-9

    def test_report_counts_inner_iterations(self):
        rng = np.random.default_rng(29)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        u, rep = active_set_solve(system, obs, SolverConfig(tol=1e-12))
        assert rep.inner_iterations >= 1
        assert rep.seconds >= 0.0
        d = rep.as_dict()
        assert set(d) == {"converged", "iterations", "residual",
                          "active_count", "seconds", "inner_iterations"}


class TestDispatcherAndConfig:
    def test_solve_lcp_dispatches(self):
        rng = np.random.default_rng(31)
        A, b, obs = random_lcp(rng)
        system = SparseObstacleSystem(sp.csr_array(A), b)
        exact = brute_force_solve(A, b, obs)
        for method in ("psor", "active-set"):
            cfg = SolverConfig(method=method, tol=1e-12, max_iter=20_000)
            u, rep = solve_lcp(system, obs, cfg)
            assert np.max(np.abs(u - exact)) <= 1e-9

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            SolverConfig(method="newton")
        with pytest.raises(ValueError):
            SolverConfig(omega=2.0)
        with pytest.raises(ValueError):
            SolverConfig(tol=0.0)
