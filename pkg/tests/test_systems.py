import math

import numpy as np
import pytest

from memabs.exceptions import UnstableDynamicsError
from memabs.systems import (GaussianBelief, belief_at, density_ratio,
                            gaussian_propagate, make_demo_linear_system,
                            make_finite_chain_system,
                            make_linear_gaussian_system, make_rotation_system,
                            mu_weighted_density, simulate_prefix_batch,
                            simulate_trajectory, solve_invariant_gaussian)

DEMO_SIGMA_MU = np.array([[7.36896, 0.347856], [0.347856, 1.76768]])


def test_invariant_covariance_scalar_closed_form():
    # a=0.5, sigma^2=1: geometric series 1/(1-0.25)
    S = solve_invariant_gaussian(np.array([[0.5]]), np.array([[1.0]]))
    assert math.isclose(S[0, 0], 4.0 / 3.0, rel_tol=0, abs_tol=1e-10)


def test_invariant_covariance_memoryless():
    Sw = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.allclose(solve_invariant_gaussian(np.zeros((2, 2)), Sw), Sw)


def test_invariant_covariance_demo_benchmark():
    ch = make_demo_linear_system().analytic
    assert np.allclose(ch.Sigma_mu, DEMO_SIGMA_MU, atol=1e-3, rtol=0)
    residual = ch.Sigma_mu - ch.A @ ch.Sigma_mu @ ch.A.T - ch.Sigma_w
    assert np.max(np.abs(residual)) <= 1e-10


def test_invariant_covariance_rejects_unstable():
    with pytest.raises(UnstableDynamicsError):
        solve_invariant_gaussian(np.array([[1.0]]), np.array([[1.0]]))


def test_gaussian_propagate_hand_mean():
    ch = make_demo_linear_system().analytic
    out = gaussian_propagate(ch.initial_belief(), ch)
    assert np.allclose(out.mean, [-0.4 * 0.995 + -0.4 * 0.005, -0.4 * 0.98])
    assert out.time_index == 1


def test_gaussian_propagate_identity_channel():
    ch = make_linear_gaussian_system(
        A=0.5 * np.eye(1), m_w=[0.0], Sigma_w=[[1.0]],
        m_0=[2.0], Sigma_0=[[0.25]]).analytic
    b = GaussianBelief(mean=[2.0], covariance=[[0.25]])
    out = gaussian_propagate(b, ch)
    assert np.allclose(out.mean, [1.0])
    assert np.allclose(out.covariance, [[0.25 * 0.25 + 1.0]])


def test_gaussian_propagate_fixes_invariant_belief():
    ch = make_demo_linear_system().analytic
    out = gaussian_propagate(ch.invariant_belief(), ch)
    assert np.allclose(out.mean, ch.m_mu, atol=1e-10)
    assert np.allclose(out.covariance, ch.Sigma_mu, atol=1e-10)


def test_density_ratio_hand_value_1d():
    # N(0,1) over N(0,2) at 0: ratio of normalizing constants sqrt(2)
    ch = make_linear_gaussian_system(
        A=[[0.70710678118654752]], m_w=[0.0], Sigma_w=[[1.0]],
        m_0=[0.0], Sigma_0=[[1.0]]).analytic
    assert math.isclose(ch.Sigma_mu[0, 0], 2.0, abs_tol=1e-9)
    b = GaussianBelief(mean=[0.0], covariance=[[1.0]])
    assert math.isclose(mu_weighted_density(b, ch, [0.0]), math.sqrt(2.0),
                        abs_tol=1e-9)


def test_density_ratio_of_invariant_is_one():
    ch = make_demo_linear_system().analytic
    pts = np.array([[0.0, 0.0], [1.0, -2.0], [-5.0, 3.0]])
    assert np.allclose(density_ratio(ch.invariant_belief(), ch, pts), 1.0)


def test_density_integrates_to_one_under_invariant():
    ch = make_demo_linear_system().analytic
    rng = np.random.Generator(np.random.Philox(3))
    L = np.linalg.cholesky(ch.Sigma_mu)
    pts = ch.m_mu + rng.standard_normal((100_000, 2)) @ L.T
    vals = density_ratio(ch.initial_belief(), ch, pts)
    assert abs(vals.mean() - 1.0) < 0.02


def test_trajectory_deterministic_and_seed_sensitive():
    system = make_demo_linear_system()
    a = simulate_trajectory(system, 50, seed=11)
    b = simulate_trajectory(system, 50, seed=11)
    c = simulate_trajectory(system, 50, seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_trajectory_zero_noise_fixed_point():
    system = make_linear_gaussian_system(
        A=0.999999 * np.eye(1), m_w=[0.0], Sigma_w=[[0.0]],
        m_0=[3.0], Sigma_0=[[0.0]])
    path = simulate_trajectory(system, 3, seed=0)
    assert np.allclose(path.ravel(), 3.0, atol=1e-4)


def test_trajectory_converges_to_invariant_covariance():
    system = make_demo_linear_system()
    path = simulate_trajectory(system, 100_000, seed=0)
    emp = np.cov(path[-50_000:].T)
    assert np.max(np.abs(emp - system.analytic.Sigma_mu)) < 0.15


def test_prefix_batch_shape_and_initial_law():
    system = make_demo_linear_system()
    batch = simulate_prefix_batch(system, 50_000, 2, seed=4)
    assert batch.shape == (50_000, 2, 2)
    assert np.allclose(batch[:, 0, :].mean(axis=0), [-0.4, -0.4], atol=0.02)
    assert np.allclose(batch[:, 0, :].var(axis=0), 0.3, atol=0.02)


def test_rotation_one_step_support():
    system = make_rotation_system()
    out = system.step_sampler(np.array([0.0]),
                              np.random.Generator(np.random.Philox(0)))
    assert math.pi / 2 <= out[0] <= math.pi / 2 + math.pi / 10


def test_rotation_zero_noise_quarter_turn():
    system = make_rotation_system(noise_width=0.0)
    out = system.step_sampler(np.array([0.0]),
                              np.random.Generator(np.random.Philox(0)))
    assert math.isclose(out[0], math.pi / 2, abs_tol=1e-12)


def test_rotation_states_stay_on_circle():
    system = make_rotation_system()
    path = simulate_trajectory(system, 10_000, seed=5)
    assert np.all(path >= 0.0) and np.all(path < 2 * math.pi)


def test_finite_chain_trajectory_matches_matrix_powers():
    P = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])
    init = np.array([0.7, 0.2, 0.1])
    system = make_finite_chain_system(P, init)
    path = simulate_trajectory(system, 200_000, seed=9).ravel().astype(int)
    # stationary distribution is uniform by symmetry
    freq = np.bincount(path[1000:], minlength=3) / (len(path) - 1000)
    assert np.allclose(freq, 1 / 3, atol=0.01)
    batch = simulate_prefix_batch(system, 100_000, 1, seed=10)
    emp = np.bincount(batch.ravel().astype(int), minlength=3) / 100_000
    assert np.allclose(emp, init, atol=0.01)
