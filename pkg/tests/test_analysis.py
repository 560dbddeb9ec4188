import math

import numpy as np
import pytest

from memabs.abstraction import MemoryMarkovModel, PiecewiseConstantDensity
from memabs.analysis import (SpectralParams, bound_combined, bound_decreasing,
                             bound_increasing, crossover_horizon,
                             estimate_spectral_params,
                             gaussian_cell_probabilities, initial_l2_norm,
                             l2_norm_piecewise, tv_monte_carlo, tv_piecewise)
from memabs.exceptions import SpectralAssumptionError
from memabs.partition import grid_partition, singleton_partition
from memabs.systems import (GaussianBelief, belief_at,
                            make_linear_gaussian_system, make_demo_linear_system)


def density(values, cell_mu, part=None):
    n = len(values)
    part = part or singleton_partition(n)
    return PiecewiseConstantDensity(partition=part,
                                    values=np.asarray(values, dtype=float),
                                    cell_mu=np.asarray(cell_mu, dtype=float))


def make_1d_system(a=0.8, m_0=0.5, s_0=0.49):
    return make_linear_gaussian_system(A=[[a]], m_w=[0.0], Sigma_w=[[1.0]],
                                       m_0=[m_0], Sigma_0=[[s_0]])


def projected_density(part, belief, channel):
    """Cell-averaged invariant-weighted density of an analytic belief."""
    cell_mu = gaussian_cell_probabilities(part, channel.m_mu, channel.Sigma_mu)
    cells = gaussian_cell_probabilities(part, belief.mean, belief.covariance)
    return PiecewiseConstantDensity(partition=part, values=cells / cell_mu,
                                    cell_mu=cell_mu)


def quadrature_tv(part, belief, channel, lo=-40.0, hi=40.0, num=400_001):
    """1-d quadrature oracle for TV(belief, piecewise projection)."""
    grid = np.linspace(lo, hi, num)
    h = grid[1] - grid[0]
    pts = grid.reshape(-1, 1)
    f_b = np.exp(-0.5 * (grid - belief.mean[0]) ** 2 / belief.covariance[0, 0])
    f_b /= math.sqrt(2 * math.pi * belief.covariance[0, 0])
    f_mu = np.exp(-0.5 * (grid - channel.m_mu[0]) ** 2 / channel.Sigma_mu[0, 0])
    f_mu /= math.sqrt(2 * math.pi * channel.Sigma_mu[0, 0])
    approx = projected_density(part, belief, channel)
    lev = approx.evaluate(pts)
    return 0.5 * float(np.sum(np.abs(f_b - lev * f_mu))) * h


# ---------------------------------------------------------------------------
# Exact and Monte-Carlo TV
# ---------------------------------------------------------------------------

def test_tv_piecewise_hand_values():
    mu = [0.5, 0.5]
    assert tv_piecewise(density([2, 0], mu), density([2, 0], mu)) == 0.0
    assert tv_piecewise(density([2, 0], mu), density([0, 2], mu)) == pytest.approx(1.0)


def test_tv_piecewise_is_a_metric():
    rng = np.random.Generator(np.random.Philox(1))
    mu = np.full(4, 0.25)
    for _ in range(50):
        trip = []
        for _ in range(3):
            v = rng.random(4)
            trip.append(density(v / (v @ mu), mu))
        a, b, c = trip
        assert tv_piecewise(a, b) == pytest.approx(tv_piecewise(b, a))
        assert tv_piecewise(a, c) <= tv_piecewise(a, b) + tv_piecewise(b, c) + 1e-12
    assert tv_piecewise(trip[0], trip[0]) == 0.0


def test_tv_piecewise_rejects_mismatched_geometry():
    with pytest.raises(ValueError):
        tv_piecewise(density([1, 1], [0.5, 0.5]),
                     density([1, 1, 1], [1 / 3] * 3))


def test_tv_monte_carlo_zero_for_invariant_vs_flat():
    system = make_demo_linear_system()
    ch = system.analytic
    part = grid_partition(2, 3)
    cell_mu = gaussian_cell_probabilities(part, ch.m_mu, ch.Sigma_mu)
    flat = PiecewiseConstantDensity(partition=part,
                                    values=np.ones(part.n), cell_mu=cell_mu)
    est = tv_monte_carlo(ch.invariant_belief(), ch, flat, 10_000, seed=0)
    assert est.value <= 3 * max(est.stderr, 1e-12)


def test_tv_monte_carlo_seed_stability():
    system = make_1d_system()
    ch = system.analytic
    part = grid_partition(1, 16, -4.0, 4.0)
    approx = projected_density(part, belief_at(ch, 3), ch)
    values = [tv_monte_carlo(belief_at(ch, 3), ch, approx, 10_000, seed=s).value
              for s in range(5)]
    assert max(values) - min(values) < 0.02


def test_tv_monte_carlo_matches_quadrature_1d():
    system = make_1d_system()
    ch = system.analytic
    part = grid_partition(1, 16, -4.0, 4.0)
    belief = belief_at(ch, 3)
    approx = projected_density(part, belief, ch)
    oracle = quadrature_tv(part, belief, ch)
    est = tv_monte_carlo(belief, ch, approx, 100_000, seed=2)
    assert abs(est.value - oracle) < 0.01


def test_tv_monte_carlo_unbiased_across_seeds():
    system = make_1d_system()
    ch = system.analytic
    part = grid_partition(1, 8, -3.0, 3.0)
    belief = belief_at(ch, 2)
    approx = projected_density(part, belief, ch)
    oracle = quadrature_tv(part, belief, ch)
    ests = [tv_monte_carlo(belief, ch, approx, 2_000, seed=s) for s in range(50)]
    mean = np.mean([e.value for e in ests])
    pooled = math.sqrt(np.mean([e.stderr ** 2 for e in ests]) / len(ests))
    assert abs(mean - oracle) < 3 * pooled


def test_tv_monte_carlo_stderr_scaling():
    system = make_1d_system()
    ch = system.analytic
    part = grid_partition(1, 16, -4.0, 4.0)
    belief = belief_at(ch, 3)
    approx = projected_density(part, belief, ch)
    e1 = tv_monte_carlo(belief, ch, approx, 100_000, seed=3)
    e2 = tv_monte_carlo(belief, ch, approx, 200_000, seed=3)
    ratio = e2.stderr / e1.stderr
    assert abs(ratio - 1 / math.sqrt(2)) < 0.2 / math.sqrt(2)


# ---------------------------------------------------------------------------
# Invariant-weighted norms and cell masses
# ---------------------------------------------------------------------------

def test_l2_norm_hand_values():
    assert l2_norm_piecewise(density([1, 1], [0.5, 0.5])) == pytest.approx(1.0)
    assert l2_norm_piecewise(density([2, 0], [0.5, 0.5])) == pytest.approx(math.sqrt(2))


def gaussian_ratio_integral_1d(m1, s1, m2, s2):
    # closed form of int f1(x)^2 / f2(x) dx for 1-d Gaussians
    q = 2.0 / s1 - 1.0 / s2
    b = 2.0 * m1 / s1 - m2 / s2
    c = m1 * m1 / s1 - 0.5 * m2 * m2 / s2
    log_z = math.log(2 * math.pi * s1) - 0.5 * math.log(2 * math.pi * s2)
    return math.exp(0.5 * b * b / q - c - log_z) * math.sqrt(2 * math.pi / q)


def test_initial_l2_norm_against_closed_form():
    system = make_1d_system(a=0.8, m_0=0.5, s_0=0.49)
    ch = system.analytic
    oracle = math.sqrt(gaussian_ratio_integral_1d(
        0.5, 0.49, float(ch.m_mu[0]), float(ch.Sigma_mu[0, 0])))
    values = [initial_l2_norm(system, num_samples=200_000, seed=s)
              for s in range(3)]
    for v in values:
        assert abs(v - oracle) / oracle < 0.02


def test_gaussian_cell_probabilities_sum_to_one():
    part = grid_partition(2, 3)
    diag = gaussian_cell_probabilities(part, [0.1, -0.2], [[0.5, 0], [0, 1.2]])
    assert diag.sum() == pytest.approx(1.0, abs=1e-9)
    dense = gaussian_cell_probabilities(part, [0.1, -0.2],
                                        [[0.5, 0.2], [0.2, 1.2]])
    assert dense.sum() == pytest.approx(1.0, abs=1e-6)


def test_gaussian_cell_probabilities_diagonal_paths_agree():
    part = grid_partition(2, 2)
    mean = [0.3, -0.1]
    cov_diag = np.diag([0.8, 0.6])
    fast = gaussian_cell_probabilities(part, mean, cov_diag)
    slow = gaussian_cell_probabilities(part, mean,
                                       cov_diag + np.array([[0, 1e-9], [1e-9, 0]]))
    assert np.allclose(fast, slow, atol=1e-5)


# ---------------------------------------------------------------------------
# Spectral parameters and bounds
# ---------------------------------------------------------------------------

def two_state_model(p=0.9, q=0.8):
    P = np.array([[p, 1 - p], [1 - q, q]])
    pi = np.array([1 - q, 1 - p]) / (2 - p - q)
    return MemoryMarkovModel.from_probabilities(1, 2, P, pi, pi)


def test_spectral_estimate_two_state_hand_value():
    # eigenvalues of [[0.9, 0.1], [0.2, 0.8]] are 1 and 0.7
    params = estimate_spectral_params(two_state_model(), m=1)
    assert abs(params.e1 - 0.7) < 1e-8
    assert params.provenance == "estimated"


def test_spectral_estimate_rejects_identity_and_periodic():
    pi = np.array([0.5, 0.5])
    identity = MemoryMarkovModel.from_probabilities(1, 2, np.eye(2), pi, pi)
    with pytest.raises(SpectralAssumptionError):
        estimate_spectral_params(identity, m=1)
    flip = MemoryMarkovModel.from_probabilities(
        1, 2, np.array([[0.0, 1.0], [1.0, 0.0]]), pi, pi)
    with pytest.raises(SpectralAssumptionError):
        estimate_spectral_params(flip, m=1)


def test_spectral_estimate_exhausts_to_zero_radius():
    pi = np.full(3, 1 / 3)
    P = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])
    model = MemoryMarkovModel.from_probabilities(1, 3, P, pi, pi)
    params = estimate_spectral_params(model, m=2)
    assert abs(params.e1 - 0.25) < 1e-8
    assert params.r == 0.0


def test_bound_increasing_hand_values():
    params = SpectralParams(m=1, e1=0.5, delta=0.1, r=0.05, v0_norm2=1.0,
                            tv0=0.0)
    assert bound_increasing(params, k=1, ell=1) == pytest.approx(0.1)
    flat = SpectralParams(m=1, e1=0.5, delta=0.0, r=0.0, v0_norm2=3.0, tv0=0.2)
    for k in (1, 5, 50):
        assert bound_increasing(flat, k, 1) == pytest.approx(0.2)


def test_bound_decreasing_hand_values():
    params = SpectralParams(m=1, e1=0.5, delta=0.0, r=0.0, v0_norm2=2.0, tv0=0.0)
    assert bound_decreasing(params, k=2, ell=1) == pytest.approx(0.5)
    unit = SpectralParams(m=1, e1=0.5, delta=0.0, r=0.0, v0_norm2=1.0, tv0=0.0)
    assert bound_decreasing(unit, k=1, ell=1) == pytest.approx(0.5)


def test_bound_monotonicity():
    params = SpectralParams(m=2, e1=0.6, delta=0.05, r=0.01, v0_norm2=2.0,
                            tv0=0.05)
    incs = [bound_increasing(params, k, 1) for k in range(1, 60)]
    decs = [bound_decreasing(params, k, 1) for k in range(1, 60)]
    assert all(b >= a for a, b in zip(incs, incs[1:]))
    assert all(b < a for a, b in zip(decs, decs[1:]))
    assert decs[-1] < 1e-10


def test_bound_combined_min_and_clip():
    params = SpectralParams(m=1, e1=0.5, delta=0.1, r=0.05, v0_norm2=20.0,
                            tv0=0.0)
    cb = bound_combined(params, k=1, ell=1)
    assert cb.raw == pytest.approx(min(bound_increasing(params, 1, 1),
                                       bound_decreasing(params, 1, 1)))
    assert cb.raw > 1.0 and cb.value == 1.0


def test_bound_combined_trivial_projection():
    params = SpectralParams(m=1, e1=0.5, delta=0.0, r=0.0, v0_norm2=2.0,
                            tv0=0.3)
    for k in (1, 3, 10):
        want = min(0.3, 0.5 ** k * 2.0)
        assert bound_combined(params, k, 1).raw == pytest.approx(want)


def test_crossover_horizon_matches_linear_scan():
    params = SpectralParams(m=1, e1=0.5, delta=0.1, r=0.05, v0_norm2=1.0,
                            tv0=0.0)
    got = crossover_horizon(params, ell=1)
    scan = next(k for k in range(1, 1000)
                if bound_decreasing(params, k, 1) <= bound_increasing(params, k, 1))
    assert got == scan
    # zero projection error: the increasing bound stays at tv0 = 0, so the
    # strictly positive decreasing bound never takes over
    never = SpectralParams(m=1, e1=0.999999, delta=0.0, r=0.0, v0_norm2=1.0,
                           tv0=0.0)
    assert crossover_horizon(never, ell=1, k_max=10) is None
