"""Continuous-state discrete-time stochastic systems and their simulators.

A system is a transition-kernel sampler plus an initial-state sampler.  The
linear-Gaussian family additionally carries an analytic channel (dynamics
matrix, noise and initial Gaussians, invariant Gaussian) so that exact
distribution propagation and density ratios are available as ground truth.

Randomness is managed with counter-based Philox streams: one stream per
trajectory, derived from a user seed, so simulation is reproducible and
embarrassingly parallel across seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import UnstableDynamicsError

TWO_PI = 2.0 * math.pi

StepSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]
InitialSampler = Callable[[np.random.Generator], np.ndarray]
TrajectorySampler = Callable[[int, np.random.Generator], np.ndarray]
BatchInitialSampler = Callable[[int, np.random.Generator], np.ndarray]
BatchStepSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _check_symmetric(M: np.ndarray, name: str, tol: float = 1e-12) -> None:
    if not np.allclose(M, M.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class GaussianChannel:
    """Analytic description of a stable linear system x' = A x + w.

    ``m_mu``/``Sigma_mu`` are the mean and covariance of the unique invariant
    Gaussian; use :meth:`from_dynamics` to have them solved automatically.
    """

    A: np.ndarray
    m_w: np.ndarray
    Sigma_w: np.ndarray
    m_0: np.ndarray
    Sigma_0: np.ndarray
    m_mu: np.ndarray
    Sigma_mu: np.ndarray

    def __post_init__(self):
        for name in ("A", "m_w", "Sigma_w", "m_0", "Sigma_0", "m_mu", "Sigma_mu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise ValueError("A must be square")
        for name in ("Sigma_w", "Sigma_0", "Sigma_mu"):
            M = getattr(self, name)
            if M.shape != (d, d):
                raise ValueError(f"{name} has wrong shape")
            _check_symmetric(M, name)
        radius = float(np.max(np.abs(np.linalg.eigvals(self.A))))
        if radius >= 1.0:
            raise UnstableDynamicsError(
                f"spectral radius {radius:.6f} >= 1: no invariant Gaussian exists"
            )
        residual = self.Sigma_mu - self.A @ self.Sigma_mu @ self.A.T - self.Sigma_w
        if float(np.max(np.abs(residual))) > 1e-10:
            raise ValueError("Sigma_mu does not satisfy the invariance fixed point")

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_dynamics(cls, A, m_w, Sigma_w, m_0, Sigma_0) -> "GaussianChannel":
        A = np.asarray(A, dtype=np.float64)
        m_w = np.asarray(m_w, dtype=np.float64)
        Sigma_mu = solve_invariant_gaussian(A, Sigma_w)
        m_mu = np.linalg.solve(np.eye(A.shape[0]) - A, m_w)
        return cls(A=A, m_w=m_w, Sigma_w=Sigma_w, m_0=m_0, Sigma_0=Sigma_0,
                   m_mu=m_mu, Sigma_mu=Sigma_mu)

    def initial_belief(self) -> "GaussianBelief":
        return GaussianBelief(mean=self.m_0, covariance=self.Sigma_0, time_index=0)

    def invariant_belief(self) -> "GaussianBelief":
        return GaussianBelief(mean=self.m_mu, covariance=self.Sigma_mu, time_index=0)


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian state distribution N(mean, covariance) at a given time."""

    mean: np.ndarray
    covariance: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=np.float64))
        if self.time_index < 0:
            raise ValueError("time_index must be nonnegative")
        _check_symmetric(self.covariance, "covariance")


@dataclass(frozen=True)
class StochasticSystem:
    """Sampling interface for x_{k+1} ~ tau(.|x_k), x_0 ~ lambda_0.

    The batch/trajectory samplers are optional fast paths; when absent the
    generic per-step loop is used.  All callables draw exclusively from the
    generator they are handed, so a fixed seed fixes the realisation.
    """

    dimension: int
    step_sampler: StepSampler
    initial_sampler: InitialSampler
    analytic: Optional[GaussianChannel] = None
    trajectory_sampler: Optional[TrajectorySampler] = None
    initial_batch_sampler: Optional[BatchInitialSampler] = None
    step_batch_sampler: Optional[BatchStepSampler] = None


def solve_invariant_gaussian(A, Sigma_w, tol: float = 1e-12,
                             max_iter: int = 10**6) -> np.ndarray:
    """Invariant covariance of x' = A x + w via fixed-point iteration.

    Iterates S <- A S A^T + Sigma_w from S = Sigma_w until the max-entry
    change drops below ``tol``.  Requires spectral radius of A below 1.
    """
    A = np.asarray(A, dtype=np.float64)
    Sigma_w = np.asarray(Sigma_w, dtype=np.float64)
    _check_symmetric(Sigma_w, "Sigma_w")
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius >= 1.0:
        raise UnstableDynamicsError(f"spectral radius {radius:.6f} >= 1")
    S = Sigma_w.copy()
    for _ in range(max_iter):
        nxt = A @ S @ A.T + Sigma_w
        if float(np.max(np.abs(nxt - S))) < tol:
            S = nxt
            break
        S = nxt
    else:
        raise UnstableDynamicsError("invariant covariance iteration did not converge")
    return 0.5 * (S + S.T)


def gaussian_propagate(belief: GaussianBelief, channel: GaussianChannel) -> GaussianBelief:
    """One-step analytic propagation: mean' = A mean + m_w,
    cov' = A cov A^T + Sigma_w."""
    if belief.mean.shape[0] != channel.dimension:
        raise ValueError("belief/channel dimension mismatch")
    mean = channel.A @ belief.mean + channel.m_w
    cov = channel.A @ belief.covariance @ channel.A.T + channel.Sigma_w
    return GaussianBelief(mean=mean, covariance=0.5 * (cov + cov.T),
                          time_index=belief.time_index + 1)


def belief_at(channel: GaussianChannel, k: int) -> GaussianBelief:
    """Analytic state distribution after ``k`` steps from the initial belief."""
    belief = channel.initial_belief()
    for _ in range(k):
        belief = gaussian_propagate(belief, channel)
    return belief


def _gaussian_logpdf(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = points.shape[1]
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive-definite") from exc
    diff = points - mean
    sol = np.linalg.solve(L, diff.T)
    quad = np.sum(sol * sol, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (quad + logdet + d * math.log(TWO_PI))


def density_ratio(belief: GaussianBelief, channel: GaussianChannel,
                  points: np.ndarray) -> np.ndarray:
    """Ratio of the belief's Lebesgue density to the invariant one at
    ``points`` (vectorized); this is the invariant-weighted density."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != channel.dimension:
        raise ValueError("points/channel dimension mismatch")
    log_num = _gaussian_logpdf(points, belief.mean, belief.covariance)
    log_den = _gaussian_logpdf(points, channel.m_mu, channel.Sigma_mu)
    return np.exp(log_num - log_den)


def mu_weighted_density(belief: GaussianBelief, channel: GaussianChannel, x) -> float:
    """Density of the belief with respect to the invariant measure at ``x``."""
    return float(density_ratio(belief, channel, np.atleast_2d(x))[0])


def simulate_trajectory(system: StochasticSystem, horizon: int, seed: int) -> np.ndarray:
    """States x_0..x_horizon as a (horizon+1, d) array, deterministic in seed."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = _rng(seed)
    if system.trajectory_sampler is not None:
        return system.trajectory_sampler(horizon, rng)
    x = np.asarray(system.initial_sampler(rng), dtype=np.float64)
    out = np.empty((horizon + 1, system.dimension), dtype=np.float64)
    out[0] = x
    for k in range(horizon):
        x = np.asarray(system.step_sampler(x, rng), dtype=np.float64)
        if x.shape != (system.dimension,):
            raise ValueError("step_sampler changed the state dimension")
        out[k + 1] = x
    return out


def simulate_prefix_batch(system: StochasticSystem, count: int, ell: int,
                          seed: int) -> np.ndarray:
    """``count`` independent trajectories of ``ell`` states each, shape
    (count, ell, d).  Each trajectory starts from a fresh initial draw."""
    if count < 1:
        raise ValueError("count must be positive")
    if ell < 1:
        raise ValueError("ell must be positive")
    rng = _rng(seed)
    if system.initial_batch_sampler is not None and system.step_batch_sampler is not None:
        states = np.empty((count, ell, system.dimension), dtype=np.float64)
        x = system.initial_batch_sampler(count, rng)
        states[:, 0, :] = x
        for t in range(1, ell):
            x = system.step_batch_sampler(x, rng)
            states[:, t, :] = x
        return states
    rngs = _spawn_rngs(seed, count)
    states = np.empty((count, ell, system.dimension), dtype=np.float64)
    for i, child in enumerate(rngs):
        x = np.asarray(system.initial_sampler(child), dtype=np.float64)
        states[i, 0, :] = x
        for t in range(1, ell):
            x = np.asarray(system.step_sampler(x, child), dtype=np.float64)
            states[i, t, :] = x
    return states


def make_linear_gaussian_system(A, m_w, Sigma_w, m_0, Sigma_0) -> StochasticSystem:
    """Linear system with Gaussian noise and Gaussian initial condition,
    carrying the analytic channel for exact propagation."""
    channel = GaussianChannel.from_dynamics(A, m_w, Sigma_w, m_0, Sigma_0)
    d = channel.dimension
    L_w = np.linalg.cholesky(channel.Sigma_w) if np.any(channel.Sigma_w) else np.zeros((d, d))
    L_0 = np.linalg.cholesky(channel.Sigma_0) if np.any(channel.Sigma_0) else np.zeros((d, d))
    A_arr, m_w_arr, m_0_arr = channel.A, channel.m_w, channel.m_0

    def step(x, rng):
        return A_arr @ x + m_w_arr + L_w @ rng.standard_normal(d)

    def initial(rng):
        return m_0_arr + L_0 @ rng.standard_normal(d)

    def trajectory(horizon, rng):
        from . import _kernels

        x0 = m_0_arr + L_0 @ rng.standard_normal(d)
        noise = rng.standard_normal((horizon, d)) @ L_w.T
        return _kernels.affine_gaussian_path(A_arr, m_w_arr, x0, noise)

    def initial_batch(count, rng):
        return m_0_arr + rng.standard_normal((count, d)) @ L_0.T

    def step_batch(states, rng):
        return states @ A_arr.T + m_w_arr + rng.standard_normal(states.shape) @ L_w.T

    return StochasticSystem(
        dimension=d,
        step_sampler=step,
        initial_sampler=initial,
        analytic=channel,
        trajectory_sampler=trajectory,
        initial_batch_sampler=initial_batch,
        step_batch_sampler=step_batch,
    )


def make_demo_linear_system() -> StochasticSystem:
    """The bundled 2-d weakly coupled slow/fast linear benchmark."""
    A = np.array([[0.995, 0.005], [0.0, 0.98]])
    return make_linear_gaussian_system(
        A=A,
        m_w=np.zeros(2),
        Sigma_w=0.07 * np.eye(2),
        m_0=np.array([-0.4, -0.4]),
        Sigma_0=0.3 * np.eye(2),
    )


def make_rotation_system(step: float = math.pi / 2,
                         noise_width: float = math.pi / 10) -> StochasticSystem:
    """Circle rotation x' = x + step + w (mod 2*pi) with w uniform on
    [0, noise_width]; initial state uniform on [0, 2*pi).

    The noise law is an assumption: only its support is prescribed by the
    construction, and uniform is the minimal choice.
    """
    if noise_width < 0:
        raise ValueError("noise_width must be nonnegative")

    def sample_noise(rng, size=None):
        if noise_width == 0:
            return 0.0 if size is None else np.zeros(size)
        return rng.uniform(0.0, noise_width, size=size)

    def step_fn(x, rng):
        return np.array([(x[0] + step + sample_noise(rng)) % TWO_PI])

    def initial(rng):
        return np.array([rng.uniform(0.0, TWO_PI)])

    def trajectory(horizon, rng):
        x0 = rng.uniform(0.0, TWO_PI)
        increments = step + sample_noise(rng, horizon)
        path = np.empty(horizon + 1, dtype=np.float64)
        path[0] = x0
        if horizon:
            path[1:] = x0 + np.cumsum(increments)
        return (path % TWO_PI).reshape(-1, 1)

    def initial_batch(count, rng):
        return rng.uniform(0.0, TWO_PI, size=(count, 1))

    def step_batch(states, rng):
        return (states + step + sample_noise(rng, states.shape)) % TWO_PI

    return StochasticSystem(
        dimension=1,
        step_sampler=step_fn,
        initial_sampler=initial,
        analytic=None,
        trajectory_sampler=trajectory,
        initial_batch_sampler=initial_batch,
        step_batch_sampler=step_batch,
    )


def make_finite_chain_system(P, initial_dist) -> StochasticSystem:
    """Finite Markov chain embedded as a degenerate 1-d continuous system;
    state i is the real number i.  Useful as an exactly solvable oracle."""
    P = np.asarray(P, dtype=np.float64)
    initial_dist = np.asarray(initial_dist, dtype=np.float64)
    n = P.shape[0]
    if P.shape != (n, n) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("P must be square and row-stochastic")
    if initial_dist.shape != (n,) or not math.isclose(float(initial_dist.sum()), 1.0,
                                                      abs_tol=1e-12):
        raise ValueError("initial_dist must be a probability vector of matching size")
    cum_rows = np.cumsum(P, axis=1)
    cum_init = np.cumsum(initial_dist)

    def step(x, rng):
        state = int(round(x[0]))
        return np.array([float(np.searchsorted(cum_rows[state], rng.random(), side="right"))])

    def initial(rng):
        return np.array([float(np.searchsorted(cum_init, rng.random(), side="right"))])

    def trajectory(horizon, rng):
        u = rng.random(horizon + 1)
        path = np.empty(horizon + 1, dtype=np.float64)
        state = int(np.searchsorted(cum_init, u[0], side="right"))
        path[0] = state
        for k in range(horizon):
            state = int(np.searchsorted(cum_rows[state], u[k + 1], side="right"))
            path[k + 1] = state
        return path.reshape(-1, 1)

    def initial_batch(count, rng):
        return np.searchsorted(cum_init, rng.random(count), side="right").astype(
            np.float64).reshape(-1, 1)

    def step_batch(states, rng):
        idx = np.rint(states[:, 0]).astype(np.int64)
        u = rng.random(len(idx))
        nxt = (u[:, None] >= cum_rows[idx]).sum(axis=1)
        return nxt.astype(np.float64).reshape(-1, 1)

    return StochasticSystem(
        dimension=1,
        step_sampler=step,
        initial_sampler=initial,
        analytic=None,
        trajectory_sampler=trajectory,
        initial_batch_sampler=initial_batch,
        step_batch_sampler=step_batch,
    )
