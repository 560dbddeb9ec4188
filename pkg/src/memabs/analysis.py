"""Total-variation metrics, invariant-weighted norms, spectral parameters,
and the two-regime error bounds.

Total variation between densities on the same partition is exact (half the
weighted L1 distance); against an analytic Gaussian ground truth it is
estimated by Monte-Carlo averaging over invariant-measure samples.  The
Monte-Carlo estimator carries the 1/N normalization of an empirical mean
together with its standard error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from .abstraction import MemoryMarkovModel, PiecewiseConstantDensity
from .exceptions import (CapabilityError, EigenConvergenceError,
                         SpectralAssumptionError)
from .partition import Partition
from .systems import GaussianBelief, GaussianChannel, StochasticSystem, density_ratio


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------

def tv_piecewise(a: PiecewiseConstantDensity, b: PiecewiseConstantDensity) -> float:
    """Exact total variation between two densities on the same partition:
    half the cell_mu-weighted L1 distance."""
    if not a.partition.same_geometry(b.partition):
        raise ValueError("densities live on different partitions")
    if not np.allclose(a.cell_mu, b.cell_mu, atol=1e-12, rtol=0.0):
        raise ValueError("densities use different cell weights")
    return 0.5 * float(np.sum(np.abs(a.values - b.values) * a.cell_mu))


class TvEstimate(NamedTuple):
    value: float
    stderr: float
    num_samples: int


def sample_invariant(channel: GaussianChannel, num_samples: int,
                     rng: np.random.Generator) -> np.ndarray:
    L = np.linalg.cholesky(channel.Sigma_mu)
    return channel.m_mu + rng.standard_normal((num_samples, channel.dimension)) @ L.T


def tv_monte_carlo_at_points(belief: GaussianBelief, channel: GaussianChannel,
                             approx: PiecewiseConstantDensity,
                             points: np.ndarray) -> TvEstimate:
    """Monte-Carlo total variation evaluated at given invariant samples."""
    num_samples = points.shape[0]
    exact = density_ratio(belief, channel, points)
    approx_vals = approx.evaluate(points)
    contributions = 0.5 * np.abs(exact - approx_vals)
    value = float(contributions.mean())
    stderr = float(contributions.std(ddof=1) / math.sqrt(num_samples)) if num_samples > 1 else 0.0
    return TvEstimate(value=value, stderr=stderr, num_samples=num_samples)


def tv_monte_carlo(belief: GaussianBelief, channel: GaussianChannel,
                   approx: PiecewiseConstantDensity, num_samples: int,
                   seed: int = 0) -> TvEstimate:
    """Monte-Carlo total variation between the analytic Gaussian state
    distribution and a piecewise-constant approximation.

    Draws i.i.d. points from the invariant Gaussian and averages half the
    absolute difference of the two invariant-weighted densities.  Returns the
    estimate with its standard error.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    points = sample_invariant(channel, num_samples, rng)
    return tv_monte_carlo_at_points(belief, channel, approx, points)


# ---------------------------------------------------------------------------
# Invariant-weighted L2 norms
# ---------------------------------------------------------------------------

def l2_norm_piecewise(density: PiecewiseConstantDensity) -> float:
    """sqrt(sum values**2 * cell_mu)."""
    return math.sqrt(float(np.sum(density.values ** 2 * density.cell_mu)))


def initial_l2_norm(system: StochasticSystem, num_samples: int = 100_000,
                    seed: int = 0) -> float:
    """Monte-Carlo invariant-weighted L2 norm of the initial density.

    For a Gaussian channel the joint initial/invariant path densities share
    all transition factors, so the path-density ratio collapses to the
    single-state ratio at the first coordinate; the norm is estimated as the
    root mean square of that ratio over invariant samples.
    """
    if system.analytic is None:
        raise CapabilityError("initial L2 norm needs an analytic channel")
    channel = system.analytic
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    points = sample_invariant(channel, num_samples, rng)
    v0 = density_ratio(channel.initial_belief(), channel, points)
    return math.sqrt(float(np.mean(v0 ** 2)))


# ---------------------------------------------------------------------------
# Analytic Gaussian cell masses
# ---------------------------------------------------------------------------

def _cell_edges(partition: Partition) -> list[np.ndarray]:
    if partition.descriptor.get("kind") != "grid":
        raise CapabilityError("analytic cell masses are defined for grid partitions")
    edges = []
    for cuts in partition.descriptor["cuts"]:
        edges.append(np.concatenate(([-np.inf], np.asarray(cuts, dtype=np.float64), [np.inf])))
    return edges


def gaussian_cell_probabilities(partition: Partition, mean, cov) -> np.ndarray:
    """Exact Gaussian mass of every grid cell.

    Diagonal covariances use per-dimension normal CDF differences; general
    covariances use inclusion-exclusion over cell corners with the
    multivariate normal CDF.
    """
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    edges = _cell_edges(partition)
    d = partition.dimension
    per_dim_cells = [len(e) - 1 for e in edges]

    if np.allclose(cov, np.diag(np.diag(cov)), atol=1e-15, rtol=0.0):
        sd = np.sqrt(np.diag(cov))
        per_dim = []
        for axis in range(d):
            z = (edges[axis] - mean[axis]) / sd[axis]
            cdf = ndtr(z)
            per_dim.append(np.diff(cdf))
        out = per_dim[0]
        for axis in range(1, d):
            out = np.multiply.outer(out, per_dim[axis])
        return out.ravel()

    mvn = multivariate_normal(mean=mean, cov=cov)

    def rect_cdf(point: np.ndarray) -> float:
        if np.any(point == -np.inf):
            return 0.0
        finite = np.where(np.isfinite(point), point, 1e12)
        return float(mvn.cdf(finite))

    out = np.empty(partition.n, dtype=np.float64)
    for flat, cell in enumerate(itertools.product(*(range(c) for c in per_dim_cells))):
        lows = np.array([edges[axis][cell[axis]] for axis in range(d)])
        highs = np.array([edges[axis][cell[axis] + 1] for axis in range(d)])
        total = 0.0
        for corner in itertools.product((0, 1), repeat=d):
            point = np.where(np.array(corner) == 1, highs, lows)
            total += (-1.0) ** (d - sum(corner)) * rect_cdf(point)
        out[flat] = max(total, 0.0)
    return out


# ---------------------------------------------------------------------------
# Spectral parameters and bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralParams:
    """Inputs of the two-regime total-variation bounds.

    ``e1`` is the subdominant eigenvalue of the lifted propagation operator,
    ``delta`` the maximal projection error of its dominant eigenfunctions
    onto the piecewise-constant subspace, ``r`` the modulus radius of the
    remaining spectrum, ``v0_norm2`` the invariant-weighted L2 norm of the
    initial joint density and ``tv0`` the initial-distribution total
    variation.  ``provenance`` records whether the values were supplied
    exactly or estimated heuristically from the abstraction matrix.
    """

    m: int
    e1: float
    delta: float
    r: float
    v0_norm2: float
    tv0: float
    provenance: str = "supplied"

    def __post_init__(self):
        if not 0.0 < self.e1 < 1.0:
            raise ValueError("e1 must lie strictly in (0, 1)")
        if self.delta < 0 or self.r < 0 or self.v0_norm2 < 0:
            raise ValueError("delta, r and v0_norm2 must be nonnegative")
        if not 0.0 <= self.tv0 <= 1.0:
            raise ValueError("tv0 must lie in [0, 1]")
        if self.provenance not in ("supplied", "estimated"):
            raise ValueError("provenance must be 'supplied' or 'estimated'")


def bound_increasing(params: SpectralParams, k: int, ell: int) -> float:
    """Accumulated-projection-error bound; nondecreasing in the horizon."""
    if k < ell:
        raise ValueError("bound defined for k >= ell")
    geom = (1.0 - params.e1 ** (k - ell + 1)) / (1.0 - params.e1)
    return params.tv0 + (params.m * params.e1 * params.delta + params.r) * geom * params.v0_norm2


def bound_decreasing(params: SpectralParams, k: int, ell: int) -> float:
    """Mixing-to-invariance bound; decreasing geometrically in the horizon."""
    if k < ell:
        raise ValueError("bound defined for k >= ell")
    return params.e1 ** (k - ell + 1) * params.v0_norm2


class CombinedBound(NamedTuple):
    value: float   # min of the two regimes, clipped at 1
    raw: float     # unclipped min (bounds frequently exceed 1)


def bound_combined(params: SpectralParams, k: int, ell: int) -> CombinedBound:
    raw = min(bound_increasing(params, k, ell), bound_decreasing(params, k, ell))
    return CombinedBound(value=min(raw, 1.0), raw=raw)


def crossover_horizon(params: SpectralParams, ell: int,
                      k_max: int = 10**6) -> Optional[int]:
    """Smallest horizon at which the decreasing bound takes over (binary
    search over the monotone predicate); None if it never does by k_max."""

    def dec_wins(k: int) -> bool:
        return bound_decreasing(params, k, ell) <= bound_increasing(params, k, ell)

    if not dec_wins(k_max):
        return None
    lo, hi = ell, k_max
    if dec_wins(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if dec_wins(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Heuristic spectral estimation (power iteration with deflation)
# ---------------------------------------------------------------------------

def _power_iteration(matvec: Callable[[np.ndarray], np.ndarray], size: int,
                     rng: np.random.Generator, tol: float = 1e-10,
                     max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Dominant real eigenpair of a (deflated) linear operator."""
    x = rng.standard_normal(size)
    x /= np.linalg.norm(x)
    lam_prev = np.inf
    for _ in range(max_iter):
        y = matvec(x)
        norm = np.linalg.norm(y)
        if norm < 1e-300:
            return 0.0, x
        lam = float(x @ y)
        x = y / norm
        if abs(lam - lam_prev) < tol * max(1.0, abs(lam)):
            return lam, x
        lam_prev = lam
    raise EigenConvergenceError(
        "power iteration did not converge (complex or defective dominant eigenvalue?)"
    )


def _dominant_moduli(P: sp.csr_matrix, stationary: np.ndarray, count: int,
                     seed: int = 0) -> list[float]:
    """Moduli of the ``count`` largest nontrivial eigenvalues of a
    row-stochastic matrix, via power iteration with two-sided deflation of
    the known stationary pair (eigenvalue 1, right vector of ones)."""
    size = P.shape[0]
    Pt = P.T.tocsr()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    ones = np.ones(size)
    # (eigenvalue, right vector, left vector, w@v) deflation terms
    terms: list[tuple[float, np.ndarray, np.ndarray, float]] = [
        (1.0, ones, stationary, float(stationary @ ones))
    ]

    def matvec(x: np.ndarray) -> np.ndarray:
        y = P @ x
        for lam, v, w, wv in terms:
            y = y - lam * v * (w @ x) / wv
        return y

    def matvec_t(x: np.ndarray) -> np.ndarray:
        y = Pt @ x
        for lam, v, w, wv in terms:
            y = y - lam * w * (v @ x) / wv
        return y

    moduli: list[float] = []
    for _ in range(count):
        if len(terms) >= size:
            moduli.append(0.0)
            continue
        lam, v = _power_iteration(matvec, size, rng)
        moduli.append(abs(lam))
        if abs(lam) < 1e-14:
            continue
        _, w = _power_iteration(matvec_t, size, rng)
        wv = float(w @ v)
        if abs(wv) < 1e-12:
            raise EigenConvergenceError("deflation failed: near-orthogonal eigenvectors")
        terms.append((lam, v, w, wv))
    return moduli


def estimate_spectral_params(model: MemoryMarkovModel, m: int, delta: float = 0.0,
                             tv0: float = 0.0, v0_norm2: float = 1.0,
                             seed: int = 0) -> SpectralParams:
    """Heuristic spectral parameters from the abstraction matrix.

    ``e1`` is the second-largest eigenvalue modulus of the sparse transition
    matrix and ``r`` the (m+1)-th largest; both are proxies for the lifted
    operator's spectrum with no formal guarantee, hence the loud
    ``estimated`` provenance.  ``delta`` cannot be computed without the true
    eigenfunctions and stays a user input (default 0).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not np.all(model.row_observed):
        raise ValueError("spectral estimation needs a fully observed transition matrix")
    moduli = _dominant_moduli(model.transitions, model.steady_seq_prob, m + 1, seed=seed)
    e1 = moduli[0]
    if e1 >= 1.0 - 1e-9:
        raise SpectralAssumptionError(
            f"subdominant eigenvalue modulus {e1:.6f} is not below 1; "
            "the chain is not mixing (periodic or reducible)"
        )
    r = moduli[m]
    return SpectralParams(m=m, e1=e1, delta=delta, r=r, v0_norm2=v0_norm2,
                          tv0=tv0, provenance="estimated")
