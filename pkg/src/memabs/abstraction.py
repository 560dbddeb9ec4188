"""Memory-Markov abstraction pipeline.

From an output trace of a partitioned stochastic system, estimate the
ell-memory transition matrix over sequence states (sliding-window count
ratios), estimate the initial joint distribution over ell-long output
sequences from independent prefix samples, propagate it with the transposed
transition matrix, marginalize, and divide by steady-state cell frequencies
to obtain a piecewise-constant invariant-weighted density.

Sequence states are flat big-endian codes (see ``partition.SequenceCodec``),
so the matrix has at most n**(ell+1) structurally admissible entries: a
transition row -> col is possible only when row's suffix equals col's prefix.
Storage is sparse throughout; dense n**(2*ell) arrays are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .exceptions import CapabilityError, UnmodeledRegionError, ZeroFrequencyCellError
from .partition import Partition, SequenceCodec
from .systems import StochasticSystem, simulate_prefix_batch, simulate_trajectory

# Initial-prefix samples routinely land on sequence windows that a long
# steady-state trace never visits (the initial distribution concentrates in
# regions that are rare at stationarity), so a modest leak is expected even
# at realistic sampling budgets: a 729-cell grid estimated from a 1e5-step
# trace leaks just over 1% of the initial mass, and reduced-budget runs of
# the same configurations leak several percent.  The leak is tracked, never
# renormalized away, and propagation aborts only when it signals a genuinely
# unmodeled region.
MASS_LEAK_TOLERANCE = 0.1


@dataclass
class MemoryMarkovModel:
    """Estimated ell-memory Markov chain over n-cell output sequences.

    ``transitions`` is row-stochastic on observed rows and all-zero on rows
    whose sequence never occurred in the trace (flagged in ``row_observed``
    rather than fabricated).  Count arrays are kept when the model was
    estimated from a trace; they back the exact text serialization.
    """

    ell: int
    n: int
    transitions: sp.csr_matrix
    row_observed: np.ndarray
    steady_seq_prob: np.ndarray
    steady_cell_prob: np.ndarray
    transition_counts: Optional[sp.csr_matrix] = None
    window_counts: Optional[np.ndarray] = None
    cell_counts: Optional[np.ndarray] = None
    trace_length: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        size = self.n ** self.ell
        if self.transitions.shape != (size, size):
            raise ValueError("transition matrix has wrong shape")
        row_sums = np.asarray(self.transitions.sum(axis=1)).ravel()
        observed = self.row_observed
        if not np.allclose(row_sums[observed], 1.0, atol=1e-12, rtol=0.0):
            raise ValueError("observed rows must sum to 1 within 1e-12")
        if np.any(row_sums[~observed] != 0.0):
            raise ValueError("unobserved rows must be empty")
        if abs(float(self.steady_seq_prob.sum()) - 1.0) > 1e-12:
            raise ValueError("steady sequence probabilities must sum to 1")
        if abs(float(self.steady_cell_prob.sum()) - 1.0) > 1e-12:
            raise ValueError("steady cell probabilities must sum to 1")
        codec = SequenceCodec(self.n, self.ell)
        coo = self.transitions.tocoo()
        if self.ell > 1:
            tail = self.n ** (self.ell - 1)
            if np.any(coo.row % tail != coo.col // self.n):
                raise ValueError("nonzero entry violates suffix/prefix structure")
        if coo.nnz > self.n ** (self.ell + 1):
            raise ValueError("more nonzeros than structurally possible")
        self._codec = codec

    @property
    def codec(self) -> SequenceCodec:
        return self._codec

    @property
    def num_states(self) -> int:
        return self.n ** self.ell

    @property
    def stored_nonzeros(self) -> int:
        return int(self.transitions.nnz)

    @property
    def unobserved_row_fraction(self) -> float:
        return float(np.mean(~self.row_observed))

    @classmethod
    def from_probabilities(cls, ell: int, n: int, transitions,
                           steady_seq_prob, steady_cell_prob) -> "MemoryMarkovModel":
        """Exact model from known probabilities (no counts attached)."""
        T = sp.csr_matrix(transitions, dtype=np.float64)
        row_sums = np.asarray(T.sum(axis=1)).ravel()
        return cls(
            ell=ell,
            n=n,
            transitions=T,
            row_observed=row_sums > 0,
            steady_seq_prob=np.asarray(steady_seq_prob, dtype=np.float64),
            steady_cell_prob=np.asarray(steady_cell_prob, dtype=np.float64),
        )


@dataclass
class JointDistribution:
    """Probability vector over the n**ell sequence states.

    ``time_offset`` is the number of propagation steps applied so far; the
    vector then describes output times time_offset .. time_offset + ell - 1.
    ``leaked_mass`` is mass that fell into unobserved rows (always below the
    propagation leak tolerance, else propagation raises).
    """

    ell: int
    n: int
    probs: np.ndarray
    time_offset: int = 0
    leaked_mass: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (self.n ** self.ell,):
            raise ValueError("probability vector has wrong length")
        if np.any(self.probs < -1e-15):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) + self.leaked_mass - 1.0) > 1e-10:
            raise ValueError("probabilities must sum to 1 (minus leaked mass)")


@dataclass
class PiecewiseConstantDensity:
    """Invariant-weighted density, constant on each partition cell.

    ``values[i]`` is the density level on cell i and ``cell_mu[i]`` the
    invariant mass of the cell used as integration weight.  The integral
    sum(values * cell_mu) is 1 up to mass leaked onto unobserved sequence
    states upstream; the shortfall is never renormalized away, so it shows up
    honestly in total-variation comparisons.
    """

    partition: Partition
    values: np.ndarray
    cell_mu: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.cell_mu = np.asarray(self.cell_mu, dtype=np.float64)
        if self.values.shape != (self.partition.n,) or self.cell_mu.shape != (self.partition.n,):
            raise ValueError("values/cell_mu must have one entry per cell")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        integral = float(np.dot(self.values, self.cell_mu))
        if not 1.0 - MASS_LEAK_TOLERANCE - 1e-10 <= integral <= 1.0 + 1e-10:
            raise ValueError("density must integrate to 1 under cell_mu "
                             "(minus at most the leak tolerance)")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Density levels at the given (N, d) points."""
        return self.values[self.partition.classify_batch(points)]


def estimate_transition_matrix(output_trace, ell: int, n: int,
                               trace_seed: Optional[int] = None) -> MemoryMarkovModel:
    """Sliding-window estimator of the ell-memory transition matrix.

    Each (ell+1)-window of the trace contributes one transition count from
    its first ell symbols to its last ell symbols; row probabilities are
    count ratios.  Steady-state sequence/cell probabilities are the window
    and symbol frequencies of the same trace.
    """
    if ell < 1 or n < 1:
        raise ValueError("ell and n must be positive")
    trace = np.asarray(output_trace, dtype=np.int64)
    if trace.ndim != 1:
        raise ValueError("output trace must be one-dimensional")
    if trace.shape[0] <= ell:
        raise ValueError("trace must be longer than the memory length")
    if np.any(trace < 0) or np.any(trace >= n):
        raise ValueError("trace symbols must lie in [0, n)")
    size = n ** ell

    pair_codes = _kernels.window_codes(trace, n, ell + 1)
    uniq_pairs, pair_counts = np.unique(pair_codes, return_counts=True)
    rows = uniq_pairs // n
    cols = uniq_pairs % size

    row_counts = np.zeros(size, dtype=np.int64)
    np.add.at(row_counts, rows, pair_counts)

    window_code_arr = _kernels.window_codes(trace, n, ell)
    uniq_windows, win_counts = np.unique(window_code_arr, return_counts=True)
    window_counts = np.zeros(size, dtype=np.int64)
    window_counts[uniq_windows] = win_counts

    cell_counts = np.bincount(trace, minlength=n)

    probs = pair_counts / row_counts[rows]
    transitions = sp.csr_matrix((probs, (rows, cols)), shape=(size, size))
    counts_mat = sp.csr_matrix((pair_counts, (rows, cols)), shape=(size, size))

    return MemoryMarkovModel(
        ell=ell,
        n=n,
        transitions=transitions,
        row_observed=row_counts > 0,
        steady_seq_prob=window_counts / window_counts.sum(),
        steady_cell_prob=cell_counts / cell_counts.sum(),
        transition_counts=counts_mat,
        window_counts=window_counts,
        cell_counts=cell_counts,
        trace_length=int(trace.shape[0]),
        seed=trace_seed,
    )


def estimate_initial_joint(prefix_samples, ell: int, n: int) -> JointDistribution:
    """Empirical distribution of ell-long output prefixes.

    ``prefix_samples`` is an (N, ell) array (or nested sequence) of cell
    indices, one row per independent trajectory prefix.
    """
    samples = np.asarray(prefix_samples, dtype=np.int64)
    if samples.size == 0:
        raise ValueError("no prefix samples given")
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    if samples.shape[1] != ell:
        raise ValueError(f"prefix samples must have length {ell}")
    if np.any(samples < 0) or np.any(samples >= n):
        raise ValueError("symbols must lie in [0, n)")
    powers = n ** np.arange(ell - 1, -1, -1, dtype=np.int64)
    codes = samples @ powers
    counts = np.bincount(codes, minlength=n ** ell)
    return JointDistribution(ell=ell, n=n, probs=counts / counts.sum(), time_offset=0)


def propagate(model: MemoryMarkovModel, v0: JointDistribution,
              steps: int) -> JointDistribution:
    """Apply the transposed transition matrix ``steps`` times.

    Mass sitting on an unobserved row cannot be propagated; if it reaches the
    leak tolerance the abstraction demonstrably does not cover the visited
    region and an :class:`UnmodeledRegionError` is raised.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if (model.n, model.ell) != (v0.n, v0.ell):
        raise ValueError("model and distribution disagree on (n, ell)")
    v = v0.probs.copy()
    leaked = v0.leaked_mass
    unobserved = ~model.row_observed
    Pt = model.transitions.T.tocsr()
    for step in range(steps):
        stuck = float(v[unobserved].sum())
        if stuck >= MASS_LEAK_TOLERANCE:
            raise UnmodeledRegionError(stuck, v0.time_offset + step)
        leaked += stuck
        v = Pt @ v
    return JointDistribution(ell=model.ell, n=model.n, probs=v,
                             time_offset=v0.time_offset + steps, leaked_mass=leaked)


def marginalize_last(v: JointDistribution) -> np.ndarray:
    """Marginal over the last symbol of the joint sequence distribution."""
    return v.probs.reshape(-1, v.n).sum(axis=0)


def marginalize_at(v: JointDistribution, position: int) -> np.ndarray:
    """Marginal over the symbol at ``position`` in [0, ell)."""
    if not 0 <= position < v.ell:
        raise ValueError("position out of range")
    cube = v.probs.reshape((v.n,) * v.ell)
    axes = tuple(a for a in range(v.ell) if a != position)
    return cube.sum(axis=axes) if axes else cube.copy()


def density_from_marginal(marginal: np.ndarray, model: MemoryMarkovModel,
                          partition: Partition,
                          cell_mu: Optional[np.ndarray] = None) -> PiecewiseConstantDensity:
    """Divide a cell marginal by steady-state cell mass to get the
    invariant-weighted density.

    ``cell_mu`` overrides the empirical steady cell frequencies as the
    denominator and integration weight (e.g. analytic Gaussian cell masses),
    decoupling that estimation error from the rest of the pipeline.
    """
    marginal = np.asarray(marginal, dtype=np.float64)
    if partition.n != model.n or marginal.shape != (model.n,):
        raise ValueError("marginal/partition/model sizes disagree")
    denom = model.steady_cell_prob if cell_mu is None else np.asarray(cell_mu, dtype=np.float64)
    bad = (marginal > 0) & (denom <= 0)
    if np.any(bad):
        raise ZeroFrequencyCellError(
            f"{int(bad.sum())} cells carry mass but have zero steady-state frequency"
        )
    values = np.divide(marginal, denom, out=np.zeros_like(marginal), where=denom > 0)
    return PiecewiseConstantDensity(partition=partition, values=values, cell_mu=denom)


@dataclass(frozen=True)
class Abstraction:
    """Estimated model plus initial joint for one (system, partition, ell)."""

    model: MemoryMarkovModel
    initial_joint: JointDistribution
    partition: Partition


def default_burn_in(trace_length: int) -> int:
    return max(1000, trace_length // 100)


def build_abstraction(system: StochasticSystem, partition: Partition, ell: int,
                      trace_length: int = 100_000, initial_samples: int = 100_000,
                      seed: int = 0) -> Abstraction:
    """Estimate the transition matrix from one long (burned-in) trace of
    ``trace_length`` outputs and the initial joint from
    ``initial_samples // ell`` independent prefixes.

    The trace and the prefixes use independent substreams of ``seed``.
    """
    if trace_length <= ell:
        raise ValueError("trace budget too small")
    if initial_samples < ell:
        raise ValueError("initial-sample budget too small")
    trace_seed, prefix_seed = (int(s) for s in
                               np.random.SeedSequence(seed).generate_state(2))
    burn = default_burn_in(trace_length)
    states = simulate_trajectory(system, burn + trace_length - 1, trace_seed)
    outputs = partition.classify_batch(states[burn:])
    model = estimate_transition_matrix(outputs, ell, partition.n, trace_seed=seed)

    count = initial_samples // ell
    prefixes = simulate_prefix_batch(system, count, ell, prefix_seed)
    symbols = partition.classify_batch(
        prefixes.reshape(-1, system.dimension)).reshape(count, ell)
    v0 = estimate_initial_joint(symbols, ell, partition.n)
    return Abstraction(model=model, initial_joint=v0, partition=partition)


def marginal_at_horizon(model: MemoryMarkovModel, v0: JointDistribution,
                        k: int) -> np.ndarray:
    """Approximate cell marginal at output time ``k``.

    For k >= ell - 1 this propagates k - ell + 1 steps and marginalizes the
    last symbol; for k < ell - 1 the initial joint already covers time k and
    is marginalized directly.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k >= model.ell - 1:
        return marginalize_last(propagate(model, v0, k - model.ell + 1))
    return marginalize_at(v0, k)


def horizon_marginals(model: MemoryMarkovModel, v0: JointDistribution,
                      k_max: int) -> np.ndarray:
    """Cell marginals for all horizons 0..k_max as a (k_max+1, n) array,
    sharing propagation work across horizons."""
    out = np.empty((k_max + 1, model.n), dtype=np.float64)
    for k in range(min(model.ell - 1, k_max + 1)):
        out[k] = marginalize_at(v0, k)
    if k_max >= model.ell - 1:
        v = v0
        out[model.ell - 1] = marginalize_last(v)
        for k in range(model.ell, k_max + 1):
            v = propagate(model, v, 1)
            out[k] = marginalize_last(v)
    return out


def approximate_state_density(system: StochasticSystem, partition: Partition, ell: int, k: int,
                  sample_budget: int = 100_000, seed: int = 0,
                  cell_mu: Optional[np.ndarray] = None) -> PiecewiseConstantDensity:
    """Full pipeline: estimate, propagate, marginalize, normalize.

    Returns the piecewise-constant invariant-weighted density approximating
    the state distribution at time ``k``.  Deterministic given ``seed``.
    ``sample_budget`` is used both as the trace length and as the total
    initial-prefix budget (split into sample_budget // ell prefixes).
    """
    abstraction = build_abstraction(system, partition, ell,
                                    trace_length=sample_budget,
                                    initial_samples=sample_budget, seed=seed)
    marginal = marginal_at_horizon(abstraction.model, abstraction.initial_joint, k)
    return density_from_marginal(marginal, abstraction.model, partition, cell_mu=cell_mu)


# ---------------------------------------------------------------------------
# Text serialization (exact count ratios, bit-exact reload)
# ---------------------------------------------------------------------------

_FORMAT_HEADER = "memabs-model v1"


def _seq_str(codec: SequenceCodec, code: int) -> str:
    return ",".join(str(s) for s in codec.decode(code))


def save_model(model: MemoryMarkovModel, path) -> None:
    """Write the flat text format: a header (n, ell, trace length, seed),
    then one line per nonzero transition as
    ``row-sequence col-sequence probability`` with the probability as the
    exact count ratio.  Count sections make the reload bit-exact.
    """
    if model.transition_counts is None:
        raise CapabilityError("only trace-estimated models carry exact counts to serialize")
    codec = model.codec
    counts = model.transition_counts.tocoo()
    order = np.lexsort((counts.col, counts.row))
    row_counts = np.asarray(model.transition_counts.sum(axis=1)).ravel().astype(np.int64)
    lines = [
        _FORMAT_HEADER,
        f"n {model.n}",
        f"ell {model.ell}",
        f"trace_length {model.trace_length}",
        f"seed {model.seed if model.seed is not None else 'none'}",
        "begin transitions",
    ]
    for idx in order:
        r, c, cnt = int(counts.row[idx]), int(counts.col[idx]), int(counts.data[idx])
        lines.append(f"{_seq_str(codec, r)} {_seq_str(codec, c)} {cnt}/{row_counts[r]}")
    lines.append("end transitions")
    lines.append("begin window_counts")
    for code in np.nonzero(model.window_counts)[0]:
        lines.append(f"{_seq_str(codec, int(code))} {int(model.window_counts[code])}")
    lines.append("end window_counts")
    lines.append("begin cell_counts")
    for cell in np.nonzero(model.cell_counts)[0]:
        lines.append(f"{int(cell)} {int(model.cell_counts[cell])}")
    lines.append("end cell_counts")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MemoryMarkovModel:
    """Reload a model written by :func:`save_model` (bit-exact)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != _FORMAT_HEADER:
        raise ValueError("not a memabs model file")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("begin "):
        key, value = lines[pos].split(maxsplit=1)
        header[key] = value
        pos += 1
    n = int(header["n"])
    ell = int(header["ell"])
    trace_length = int(header["trace_length"])
    seed = None if header["seed"] == "none" else int(header["seed"])
    codec = SequenceCodec(n, ell)
    size = codec.size

    sections: dict[str, list[str]] = {}
    while pos < len(lines):
        if not lines[pos].startswith("begin "):
            raise ValueError(f"malformed section start: {lines[pos]!r}")
        name = lines[pos].split(maxsplit=1)[1]
        pos += 1
        body = []
        while pos < len(lines) and lines[pos] != f"end {name}":
            body.append(lines[pos])
            pos += 1
        if pos == len(lines):
            raise ValueError(f"unterminated section {name!r}")
        sections[name] = body
        pos += 1

    rows, cols, counts = [], [], []
    for line in sections["transitions"]:
        row_s, col_s, frac = line.split()
        rows.append(codec.encode(int(s) for s in row_s.split(",")))
        cols.append(codec.encode(int(s) for s in col_s.split(",")))
        counts.append(int(frac.split("/")[0]))
    counts_mat = sp.csr_matrix(
        (np.array(counts, dtype=np.int64), (rows, cols)), shape=(size, size))
    row_counts = np.asarray(counts_mat.sum(axis=1)).ravel().astype(np.int64)
    coo = counts_mat.tocoo()
    probs = coo.data / row_counts[coo.row]
    transitions = sp.csr_matrix((probs, (coo.row, coo.col)), shape=(size, size))

    window_counts = np.zeros(size, dtype=np.int64)
    for line in sections["window_counts"]:
        seq_s, cnt = line.split()
        window_counts[codec.encode(int(s) for s in seq_s.split(","))] = int(cnt)
    cell_counts = np.zeros(n, dtype=np.int64)
    for line in sections["cell_counts"]:
        cell, cnt = line.split()
        cell_counts[int(cell)] = int(cnt)

    return MemoryMarkovModel(
        ell=ell,
        n=n,
        transitions=transitions,
        row_observed=row_counts > 0,
        steady_seq_prob=window_counts / window_counts.sum(),
        steady_cell_prob=cell_counts / cell_counts.sum(),
        transition_counts=counts_mat,
        window_counts=window_counts,
        cell_counts=cell_counts,
        trace_length=trace_length,
        seed=seed,
    )
