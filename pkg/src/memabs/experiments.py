"""Experiment harness: canned comparison runs, CSV output, gnuplot emission.

All runs are deterministic functions of (config, seed): substream seeds are
derived from the config seed with named keys, and CSV text is formatted with
17 significant digits and LF line endings, so identical inputs produce
byte-identical artifacts.

Monte-Carlo total variation along a horizon curve reuses one invariant
sample set per curve (common random numbers), so adjacent-horizon values
differ by signal rather than resampling noise.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .abstraction import (Abstraction, build_abstraction, density_from_marginal,
                          horizon_marginals)
from .analysis import (SpectralParams, bound_combined,
                       bound_decreasing, bound_increasing,
                       estimate_spectral_params, gaussian_cell_probabilities,
                       initial_l2_norm, sample_invariant,
                       tv_monte_carlo_at_points)
from .config import ExperimentConfig
from .exceptions import CapabilityError
from .partition import Partition, circle_partition
from .systems import StochasticSystem, gaussian_propagate, simulate_trajectory

# Quadrant cell indices used by the rotation demonstration.  The two tracked
# arcs are opposite quadrants: with a quarter-turn step and a noise support
# narrower than an arc, each is reachable from the other only by a one-step
# overshoot across a boundary, while the round trip in two steps is
# geometrically impossible.
ROTATION_ARC_A1 = 0
ROTATION_ARC_A2 = 2


def derive_seed(base_seed: int, *labels) -> int:
    """Deterministic substream seed from a base seed and string/int labels."""
    key = [int(base_seed)]
    for label in labels:
        if isinstance(label, int):
            key.append(label)
        else:
            key.append(zlib.crc32(str(label).encode()))
    return int(np.random.SeedSequence(key).generate_state(1)[0])


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


@dataclass
class Table:
    """In-memory CSV table with deterministic text rendering."""

    header: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        for row in self.rows:
            if len(row) != len(self.header):
                raise ValueError("row width does not match header")
            lines.append(",".join(_format_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")

    def column(self, name: str) -> list:
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]


# ---------------------------------------------------------------------------
# TV curves
# ---------------------------------------------------------------------------

@dataclass
class TvCurve:
    ell: int
    partition: Partition
    abstraction: Abstraction
    tv: np.ndarray
    stderr: np.ndarray


def _warn_if_undersampled(abstraction: Abstraction, trace_length: int) -> None:
    if trace_length < 1000:
        warnings.warn(
            f"trace of {trace_length} outputs is very short: "
            f"{abstraction.model.unobserved_row_fraction:.1%} of sequence rows "
            "were never observed",
            stacklevel=3,
        )


def tv_curve(system: StochasticSystem, partition: Partition, ell: int,
             config: ExperimentConfig, seed: int) -> TvCurve:
    """Abstraction-vs-analytic TV at every horizon 0..config.horizon."""
    if system.analytic is None:
        raise CapabilityError("TV against ground truth needs an analytic channel")
    channel = system.analytic
    abstraction = build_abstraction(
        system, partition, ell,
        trace_length=config.trace_length,
        initial_samples=config.initial_samples,
        seed=derive_seed(seed, "abstraction", ell, partition.n),
    )
    _warn_if_undersampled(abstraction, config.trace_length)
    marginals = horizon_marginals(abstraction.model, abstraction.initial_joint,
                                  config.horizon)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
        derive_seed(seed, "tv-points", ell, partition.n))))
    points = sample_invariant(channel, config.tv_samples, rng)
    # analytic invariant cell masses as the density denominator, so the
    # curves measure abstraction error rather than steady-frequency noise
    cell_mu = gaussian_cell_probabilities(partition, channel.m_mu, channel.Sigma_mu)

    tvs = np.empty(config.horizon + 1)
    errs = np.empty(config.horizon + 1)
    belief = channel.initial_belief()
    for k in range(config.horizon + 1):
        density = density_from_marginal(marginals[k], abstraction.model,
                                        partition, cell_mu=cell_mu)
        est = tv_monte_carlo_at_points(belief, channel, density, points)
        tvs[k], errs[k] = est.value, est.stderr
        belief = gaussian_propagate(belief, channel)
    return TvCurve(ell=ell, partition=partition, abstraction=abstraction,
                   tv=tvs, stderr=errs)


# ---------------------------------------------------------------------------
# Canned runs
# ---------------------------------------------------------------------------

def run_case1(config: ExperimentConfig) -> Table:
    """Fixed partition, increasing memory: one TV curve per memory length."""
    system = config.build_system()
    partition = config.build_partition()
    header = ["k"]
    curves = []
    for ell in config.memories:
        curves.append(tv_curve(system, partition, ell, config, config.seed))
        header += [f"tv_l{ell}", f"stderr_l{ell}"]
    rows = []
    for k in range(config.horizon + 1):
        row: list = [k]
        for curve in curves:
            row += [curve.tv[k], curve.stderr[k]]
        rows.append(row)
    return Table(header=header, rows=rows)


# Case-2 settings (p, ell): n = (p+2)^2 cells, so n**(ell+1) is 729**2 for
# the first entry and 81**3 for the second, an equal 531441-entry budget.
CASE2_SETTINGS = ((25, 1), (7, 2))


def run_case2(config: ExperimentConfig) -> Table:
    """Equal-budget comparison: fine memoryless partition vs coarse 2-memory
    partition, both with at most n**(ell+1) stored transition entries."""
    system = config.build_system()
    header = ["k"]
    curves = []
    labels = []
    for p, ell in CASE2_SETTINGS:
        partition = config.build_partition(subintervals=p)
        label = f"n{partition.n}_l{ell}"
        labels.append(label)
        curves.append(tv_curve(system, partition, ell, config, config.seed))
        header += [f"tv_{label}", f"stderr_{label}"]
    header += [f"stored_nonzeros_{label}" for label in labels]
    nonzeros = [curve.abstraction.model.stored_nonzeros for curve in curves]
    rows = []
    for k in range(config.horizon + 1):
        row: list = [k]
        for curve in curves:
            row += [curve.tv[k], curve.stderr[k]]
        row += nonzeros
        rows.append(row)
    return Table(header=header, rows=rows)


@dataclass
class RotationDemoReport:
    """Empirical conditional probabilities showing that one-step and
    two-step conditioning disagree for the partitioned rotation."""

    trace_length: int
    count_a2: int
    count_a2_then_a1: int
    count_a1_a2: int
    count_a1_a2_then_a1: int

    @property
    def p_one_step(self) -> float:
        return self.count_a2_then_a1 / self.count_a2

    @property
    def p_two_step(self) -> float:
        return self.count_a1_a2_then_a1 / self.count_a1_a2


def run_rotation_demo(config: ExperimentConfig) -> RotationDemoReport:
    """Estimate P[next in A1 | now in A2] and
    P[next in A1 | now in A2, previously in A1] from one long trace."""
    if config.system_kind != "rotation":
        raise ValueError("the rotation demo needs a rotation system config")
    system = config.build_system()
    partition = circle_partition(4)
    states = simulate_trajectory(system, config.trace_length,
                                 derive_seed(config.seed, "rotation-demo"))
    symbols = partition.classify_batch(states)
    a1, a2 = ROTATION_ARC_A1, ROTATION_ARC_A2
    now_a2 = symbols[:-1] == a2
    next_a1 = symbols[1:] == a1
    pair = (symbols[:-2] == a1) & (symbols[1:-1] == a2)
    triple = pair & (symbols[2:] == a1)
    return RotationDemoReport(
        trace_length=int(len(symbols) - 1),
        count_a2=int(now_a2.sum()),
        count_a2_then_a1=int((now_a2 & next_a1).sum()),
        count_a1_a2=int(pair.sum()),
        count_a1_a2_then_a1=int(triple.sum()),
    )


def run_bounds(config: ExperimentConfig,
               params: Optional[SpectralParams] = None,
               spectral_m: int = 2) -> Table:
    """Measured TV curve joined with the two-regime bounds.

    Without supplied ``params``, spectral quantities are estimated from the
    abstraction matrix (heuristic, flagged in the provenance column); the
    projection error stays at its default 0 since it is not computable from
    data alone.
    """
    system = config.build_system()
    partition = config.build_partition()
    ell = config.memories[0]
    curve = tv_curve(system, partition, ell, config, config.seed)
    if params is None:
        v0 = curve.abstraction.initial_joint
        tv0 = 0.0
        if ell == 1 and system.analytic is not None:
            exact0 = gaussian_cell_probabilities(
                partition, system.analytic.m_0, system.analytic.Sigma_0)
            tv0 = 0.5 * float(np.abs(v0.probs - exact0).sum())
        v0_norm2 = initial_l2_norm(system, num_samples=config.tv_samples,
                                   seed=derive_seed(config.seed, "l2-norm"))
        params = estimate_spectral_params(curve.abstraction.model, m=spectral_m,
                                          tv0=tv0, v0_norm2=v0_norm2,
                                          seed=derive_seed(config.seed, "spectral"))
    header = ["k", "tv_measured", "tv_stderr", "bound_inc", "bound_dec",
              "bound_combined", "bound_raw", "provenance"]
    rows = []
    for k in range(ell, config.horizon + 1):
        inc = bound_increasing(params, k, ell)
        dec = bound_decreasing(params, k, ell)
        combined = bound_combined(params, k, ell)
        rows.append([k, curve.tv[k], curve.stderr[k], inc, dec,
                     combined.value, combined.raw, params.provenance])
    return Table(header=header, rows=rows)


# ---------------------------------------------------------------------------
# Curve-shape statistics
# ---------------------------------------------------------------------------

def smoothed(curve: Sequence[float], window: int = 5) -> np.ndarray:
    """Centered moving average (valid part only)."""
    curve = np.asarray(curve, dtype=np.float64)
    if window < 1 or window > len(curve):
        raise ValueError("window out of range")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(curve, kernel, mode="valid")


def rises_then_falls(curve: Sequence[float], window: int = 5) -> bool:
    """True iff the smoothed curve's nonzero differences change sign exactly
    once, from positive to negative (single-peak shape)."""
    diffs = np.diff(smoothed(curve, window))
    signs = np.sign(diffs)
    signs = signs[signs != 0]
    if len(signs) == 0:
        return False
    changes = int(np.sum(signs[1:] != signs[:-1]))
    return changes == 1 and signs[0] > 0


# ---------------------------------------------------------------------------
# Plot-script emission (gnuplot, no plotting dependency)
# ---------------------------------------------------------------------------

def emit_plots(csv_path, out_path=None) -> str:
    """Write a gnuplot script rendering every tv/bound column of a CSV
    against its first column; returns the script text."""
    csv_path = Path(csv_path)
    header_line = csv_path.read_text(encoding="utf-8").splitlines()
    if not header_line:
        raise ValueError("empty CSV file")
    header = header_line[0].split(",")
    if len(header) < 2 or header[0] != "k":
        raise ValueError("malformed CSV: expected a 'k' first column")
    y_columns = [(i + 1, name) for i, name in enumerate(header)
                 if name.startswith(("tv", "bound"))]
    if not y_columns:
        raise ValueError("malformed CSV: no tv/bound columns to plot")
    stem = csv_path.stem
    plot_terms = ", \\\n     ".join(
        f"'{csv_path.name}' using 1:{col} with lines title '{name}'"
        for col, name in y_columns
    )
    script = (
        "# gnuplot script generated by memabs\n"
        "set datafile separator ','\n"
        "set key outside\n"
        "set grid\n"
        "set xlabel 'k'\n"
        "set ylabel 'total variation'\n"
        "set term pngcairo size 960,600\n"
        f"set output '{stem}.png'\n"
        f"plot {plot_terms}\n"
    )
    if out_path is None:
        out_path = csv_path.with_suffix(".gp")
    Path(out_path).write_text(script, encoding="utf-8", newline="\n")
    return script
