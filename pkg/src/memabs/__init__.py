"""Finite-memory Markov abstractions of continuous-state stochastic systems.

Build a partition of the state space, estimate an ell-memory transition
matrix from one long simulated trace, propagate an approximate distribution,
and measure or bound its total-variation error against analytic ground truth
when one is available.
"""

from ._kernels import HAVE_COMPILED
from .abstraction import (Abstraction, JointDistribution, MemoryMarkovModel,
                          PiecewiseConstantDensity, approximate_state_density,
                          build_abstraction, density_from_marginal,
                          estimate_initial_joint, estimate_transition_matrix,
                          horizon_marginals, load_model, marginal_at_horizon,
                          marginalize_at, marginalize_last, propagate,
                          save_model)
from .analysis import (CombinedBound, SpectralParams, TvEstimate,
                       bound_combined, bound_decreasing, bound_increasing,
                       crossover_horizon, estimate_spectral_params,
                       gaussian_cell_probabilities, initial_l2_norm,
                       l2_norm_piecewise, sample_invariant, tv_monte_carlo,
                       tv_monte_carlo_at_points, tv_piecewise)
from .config import ExperimentConfig, default_config, load_config
from .exceptions import (CapabilityError, EigenConvergenceError, MemabsError,
                         SpectralAssumptionError, UnmodeledRegionError,
                         UnstableDynamicsError, ZeroFrequencyCellError)
from .experiments import (Table, TvCurve, derive_seed, emit_plots,
                          rises_then_falls, run_bounds, run_case1, run_case2,
                          run_rotation_demo, tv_curve)
from .partition import (Partition, SequenceCodec, circle_partition, classify,
                        decode_sequence, encode_sequence, grid_partition,
                        singleton_partition, suffix_prefix_match)
from .systems import (GaussianBelief, GaussianChannel, StochasticSystem,
                      belief_at, density_ratio, gaussian_propagate,
                      make_demo_linear_system, make_finite_chain_system,
                      make_linear_gaussian_system, make_rotation_system,
                      mu_weighted_density, simulate_prefix_batch,
                      simulate_trajectory, solve_invariant_gaussian)

__version__ = "0.1.0"
