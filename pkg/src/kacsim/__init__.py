"""Exact sampling and fixed-point tools for Kac-type kinetic equations."""
from .errors import (ClassificationError, CostLimitError, DegenerateError, DomainError,
                     InsufficientDataError, KacsimError, KernelSpecError, StateError,
                     UnsupportedError)
from .fixedpoint import (MixingLaw, exact_second_moment, mixing_moment, scale_dirichlet,
                         solve_mixing)
from .initial_data import (Gaussian, HGammaProfile, PointMass, Rademacher, SkewPareto,
                           SymmetricPareto, classify, sample_initial, sample_stable, stable_cf)
from .kernel import (KernelSpec, SpectralProfile, conjugate_exponent, deterministic, kac2,
                     spectral, spectral_profile, uniform_split, validate_kernel)
from .metrics import (RateFit, empirical_cf, fit_decay_rate, ks_distance,
                      wasserstein_distance, zolotarev_bound_constant)
from .montecarlo import (SampleBatch, gamma_clock_check, sample_batch, sample_limit,
                         sample_nu, sample_solution)
from .trees import (WeightedTree, WeightStats, expected_weight_norm, grow_tree,
                    shape_probability, subtree_fraction_sample, weight_stats)
from .wild import WildEvaluation, wild_q, wild_solution

__version__ = "0.1.0"
