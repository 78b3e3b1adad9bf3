"""Harmonic lattice dynamics, Lieb-Robinson light cones and Dyson-series perturbations."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, FitError, LrlatError, SingularModeError,
                     WraparoundError)
from .lattice import SiteField, Torus, delta_field, dual_grid, periodic_distance
from .harmonic import (HarmonicParams, KernelPair, Propagator, build_kernels, dispersion,
                       evolve_field, lr_velocity, symplectic_form)
from .weyl import (WeylSum, WeylTerm, commutator_norm_harmonic, heisenberg_evolve,
                   sum_norm_bound, weyl_commutator, weyl_product)
from .dyson import (AnharmonicPotential, DysonConfig, PerturbationRegion, convergence_experiment,
                    dyson_evolve, perturbation_as_weyl, potential_fourier_norms,
                    volume_difference_bound)
from .lightcone import (LRBoundParams, ScanRecord, bound_rhs, fit_decay_rate, fit_velocity,
                        lightcone_scan)
from .oracle import (OracleConfig, build_hamiltonian, build_site_operators, oracle_commutator_norm,
                     oracle_weyl_matrix)
from .config import ExperimentConfig, dump_config, parse_config
