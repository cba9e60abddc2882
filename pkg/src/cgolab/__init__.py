"""Numerical laboratory for CGO solutions, Kato-class potentials, and DtN maps."""

__version__ = "0.1.0"

from .errors import (BasisMismatch, CgolabError, ConfigError, DegenerateZ,
                     DomainError, NoConvergence, NotContractive,
                     QuadratureFailure, SolverDivergence, SpectrumAtZero,
                     SplitFailure, SymbolZero, TraceResolutionError)
from .grid import Grid, GridField, apply_multiplier, fourier_forward, fourier_inverse
from .specfun import (BesselPotentialParams, ComplexOrder, FourierConvention,
                      bessel_k, bessel_k_boundary, bessel_k_fast,
                      bessel_potential, k0_line_integral, riesz_apply,
                      riesz_kernel)
from .kato import (KatoQuadrature, KatoReport, PotentialSpec, ball_potential,
                   bump_potential, example_potential, from_descriptor,
                   kato_integral, kato_modulus, kato_norm, mollify,
                   split_small_bounded, zero_potential)
from .fundsol import (BOUND_CONSTANT_3D, LOWER_CONSTANT_3D, BoundReport,
                      CgoVector, ConjugatedSymbolParams, RaySettings,
                      SampleSpec, axis_cgo_vector, conjugated_symbol,
                      e_tau_batch, fundamental_solution_3d,
                      fundamental_solution_4d, symbol_tau, symbol_z,
                      verify_pointwise_bound, z_to_canonical)
from .cgo import (CgoSolveReport, GzOperator, cgo_solution, gradient_norm,
                  gz_apply, operator_norm, phase_field, schrodinger_residual,
                  solve_cgo)
from .dtn import (BoundaryFunctional, DiscreteDomain, DtnMatrix, DtnOperator,
                  alessandrini_pairing, dirichlet_solve, dtn_apply, dtn_matrix,
                  energy_pairing, face_cos_basis, project_trace)
from .reconstruct import (FrequencyPlan, ModeDiagnostics, ReconstructionResult,
                          band_limited_reference, convergence_study,
                          dual_lattice, fourier_mode_estimate, hann_window,
                          invert_modes, make_z_pair, reconstruct_potential,
                          symmetrize_modes, volumetric_modes)
