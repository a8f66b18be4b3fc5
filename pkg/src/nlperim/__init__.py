"""Numerical laboratory for non-local Sobolev seminorms and perimeters."""

from .kernels import (Kernel, Norm, RadialProfile, SpecFormatError, construct,
                      euclidean_norm, ell_p_norm, weighted_norm, fractional_kernel,
                      piecewise_fractional_kernel, log_fractional_kernel,
                      oscillating_kernel, log_gamma_kernel, indicator_kernel,
                      gaussian_kernel, symmetrize, truncate, parse_keyvalue)
from .quadrature import IntegralResult, annulus_mass, kernel_integral
from .certify import CertificateReport, SamplingConfig, certify
from .grid import (Grid, GridFunction, GridSet, ball, box, union, forward_difference,
                   load_grid_function, load_grid_set, make_grid, mean, mollify,
                   rasterize, rearrange, save_grid_function, save_grid_set)
from .functional import (CurvatureResult, EnergyReport, ProbeResult, QuadratureScheme,
                         curvature, divergence_probe, interaction_energy, perimeter,
                         perimeter_via_energy, seminorm)
from .closedform1d import (CurveReport, Profile1D, build_profile, interval_perimeter,
                           perimeter_curve_report)
from .extension import (BoxDomain, ExtensionReport, apply_cutoff, cutoff_bound,
                        extend, reflect_even, zero_extend, zero_extension_bound)
from .isoperimetry import (InequalityReport, ShapeResult, ball_curve, ball_perimeter,
                           decreasing_rearrangement, first_variation_check, optimize,
                           poincare_constant, relative_isoperimetric_check,
                           relative_isoperimetric_suite, sobolev_assumption_check,
                           two_ball_counterexample)

__version__ = "0.1.0"
