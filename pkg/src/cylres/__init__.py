"""cylres: spectra and resonances of Laplacians on asymptotically cylindrical ends."""

__version__ = "0.1.0"

from .cross_section import CrossSection, ThresholdSet, thresholds, mode_values
from .end_geometry import (EndMetric, PhiSpec, metric_at, check_stabilization,
                           pullback_from_phi, product_metric, dif1_metric,
                           dif2_metric)
from .scaling import (ScalingProfile, ScalingParameter, DeformedMetricField,
                      ramp_value, deformed_metric, density_rho,
                      far_field_matrix)
from .discretization import (Grid, AssembledOperator, build_grid,
                             assemble_form, assemble_modal, neumann_trace,
                             cross_section_pencil, form_quadrature,
                             dump_triplets)
from .eigensolver import (EigenResult, solve_dense, solve_shift_invert,
                          resolvent_apply, ResolventOperator)
from .spectral import (Ray, SpectralPortrait, StabilityReport, Window,
                       SweepJob, predict_essential, classify, sweep_lambda,
                       sweep_profile, sector_check, fit_ray_angle)
from .continuation import (AnalyticVector, MatrixElementTrace, scaled_vector,
                           deformed_inner, matrix_element_trace,
                           compare_traces, detect_poles)
