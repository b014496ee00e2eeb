"""Maxima of smooth random fields: Laplace integrals, moment generating
functions of the maximum, Orlicz-type norms, metric entropy and tail
asymptotics."""

from .entropy import (EntropySeries, MetricSample, covering_number, entropy_series,
                      metric_dimension, natural_distance_matrix)
from .errors import NumericError, SmoothmaxError, ValidationError
from .extremum import MaximizerOptions, MaxResult, brute_force_max, check_nondegeneracy, find_max
from .field_model import (BasisTerm, CoefficientLaw, Domain, FieldSample, FieldSpec, covariance,
                          eval_field, eval_gradient, eval_hessian, gaussian_natural_distance,
                          sample_field, zeta)
from .laplace_saddle import (corollary_R, estimate_G, integral_I, laplace_R, mgf_of_max,
                             mgf_saddle_ratio, pathwise_ratio, saddle_approx, simulate_replicates,
                             tail_mgf_identity, theorem1_ratio)
from .logspace import LogValue
from .orlicz import (PhiFunction, bphi_norm, fenchel_moreau_check, gpsi_norm, kramer_check,
                     phi_inverse, psi_from_phi, smallest_tail_constant, tail_bound_check,
                     young_fenchel)
from .quadrature import QuadOptions, log_integrate
from .tail_asymptotics import (AsymptoticParams, TailCurve, empirical_tail, fit_R_params,
                               laplace_integral_check, predicted_tail,
                               laplace_asymptotic_44, tail_prediction_45, tail_shape_slope,
                               tauberian_consistency)

__version__ = "0.1.0"
