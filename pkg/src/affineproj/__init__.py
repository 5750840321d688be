"""Dimension theory of planar self-affine sets: affinity and Lyapunov dimensions,
Furstenberg measures, projections and the suspension flow of direction dynamics."""

from .affine import (AffineMap2, BernoulliWeights, Matrix2, SelfAffineIFS, ValidationReport, Word,
                     chaos_game, compose_word, singular_values, svf, validate_ifs)
from .config import RunConfig, load_config, parse_config
from .errors import (AffineProjError, BudgetExceeded, ConfigError, DiskInvarianceError,
                     ExceptionalDirection, InputNotPositive, MathPreconditionError, NonContracting,
                     NotStrictlyPositive, SequenceExhausted, SingularMatrix)
from .flow import (FlowState, SymbolTape, equidistribution_statistic, flow_to_time, nu_F_estimate, roof,
                   skew_step, time_N_orbit)
from .projection import (AtomicMeasure1D, EstimatorParams, LengthFunctionValue, ThetaScanRow,
                         entropy_average_statistic, f_contraction, lambda_max, length,
                         local_dimension_estimate, project_point, projected_measure, projected_width,
                         r_entropy, rescaled_entropy_identity_check, stopping_indices, theta_scan)
from .projective import (Direction, EmpiricalDirectionMeasure, cone_contraction_rate, exceptional_set,
                         furstenberg_sample, phi_map, projective_action, stationarity_residual)
from .spectral import (BlockMeasure, LyapunovReport, PressureEstimate, affinity_dimension, block_bernoulli,
                       cone_constant, lyapunov_dimension, lyapunov_exponents, pressure, shannon_entropy)

__version__ = "0.1.0"
