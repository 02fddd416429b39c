"""Commodity derivatives pricing with subordinate Ornstein-Uhlenbeck models.

An OU diffusion time changed by a Levy subordinator gives a Markov
process with mean-reverting jumps whose transition semigroup expands in
Hermite eigenfunctions.  This package prices commodity futures and
European futures/spot options in that framework, optionally with a
CIR++ stochastic clock for stochastic volatility and seasonality,
checks equivalent-measure conditions, simulates paths, reproduces the
Samuelson maturity effect, and calibrates to implied-vol quotes.
"""

from .calibrate import (FitOptions, FitResult, black76_price, calibrate_smile,
                        calibrate_surface, implied_vol, model_implied_vol)
from .cir import (CirActivity, activity_integral, activity_value, cir_density,
                  cir_laplace, cir_laplace_conditional, cir_quantile,
                  sample_cir_path)
from .errors import (BracketingError, CalibrationError, ConfigError,
                     ConvergenceError, DivergenceError, PrecisionLimitError,
                     QuadratureError, SubouError, UnsupportedFamilyError)
from .measure import Verdict, check_equivalence, check_physical_drift
from .pricing import (MIN_OPTION_EXPIRY, MarketData, ModelState, Quote,
                      call_price, critical_state, exp_coefficients,
                      futures_price, g_compensator, put_price,
                      spot_option_price)
from .process import (DEFAULT_CONFIG, ExpansionConfig, GeneratingTuple,
                      eigenfunction, eigenfunction_table, eigenvalues,
                      levy_asymptote, ou_density, semigroup_apply,
                      stationary_density, subou_density, subou_levy_density,
                      tail_weight_sum, truncation_bound)
from .simulate import (MaturityReport, PathBundle, check_maturity_condition,
                       realized_qv, simulate_subou, simulate_sv_subou)
from .special import (bessel_i, bessel_i_scaled, coeff_a, coeff_b, gauss_cdf,
                      hermite_eval, norm_hermite_eval)
from .subordinators import (SubordinatorSpec, bg_index, laplace_exponent,
                            levy_density, sample_increment)

__version__ = "0.1.0"
