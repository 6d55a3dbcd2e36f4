"""Monte Carlo and exact-sum tools for total variation rates in the Breuer-Major theorem."""

from .distance import DistanceEstimate, distance_estimate, ks_distance, loglog_rate_fit, tv_histogram
from .errors import *  # noqa: F401,F403
from .hermite import FunctionSpec, HermiteExpansion, abs_moment, differentiate, expand, hermite_eval, hermite_rank, shift
from .hurst import HurstResult, consistency_experiment, estimate_hurst, manufactured_pair, nested_pair
from .paths import CovarianceModel, PathBatch, fbm_increments_unit_scale, generate, sample_autocovariance
from .rates import BoundCheckSpec, RatePrediction, bound_value, brascamp_lieb_check, check_sum_inequality, predicted_rate
from .statistics import StatisticSamples, compute_yn, sigma_n_squared, sigma_squared, s_n_statistic
from .stein import BoundReport, bound_report, d_u2_yn, d_u_yn, fourth_cumulant, tv_upper_prop31, tv_upper_prop33

__version__ = "0.1.0"
