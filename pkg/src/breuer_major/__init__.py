"""Explicit Breuer-Major bounds, exact chaos calculus and Monte Carlo checks
for functionals of stationary Gaussian sequences."""
from .bounds import (
    A_terms,
    BoundReport,
    bound_hermite_case,
    bound_series,
    bound_theorem,
    check_gamma_decay,
    gamma,
    predict_rate,
    predict_rate_fgn,
    stein_solution,
)
from .covariance import (
    CovarianceModel,
    fgn,
    poly_decay,
    sigma2_order,
    sigma2_total,
    table,
    theta_sequence,
)
from .errors import (
    BreuerMajorError,
    CapExceededError,
    ConditionError,
    ConfigError,
    NumericalError,
    QuadratureError,
)
from .hermite import HermiteExpansion, builtin, expand
from .montecarlo import (
    DistanceEstimate,
    RateFit,
    estimate_dC,
    estimate_kolmogorov,
    estimate_testfn,
    estimate_wasserstein,
    fit_rate,
)
from .simulate import partial_sum, partial_sums, sample_path

__version__ = "0.1.0"
