"""Loss functions for learning distributions under calibration constraints."""
from ._backend import BACKEND
from .core import (
    Distribution,
    Domain,
    EmpiricalDistribution,
    LevelSetPartition,
    Sampler,
    calibrated_matrix,
    coarsen,
    conditional_inverse_mean,
    enumerate_calibrated,
    is_calibrated,
    kl_divergence,
    l1_distance,
    level_sets,
    min_mass_ratio,
    point_mass,
    sample,
    tv_distance,
    uniform,
    validate_distribution,
)
from .errors import *  # noqa: F401,F403
from .losses import (
    LocalLoss,
    builtin_catalog,
    check_left_strong_concavity,
    empirical_loss,
    expected_loss,
    get_loss,
    jensen_gap,
    jensen_gap_lower_bound,
    loss_value,
)
from .bounds import (
    BoundReport,
    approx_bounds,
    concentration_bound,
    sample_properness_bound,
    strong_properness_gap_bound,
)
from .scoring import (ConcaveGenerator, divergence, get_generator, hellinger_sq, l2_counterexample,
                      loss_from_generator, separable_rate)
from .calibrate import (
    ApproxCalibrationParams,
    ConstructionTrace,
    estimate_bucket_masses,
    is_approx_calibrated,
    make_approx_calibrated,
)

__version__ = "0.1.0"
