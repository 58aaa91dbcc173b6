"""Imaging benchmarks: operators, images and problem instances."""

from .images import (
    PgmError,
    SplitMix64,
    add_gaussian_noise,
    pgm_read,
    pgm_write,
    synth_test_image,
)
from .operators import (
    LinearOperator,
    NormEstimate,
    compose,
    discrete_gradient_operator,
    estimate_operator_norm_sq,
    gaussian_blur_operator,
    haar_operator,
)
from .problems import (
    Instance,
    build_deblurring_problem,
    build_huber_rof_dual_problem,
    deblur_instance,
    deblurring_start,
    huber_rof_instance,
    huber_rof_start,
    lasso_synthetic,
    quadratic_l1_known,
    reference_optimum,
)
