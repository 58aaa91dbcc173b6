"""Accelerated composite gradient methods with adaptive line search.

The core API: build a :class:`CompositeProblem`, then call :func:`run` with
one of ``METHODS`` to get a :class:`Trace` of objective values, Lipschitz
estimates, weights and wall-clock time units.
"""

from .analysis import (
    GuaranteeParams,
    acgm_guarantee_floor,
    per_wtu_rate_constants,
    certify_guarantee,
    gap_sequence,
)
from .linesearch import LineSearchError, LineSearchParams, l_upper_bound
from .metering import COSTS, wtu_of_run
from .problem import (
    CompositeProblem,
    diagonal_quadratic_l1,
    eval_F,
    least_squares_l1,
    prox_grad_step,
)
from .solvers import METHODS, Trace, TraceRecord, run

__version__ = "0.1.0"
