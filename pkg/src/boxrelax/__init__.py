"""Box relaxation decoding of BPSK signals from Gaussian linear measurements.

Exact asymptotic bit-error prediction, a box-constrained least-squares
decoder, and Monte Carlo machinery to check one against the other.
"""

from .boxsolve import (
    BoxSolution,
    DetectionResult,
    bit_error_rate,
    detect,
    detect_signs,
    kkt_residual,
    operator_norm_sq,
    oracle_box_ls_active_set,
    oracle_ml_exhaustive,
    solve_box_ls,
)
from .errors import (
    AggregateFailure,
    ConvergenceError,
    InvalidArgument,
    NumericalFailure,
    UnsupportedRegime,
)
from .model import ChannelInstance, ProblemShape, Purpose, RngStream, make_shape, sample_instance
from .theory import (
    TheoryPoint,
    do_objective,
    fixed_point_residual,
    gaussian_kernels,
    predict_pe,
    q_function,
    snr_gap_db,
    solve_tau_star,
)

__version__ = "0.1.0"
