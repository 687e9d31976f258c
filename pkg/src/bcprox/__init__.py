"""Block-coordinate forward-backward solvers monitored by the forward-backward envelope.

Problems have the form ``Phi(x) = (1/N) sum_i f_i(x_i) + G(x)`` with smooth
blocks ``f_i`` and a possibly nonsmooth, nonseparable, nonconvex ``G``.
"""

from .accel import AccelConfig, accel_init, accel_parameters, accel_step, fbe_gradient_scaled, solve_accel
from .blocks import (
    BlockStructure,
    BlockVector,
    FunctionalG,
    NonsmoothOracle,
    Problem,
    QuadraticBlock,
    SmoothBlockOracle,
    Stepsize,
    ZeroG,
    norm_in_metric,
    quadratic_block,
    sine_block,
)
from .errors import BCProxError, ConfigError, ContractError, NumericError, StructureError
from .fbe import FbeEvaluator, fbe_moreau_form, fbe_value, forward_backward, model_value, prox_G
from .incremental import (
    FiniteSumProblem,
    FinitoState,
    SharingProblem,
    SharingState,
    extract_z,
    finito_step,
    sharing_step,
    solve_finito,
    solve_sharing,
)
from .prox import L0, L1, Box, NonNeg, PointIndicator, Quadratic, Zero, atom_from_spec, brute_force_prox
from .rates import (
    RateInputs,
    rate_accelerated,
    rate_essentially_cyclic,
    rate_randomized,
    rate_randomized_optimal,
    rate_shuffled_cyclic,
)
from .sampling import SamplerSpec, make_sampler
from .solver import BcSolverConfig, Status, check_sure_descent, proximal_gradient, solve_bc
from .structured import ConsensusG, GeneralizedSharingG, SeparableG, SharingG, consensus_prox, sharing_prox
from .trace import SolverTrace

__version__ = "0.1.0"
