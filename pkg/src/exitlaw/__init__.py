"""Exit laws of killed Markov processes.

Exact linear algebra for finite chains, exact samplers for killing times and
exit locations, resurrected-process simulation, and the statistics needed to
compare them.
"""

from .errors import (
    ConvergenceError,
    DegenerateMarginalError,
    DomainError,
    InvalidGeneratorError,
    KillingNotAlmostSureError,
    NonIntegrableWarning,
    ReducibleChainError,
)
from .exact import (
    QsdResult,
    exit_law_exact,
    killed_generator,
    mean_exit_time_exact,
    mixture_decomposition,
    qsd_exact,
    resolvent_solve,
    resurrected_generator,
    resurrected_invariant_exact,
)
from .killing import (
    ExitBatch,
    ExitSample,
    HazardAccumulator,
    integrated_hazard,
    sample_exit_ctmc,
    sample_exit_ray_inversion,
    sample_exit_ray_thinning,
    sample_exits_ctmc,
    sample_exits_ray_inversion,
    sample_exits_ray_thinning,
)
from .process import (
    GeneratorMatrix,
    PiecewisePolynomialRate,
    RateTable,
    RayModel,
    eval_rate,
    path_generator,
    random_generator,
    rate_bound_on,
    ssrw_generator,
    validate_generator,
)
from .resurrection import (
    RebirthMeasure,
    RegenerationLog,
    check_integrability,
    invariant_estimate,
    kappa_reweight,
    simulate_resurrected,
)
from .stats import (
    EmpiricalDistribution,
    chi_square_test,
    independence_test,
    ks_2samp,
    ks_test,
    tv_distance,
)

__version__ = "0.1.0"
