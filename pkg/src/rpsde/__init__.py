"""rpsde: random periodic solutions of periodically forced SDEs.

Builds the limiting periodic motion of a dissipative SDE with time-periodic
coefficients by pullback, checks the contraction conditions that guarantee
it, estimates the induced phase-indexed laws, and probes their ergodicity
through the period-skeleton Markov evolution.
"""

__version__ = "0.1.0"

from .dissipativity import (
    SampleSpec,
    check_drift_conditions,
    check_generator_bound,
    contraction_report,
    two_point_generator,
)
from .errors import (
    AlignmentError,
    CapabilityError,
    ConfigError,
    DivergenceError,
    InvalidSpecError,
    NonConvergenceError,
    SchemaError,
    SingularityError,
    ToolkitError,
)
from .integrate import Trajectory, derivative_flow, integrate, integrate_pair
from .markov import (
    Interval,
    bel_gradient,
    ergodic_time_average,
    kb_average,
    mixing_report,
    mollified_indicator,
    transition_probability,
)
from .measures import (
    EmpiricalMeasure,
    check_period_invariance,
    sample_periodic_measure,
    support_interval,
    wasserstein1,
)
from .models import (
    CubicScalarSpec,
    LinearPeriodicSpec,
    LyapunovSpec,
    SdeModel,
    build_cubic_scalar,
    build_linear_periodic,
    build_polynomial_scalar,
    quadratic_lyapunov,
)
from .noise import GridSpec, NoisePath, ensemble
from .oracle import LinearOracle, linear_phase_variance, linear_rps_exact, ou_transition
from .pullback import (
    CauchyReport,
    RandomPeriodicPath,
    pullback_sequence,
    random_periodic_path,
    verify_random_periodicity,
)
from .trig import TrigPoly
