"""Delayed Cucker-Smale flocking under hierarchical leadership.

A desk-scale simulator for leadership flocks with a communication delay,
plus the verification harness that checks the model's structural guarantees:
positivity of the companion scalar system, velocity-hull confinement,
exponential collapse of the velocity diameter, alignment-functional
monotonicity, and polynomial decay under a driven leader.
"""

from .errors import (
    ConfigError,
    EmptyHorizon,
    FlockError,
    GraphValidationError,
    HistoryExhausted,
    InsufficientData,
    MisalignedDelay,
    NegativeDistance,
    NonFiniteState,
    NonPositiveSamples,
    OffsetUnavailable,
    OutOfWindow,
    QuadratureFailure,
)
from .graph import (
    EdgeNotBelow,
    EmptyLeaderSet,
    HLGraph,
    LeaderClosure,
    ValidationResult,
    depth,
    leader_closure,
    validate,
)
from .kernels import (
    CuckerSmaleKernel,
    Forcing,
    Kernel,
    KernelPrimitive,
    PowerDecayForcing,
    TabulatedForcing,
    TabulatedKernel,
    ZeroForcing,
    forcing_eval,
    forcing_l1_norm,
    has_divergent_tail,
    phi_eval,
    psi_eval,
)
from .dde import HistoryBuffer, StepperConfig, Trajectory, integrate, seed_history
from .sim import (
    ConstantInitialData,
    InitialData,
    LinearInitialData,
    SampledInitialData,
    SimSpec,
    flock_rhs,
    make_flock_rhs,
    make_scalar_rhs,
    pack_state,
    positions,
    run,
    run_scalar,
    scalar_rhs,
    velocities,
)
from .diagnostics import (
    DecayFit,
    DiagnosticsSeries,
    FlockingReport,
    LevelFunctional,
    LyapunovSeries,
    PairFunctional,
    VerdictThresholds,
    compute_diagnostics,
    cross_differences,
    diameter_series,
    diameters,
    fit_decay,
    flocking_verdict,
    leader_deviations,
    lyapunov_pair,
)

__version__ = "0.1.0"
