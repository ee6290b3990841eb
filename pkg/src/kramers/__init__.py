"""Inertial Langevin dynamics and its small-mass limit, numerically coupled.

The package simulates the inertial system

    dx = v dt,   m dv = [F(x) - gamma(x) v] dt + sigma(x) dB

together with its overdamped small-mass limit

    dx = [gamma^{-1}(x) F(x) + S(x)] dt + gamma^{-1}(x) sigma(x) dB

under the same Brownian increments, where the noise-induced drift S is
assembled from the matrix Lyapunov equation J gamma^T + gamma J =
sigma sigma^T.  On top of the integrators sit Monte Carlo estimators of
the pathwise sup-distance exceedance and exit probabilities across a
mass ladder, and sampling-based non-explosivity checks for the limit.
"""

from .errors import (
    BoundaryTooClose,
    DomainError,
    DomainMismatch,
    HorizonTooShort,
    KramersError,
    ParameterDomain,
    QuarantineExceeded,
    SamplingFailure,
    SingularSystem,
)
from .integrators import (
    CEMETERY,
    ExtendedState,
    NoiseStream,
    TrajectoryPair,
    d_infinity,
    simulate_coupled,
    step_overdamped,
    step_underdamped,
)
from .lyapunov import (
    LyapunovSolution,
    expm,
    friction_inverse,
    grad_friction_inverse,
    integral_lyapunov,
    noise_induced_drift,
    solve_lyapunov,
)
from .models import (
    BUILTIN_MODELS,
    DiffusionProfile,
    DomainSpec,
    Model,
    build_model,
    builtin_diffusion_model1,
    constant_model,
    dlvo_pair_model,
    from_fluctuation_dissipation,
    limiting_diffusion,
    limiting_drift,
    model_from_spec,
    model_to_spec,
    rotational_pore_model,
    wall_gravity_model,
)
from .montecarlo import (
    ConvergenceTable,
    ExperimentPlan,
    ExitTable,
    estimate_exceedance,
    estimate_exit_probability,
    wilson_interval,
)
from .stability import (
    LyapunovCandidate,
    ShellFamily,
    apply_generator,
    non_explosivity_report,
    verify_p1,
    verify_p2,
)

__version__ = "0.1.0"
