"""Coagulation kinetics with a constant source of small clusters."""

__version__ = "0.1.0"

from .kernel import KernelSpec, Shape, eval_rate, eval_shape, separable_form, validate
from .regimes import (
    ProfileKind,
    Regime,
    RegimeReport,
    ScalingLaw,
    classify,
    predicted_length,
    predicted_moments,
)
from .discrete import (
    RunConfig,
    SourceSpec,
    StateVector,
    Trajectory,
    boundary_loss,
    integrate,
    mass_flux,
    moment,
    rhs,
)
from .quasistationary import (
    QSSolution,
    a_constant,
    cn_asymptote,
    inner_tail_prediction,
    log_cn_asymptote,
    log_particle_flux,
    particle_flux,
    solve_c1,
    solve_recursion,
    xn_sequence,
)
from .selfsimilar import (
    DiracParams,
    OriginBehavior,
    ProfileInfty,
    critical_origin_exponent,
    dirac_a,
    dirac_b,
    profile_infty,
    xi_star,
)
from .diagnostics import (
    FitResult,
    RescaledSnapshot,
    characteristic_length,
    collapse_distance,
    concentration_indicator,
    cumulative_tail,
    inner_tail_report,
    logcorrected_moment_fit,
    powerlaw_fit,
    rescale_snapshot,
)
from .oracle import StochasticConfig, constant_kernel_m0, stochastic_run
from .config import parse_config, serialize_config

__all__ = [name for name in dir() if not name.startswith("_")]
