"""Long-time regime classification for the source-driven coagulation system.

Dimensional analysis of the truncated moment hierarchy singles out seven
long-time regimes on the accepted (gamma, lam) parameter set, each with its
own characteristic-length law L(t) and moment laws for the cluster count
m0(t) and the cross moment m_{gamma+lam}(t).  Laws are kept symbolic
(a power of t times a power of ln t, prefactor pinned to 1 and documented as
undetermined) so they can be printed, serialized and compared exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import RegimeError
from .kernel import KernelSpec

#: Fraction of gamma+2*lam appearing in the logarithmic moment law.
_HALF = 0.5


class Regime(str, enum.Enum):
    STATIONARY_SUBCRITICAL = "stationary-subcritical"
    STANDARD_SELF_SIMILAR = "standard-self-similar"
    DIRAC_LOG = "dirac-log"
    DIRAC_LINEAR = "dirac-linear"
    LOG_FLUX = "log-flux"
    CRITICAL_ABOVE_MINUS_ONE = "critical-above-minus-one"
    CRITICAL_CONJECTURE = "critical-conjecture"


class ProfileKind(str, enum.Enum):
    POWER_LAW_TAIL = "power-law-tail"
    DIRAC = "dirac"
    COMPACT_SUPPORT = "compact-support"
    VANISHING_ORIGIN = "vanishing-origin"
    CONJECTURAL = "conjectural"


@dataclass(frozen=True)
class ScalingLaw:
    """Symbolic law ``value(t) = t^t_exponent * (ln t)^log_exponent * M^mgl_exponent``.

    ``mgl_exponent`` is nonzero only for laws that keep the cross moment
    m_{gamma+lam} as a free input.  The multiplicative prefactor is
    undetermined by dimensional analysis and is fixed to 1.
    """

    t_exponent: float
    log_exponent: float = 0.0
    mgl_exponent: float = 0.0

    @property
    def is_constant(self) -> bool:
        return (
            self.t_exponent == 0.0
            and self.log_exponent == 0.0
            and self.mgl_exponent == 0.0
        )

    def evaluate(self, t: float, m_gl: float | None = None) -> float:
        if t <= 0.0:
            raise RegimeError(f"law evaluation requires t > 0, got {t!r}")
        value = t**self.t_exponent
        if self.log_exponent != 0.0:
            log_t = math.log(t)
            if log_t <= 0.0:
                raise RegimeError(
                    f"law has a logarithmic factor, needs t > 1, got {t!r}"
                )
            value *= log_t**self.log_exponent
        if self.mgl_exponent != 0.0:
            if m_gl is None or m_gl <= 0.0:
                raise RegimeError(
                    "law depends on the cross moment; pass a positive m_gl"
                )
            value *= m_gl**self.mgl_exponent
        return value

    def describe(self, symbol: str = "t") -> str:
        parts = []
        if self.t_exponent != 0.0:
            parts.append(f"{symbol}^{self.t_exponent:g}")
        if self.log_exponent != 0.0:
            parts.append(f"(ln {symbol})^{self.log_exponent:g}")
        if self.mgl_exponent != 0.0:
            parts.append(f"M^{self.mgl_exponent:g}")
        return " * ".join(parts) if parts else "const"

    def to_dict(self) -> dict:
        return {
            "t_exponent": self.t_exponent,
            "log_exponent": self.log_exponent,
            "mgl_exponent": self.mgl_exponent,
        }


@dataclass(frozen=True)
class RegimeReport:
    """Classification result: the regime plus its three scaling laws."""

    regime: Regime
    gamma: float
    lam: float
    length_law: ScalingLaw
    length_law_substituted: ScalingLaw
    m0_law: ScalingLaw
    mgl_law: ScalingLaw
    profile: ProfileKind
    conjectural: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def gl(self) -> float:
        return self.gamma + self.lam

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "gamma": self.gamma,
            "lambda": self.lam,
            "length_law": self.length_law.to_dict(),
            "length_law_substituted": self.length_law_substituted.to_dict(),
            "m0_law": self.m0_law.to_dict(),
            "mgl_law": self.mgl_law.to_dict(),
            "profile": self.profile.value,
            "conjectural": self.conjectural,
            "notes": list(self.notes),
        }


def classify(k: KernelSpec) -> RegimeReport:
    """Map an accepted kernel to its long-time regime and scaling laws."""
    gamma, lam = k.gamma, k.lam
    gl = k.gl
    gl2 = k.gl2
    standard_length = ScalingLaw(2.0 / (1.0 - gamma))
    standard_m0 = ScalingLaw(-(1.0 + gamma) / (1.0 - gamma))

    if k.sign_gl2_minus_one < 0:
        # Stationary small-size region feeding a standard self-similar bulk;
        # the cross moment saturates at its stationary value.
        return RegimeReport(
            regime=Regime.STATIONARY_SUBCRITICAL,
            gamma=gamma,
            lam=lam,
            length_law=standard_length,
            length_law_substituted=standard_length,
            m0_law=standard_m0,
            mgl_law=ScalingLaw(0.0),
            profile=ProfileKind.POWER_LAW_TAIL,
        )

    if k.sign_gl2_minus_one == 0:
        if k.sign_gamma_plus_one > 0:
            return RegimeReport(
                regime=Regime.CRITICAL_ABOVE_MINUS_ONE,
                gamma=gamma,
                lam=lam,
                length_law=standard_length,
                length_law_substituted=standard_length,
                m0_law=standard_m0,
                mgl_law=ScalingLaw(0.0),
                profile=ProfileKind.VANISHING_ORIGIN,
            )
        return RegimeReport(
            regime=Regime.CRITICAL_CONJECTURE,
            gamma=gamma,
            lam=lam,
            length_law=standard_length,
            length_law_substituted=standard_length,
            m0_law=standard_m0,
            mgl_law=ScalingLaw(0.0),
            profile=ProfileKind.CONJECTURAL,
            conjectural=True,
            notes=(
                "near-origin profile has two candidate behaviours depending "
                "on the limiting cross moment M: "
                "xi^(-(gamma+3)/2) * (ln(1/xi))^-2 when M = 1, and "
                "xi^(-(gamma+3)/2 - (M^2 - 1)) when M < 1; "
                "both are listed, none is selected",
            ),
        )

    # gamma + 2*lam > 1 from here on.
    if k.sign_gamma_plus_one > 0:
        return RegimeReport(
            regime=Regime.STANDARD_SELF_SIMILAR,
            gamma=gamma,
            lam=lam,
            length_law=standard_length,
            length_law_substituted=standard_length,
            m0_law=standard_m0,
            mgl_law=ScalingLaw((gl2 - 1.0) / (1.0 - gamma)),
            profile=ProfileKind.VANISHING_ORIGIN,
        )

    if k.sign_gamma_plus_one == 0:
        # gamma = -1: linear growth with a square-root logarithmic correction.
        return RegimeReport(
            regime=Regime.DIRAC_LOG,
            gamma=gamma,
            lam=lam,
            length_law=ScalingLaw(1.0, 0.5),
            length_law_substituted=ScalingLaw(1.0, 0.5),
            m0_law=ScalingLaw(0.0, -0.5),
            mgl_law=ScalingLaw(gl, 0.5 * (gl - 1.0)),
            profile=ProfileKind.DIRAC,
        )

    if k.sign_gamma_plus_lambda > 0:
        return RegimeReport(
            regime=Regime.DIRAC_LINEAR,
            gamma=gamma,
            lam=lam,
            length_law=ScalingLaw(1.0),
            length_law_substituted=ScalingLaw(1.0),
            m0_law=ScalingLaw(0.0),
            mgl_law=ScalingLaw(gl),
            profile=ProfileKind.DIRAC,
        )

    # gamma < -1 and gamma + lam <= 0: the cluster flux out of the small-size
    # region survives and the cross moment creeps up logarithmically.
    one_minus_gl = 1.0 - gl
    mgl_law = ScalingLaw(0.0, _HALF * gl2)
    return RegimeReport(
        regime=Regime.LOG_FLUX,
        gamma=gamma,
        lam=lam,
        length_law=ScalingLaw(1.0 / one_minus_gl, 0.0, -1.0 / one_minus_gl),
        length_law_substituted=ScalingLaw(
            1.0 / one_minus_gl, -_HALF * gl2 / one_minus_gl
        ),
        m0_law=ScalingLaw(-gl / one_minus_gl, _HALF * gl2 / one_minus_gl),
        mgl_law=mgl_law,
        profile=ProfileKind.COMPACT_SUPPORT,
    )


def predicted_length(
    report: RegimeReport, t: float, m_gl: float | None = None
) -> float:
    """Numeric L(t) under the regime's law.

    For the log-flux regime the law keeps the cross moment as a free input,
    so ``m_gl`` is required there; other regimes ignore it.
    """
    if t <= 1.0:
        raise RegimeError(f"length laws are stated for t > 1, got {t!r}")
    law = report.length_law
    if law.mgl_exponent != 0.0 and m_gl is None:
        raise RegimeError(
            f"{report.regime.value} length law needs the cross moment m_gl"
        )
    return law.evaluate(t, m_gl)


def predicted_moments(report: RegimeReport, t: float) -> tuple[float, float]:
    """Order-of-magnitude (m0, m_{gamma+lam}) at time t, up to constants.

    Each value carries an undetermined multiplicative constant fixed to 1;
    only the exponents are meaningful.
    """
    if t <= math.e:
        raise RegimeError(f"moment laws are stated for t > e, got {t!r}")
    return report.m0_law.evaluate(t), report.mgl_law.evaluate(t)


def regime_grid(
    gamma_values, lam_values
) -> list[tuple[float, float, str]]:
    """Phase map over a parameter grid: rows (gamma, lam, regime-or-rejected)."""
    from .errors import KernelValidationError
    from .kernel import validate as validate_kernel

    rows = []
    for gamma in gamma_values:
        for lam in lam_values:
            try:
                spec = validate_kernel(gamma, lam)
            except KernelValidationError:
                rows.append((float(gamma), float(lam), "rejected"))
                continue
            rows.append((float(gamma), float(lam), classify(spec).regime.value))
    return rows
