"""Closed-form anomalous self-similar profiles and their degenerate limits.

Three shapes appear in the long-time theory: a compactly supported smooth
profile for negative combined exponent gamma+lam (computed here by splitting
off the integrand's simple pole analytically), and two one-point (Dirac)
profiles whose location/weight follow from moment normalization.  The
conjectured near-origin exponents on the critical line are provided as
reference targets for fit diagnostics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate

from .errors import DivergenceError, KernelValidationError
from .kernel import KernelSpec, eval_rate


def xi_star(gl: float) -> float:
    """Support endpoint (1 - gl)^(1/(1 - gl)) of the compact profile."""
    if gl > 0.0:
        raise ValueError(
            f"compact profiles require gamma + lam <= 0, got {gl!r}"
        )
    beta = 1.0 - gl
    return beta ** (1.0 / beta)


class _ProfileCore:
    """Shared quadrature machinery for the compact profile.

    The inner exponent integral has a simple pole at the support endpoint;
    the pole integrates to an explicit power of (xi_star - xi) and only the
    smooth remainder goes to adaptive quadrature.
    """

    def __init__(self, gl: float, quad_tol: float = 1e-10):
        self.gl = gl
        self.beta = 1.0 - gl
        self.xi_star = xi_star(gl)
        self.pole_weight = 1.0 / self.beta
        self.quad_tol = quad_tol
        # remainder value at the endpoint, from the second-order expansion
        self._r_at_star = gl / (2.0 * self.beta * self.xi_star)

    def _remainder(self, eta: float) -> float:
        u = self.xi_star - eta
        if u < 1e-7 * self.xi_star:
            return self._r_at_star
        d = self.beta - eta**self.beta
        return eta**-self.gl / d - self.pole_weight / u

    def _remainder_integral(self, xi: float) -> float:
        value, _ = sp_integrate.quad(
            self._remainder, 0.0, xi, epsabs=self.quad_tol, limit=200
        )
        return value

    def log_unnormalized(self, xi: float) -> float:
        """log of xi^-gl * (xi*/(xi*-xi))^(1/beta) * exp(remainder integral)."""
        if not 0.0 < xi < self.xi_star:
            raise ValueError(f"xi must lie in (0, xi_star), got {xi!r}")
        return (
            -self.gl * math.log(xi)
            + self.pole_weight * (math.log(self.xi_star) - math.log(self.xi_star - xi))
            + self._remainder_integral(xi)
        )

    def integrate_against(self, weight) -> float:
        """integral_0^{xi*} unnormalized_profile(xi) * weight(xi) d xi.

        The endpoint singularity (xi*-xi)^(-1/beta) is removed exactly by the
        substitution w = (xi*-xi)^(1-1/beta) on the upper half of the support.
        """
        a = self.pole_weight  # singularity exponent, in (0, 1)
        split = 0.5 * self.xi_star

        def smooth_part(xi):
            return math.exp(self.log_unnormalized(xi)) * weight(xi)

        low, _ = sp_integrate.quad(
            smooth_part, 0.0, split, epsabs=self.quad_tol, limit=200
        )

        one_minus_a = 1.0 - a
        star = self.xi_star

        def upper_part(w):
            xi = star - w ** (1.0 / one_minus_a)
            # strip the singular factor; it is absorbed by the substitution
            log_rest = (
                -self.gl * math.log(xi)
                + a * math.log(star)
                + self._remainder_integral(xi)
            )
            return math.exp(log_rest) * weight(xi)

        w_max = (star - split) ** one_minus_a
        high, _ = sp_integrate.quad(
            upper_part, 0.0, w_max, epsabs=self.quad_tol, limit=200
        )
        return low + high / one_minus_a


@dataclass(frozen=True)
class ProfileInfty:
    """Sampled compact self-similar profile with its analytic endpoints.

    ``samples`` covers (0, xi_star) on a grid that is logarithmic both in xi
    and in the distance to the support endpoint.  ``norm_c`` is the small-xi
    amplitude: phi(xi) * xi^gl -> norm_c as xi -> 0.
    """

    gl: float
    xi_star: float
    norm_c: float
    samples: tuple[tuple[float, float], ...]
    quad_tol: float = 1e-10

    def _core(self) -> _ProfileCore:
        return _ProfileCore(self.gl, self.quad_tol)

    def value(self, xi: float) -> float:
        """phi(xi); identically zero at and beyond the support endpoint."""
        if xi <= 0.0:
            raise ValueError(f"xi must be positive, got {xi!r}")
        if xi >= self.xi_star:
            return 0.0
        return self.norm_c * math.exp(self._core().log_unnormalized(xi))

    def weak_residual(self, test_fn, test_fn_prime) -> float:
        """Residual of the profile equation against one smooth test function.

        The equation in self-similar variables, tested weakly, reads

            integral phi(xi) * [ -(gl/(1-gl)) f(xi)
                                 + (xi/(1-gl) - xi^gl) f'(xi) ] d xi  =  0.

        The test function must vanish at the origin (compact support inside
        (0, inf)); a nonzero f(0) instead picks up norm_c * f(0), the mass
        flux entering through the origin.
        """
        core = self._core()
        gl = self.gl
        beta = 1.0 - gl

        def weight(xi):
            return -(gl / beta) * test_fn(xi) + (xi / beta - xi**gl) * test_fn_prime(xi)

        return self.norm_c * core.integrate_against(weight)

    def mass(self) -> float:
        """First moment integral xi * phi(xi) d xi over the support."""
        core = self._core()
        return self.norm_c * core.integrate_against(lambda xi: xi)


def profile_infty(gl: float, n_grid: int = 256, quad_tol: float = 1e-10) -> ProfileInfty:
    """Construct the compact self-similar profile for gl = gamma + lam < 0.

    The boundary case gl = 0 is rejected: the local exponent at the support
    endpoint reaches 1 there and the normalization integral diverges.
    """
    if gl >= 0.0:
        if gl == 0.0:
            raise DivergenceError(
                "normalization integral diverges at gamma + lam = 0 "
                "(endpoint exponent reaches 1)"
            )
        raise ValueError(f"compact profile requires gamma + lam < 0, got {gl!r}")
    if n_grid < 8:
        raise ValueError(f"n_grid must be at least 8, got {n_grid!r}")
    core = _ProfileCore(gl, quad_tol)
    star = core.xi_star
    norm = core.integrate_against(lambda xi: 1.0)
    norm_c = 1.0 / norm

    half = n_grid // 2
    low = star * np.logspace(-6.0, math.log10(0.5), half)
    gap = star * (1.0 - np.logspace(-8.0, math.log10(0.5), n_grid - half)[::-1])
    grid = np.unique(np.concatenate([low, gap]))
    samples = tuple(
        (float(xi), norm_c * math.exp(core.log_unnormalized(float(xi))))
        for xi in grid
    )
    return ProfileInfty(
        gl=gl, xi_star=star, norm_c=norm_c, samples=samples, quad_tol=quad_tol
    )


class DiracLaw(str, enum.Enum):
    LINEAR_T = "linear-t"  # ballistic length, profile b * delta(y - 1/b)
    LOG_T = "log-t"  # length with sqrt-log correction, profile (1/a) delta(y - a)


@dataclass(frozen=True)
class DiracParams:
    law: DiracLaw
    location: float
    weight: float


def dirac_b(m0_limit: float) -> DiracParams:
    """One-point profile of the ballistic regime from the cluster-count limit.

    The number normalization fixes the weight to the limiting cluster count
    b and puts the spike at rescaled size 1/b, so the mass normalization
    weight * location = 1 holds automatically.
    """
    if m0_limit <= 0.0:
        raise ValueError(f"cluster-count limit must be positive, got {m0_limit!r}")
    return DiracParams(law=DiracLaw.LINEAR_T, location=1.0 / m0_limit, weight=m0_limit)


def dirac_a(kernel: KernelSpec) -> DiracParams:
    """One-point profile of the log-corrected regime (gamma = -1).

    The spike location is pinned by the kernel alone: a = sqrt(K(1,1)),
    independent of the initial data; the weight 1/a carries unit mass.
    """
    if kernel.sign_gamma_plus_one != 0 or kernel.sign_gl2_minus_one <= 0:
        raise KernelValidationError(
            "log-corrected one-point profile requires gamma = -1 and "
            f"gamma + 2*lam > 1; got gamma = {kernel.gamma!r}, "
            f"gamma + 2*lam = {kernel.gl2!r}"
        )
    a = math.sqrt(eval_rate(kernel, 1.0, 1.0))
    return DiracParams(law=DiracLaw.LOG_T, location=a, weight=1.0 / a)


@dataclass(frozen=True)
class OriginBehavior:
    """Conjectured near-origin exponents of the critical-line profile."""

    power: float
    log_power: float


def critical_origin_exponent(m_gl: float, gamma: float) -> OriginBehavior:
    """Near-origin exponent targets on the critical line gamma + 2*lam = 1.

    Valid for cross moments 0 < m_gl <= 1; larger values make the gamma+lam
    moment of the profile divergent and are rejected.
    """
    if m_gl <= 0.0:
        raise ValueError(f"cross moment must be positive, got {m_gl!r}")
    if m_gl > 1.0 + 1e-12:
        raise ValueError(
            f"cross moment {m_gl!r} > 1 makes the profile's gamma+lam moment "
            "divergent; only m_gl <= 1 is admissible"
        )
    base = -(gamma + 3.0) / 2.0
    if abs(m_gl - 1.0) <= 1e-12:
        return OriginBehavior(power=base, log_power=-2.0)
    return OriginBehavior(power=base - (m_gl**2 - 1.0), log_power=0.0)
