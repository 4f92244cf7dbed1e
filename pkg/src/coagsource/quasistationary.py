"""Quasi-stationary small-size concentrations under a large cross moment.

When the cross moment M = m_{gamma+lam} is imposed as an external loss field,
the small-size balance closes into a two-term recursion: c_1 solves a scalar
quadratic, and every later c_n is a convolution of earlier values divided by
the (monomer pickup + external loss) rate.  Concentrations fall off roughly
like M^(-(2n-1)), so everything here runs in log-domain; linear values are
exposed only where they are guaranteed representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import logsumexp

from .errors import DivergenceError, KernelValidationError
from .kernel import KernelSpec, Shape, eval_rate, eval_rate_grid

_LOG_2PI = math.log(2.0 * math.pi)


def solve_c1(m_gl: float, k11: float) -> float:
    """Positive root of k11 * c^2 + m_gl * c = 1, cancellation-safe."""
    if k11 <= 0.0:
        raise ValueError(f"K(1,1) must be positive, got {k11!r}")
    if m_gl < 0.0:
        raise ValueError(f"cross moment must be nonnegative, got {m_gl!r}")
    return 2.0 / (m_gl + math.sqrt(m_gl * m_gl + 4.0 * k11))


@dataclass(frozen=True)
class QSSolution:
    """Log-domain quasi-stationary concentrations for an imposed cross moment."""

    kernel: KernelSpec
    m_gl: float
    log_c: np.ndarray

    @property
    def n_max(self) -> int:
        return self.log_c.shape[0]

    @property
    def c(self) -> np.ndarray:
        """Linear concentrations; underflows to 0 where log_c < ~-745."""
        return np.exp(self.log_c)


def _require_supercritical_or_critical(kernel: KernelSpec):
    if kernel.sign_gl2_minus_one < 0:
        raise KernelValidationError(
            "quasi-stationary recursion requires gamma + 2*lam >= 1, got "
            f"{kernel.gl2!r}"
        )


def _log_kernel_row(kernel: KernelSpec, left: np.ndarray, right: np.ndarray,
                    log_sizes: np.ndarray) -> np.ndarray:
    # log K(left, right) for integer size arrays (1-based sizes).
    if kernel.shape in (Shape.CANONICAL, Shape.KMR):
        p = 0.0 if kernel.shape is Shape.KMR else kernel.gl
        q = -kernel.lam
        ll = log_sizes[left - 1]
        lr = log_sizes[right - 1]
        return np.logaddexp(p * ll + q * lr, q * ll + p * lr)
    return np.log(eval_rate_grid(kernel, left.astype(float), right.astype(float)))


def solve_recursion(kernel: KernelSpec, m_gl: float, n_max: int) -> QSSolution:
    """Quasi-stationary concentrations c_1..c_n_max in log-domain.

    c_1 comes from :func:`solve_c1`; for n >= 2 the recursion is

        c_n = (1/2) sum_{j<n} K(n-j, j) c_{n-j} c_j
              / (K(1, n) c_1 + m_gl * n^(-lam)).

    Convolutions accumulate through log-sum-exp, so the result stays
    meaningful far beyond the underflow point of linear arithmetic.
    """
    _require_supercritical_or_critical(kernel)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max!r}")
    c1 = solve_c1(m_gl, eval_rate(kernel, 1.0, 1.0))
    log_c = np.empty(n_max)
    log_c[0] = math.log(c1)
    if n_max == 1:
        return QSSolution(kernel=kernel, m_gl=m_gl, log_c=log_c)
    sizes = np.arange(1, n_max + 1)
    log_sizes = np.log(sizes.astype(float))
    for n in range(2, n_max + 1):
        j = sizes[: n - 1]
        log_k = _log_kernel_row(kernel, np.full(n - 1, n) - j, j, log_sizes)
        log_num = math.log(0.5) + logsumexp(
            log_k + log_c[n - j - 1] + log_c[j - 1]
        )
        denom = eval_rate(kernel, 1.0, float(n)) * c1 + m_gl * float(n) ** (
            -kernel.lam
        )
        value = log_num - math.log(denom)
        if not math.isfinite(value):
            raise OverflowError(
                f"quasi-stationary recursion lost representability at n = {n}"
            )
        log_c[n - 1] = value
    return QSSolution(kernel=kernel, m_gl=m_gl, log_c=log_c)


def xn_sequence(kernel: KernelSpec, n_max: int) -> np.ndarray:
    """Log of the moment-free sequence X_n = (n^lam / 2) sum K X X, X_1 = 1.

    This is the recursion obtained by pulling the M^(2n-1) decay out of the
    quasi-stationary concentrations; it grows factorially and is therefore
    returned in log-domain.
    """
    _require_supercritical_or_critical(kernel)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max!r}")
    log_x = np.empty(n_max)
    log_x[0] = 0.0
    sizes = np.arange(1, n_max + 1)
    log_sizes = np.log(sizes.astype(float))
    for n in range(2, n_max + 1):
        j = sizes[: n - 1]
        log_k = _log_kernel_row(kernel, np.full(n - 1, n) - j, j, log_sizes)
        log_x[n - 1] = (
            kernel.lam * log_sizes[n - 1]
            - math.log(2.0)
            + logsumexp(log_k + log_x[n - j - 1] + log_x[j - 1])
        )
    return log_x


@lru_cache(maxsize=256)
def a_constant(p: float) -> float:
    """Adaptive quadrature of the tail constant  integral_0^inf log(1 + y^-p) dy.

    Finite only for p > 1; p <= 1 raises :class:`DivergenceError`.  Both
    endpoint singularities are removed by the substitution y = exp(+-u), and
    the absolute error is kept below 1e-8.
    """
    p = float(p)
    if p <= 1.0:
        raise DivergenceError(
            f"integral of log(1 + y^-p) diverges for p = {p!r} <= 1"
        )

    def lower(u):  # y = exp(-u), y in (0, 1]
        return float(np.logaddexp(0.0, p * u)) * math.exp(-u)

    def upper(u):  # y = exp(u), y in [1, inf)
        t = -p * u
        if t < -30.0:
            return math.exp(u + t)  # log1p(e^t) ~ e^t, product stays finite
        return math.log1p(math.exp(t)) * math.exp(u)

    i_lower, _ = sp_integrate.quad(lower, 0.0, np.inf, epsabs=1e-11, limit=400)
    i_upper, _ = sp_integrate.quad(upper, 0.0, np.inf, epsabs=1e-11, limit=400)
    return i_lower + i_upper


def _exponent_integral(p: float, z: float) -> float:
    """integral_0^z log(1 + y^-p) dy for p > 1, z >= 0."""
    if z <= 0.0:
        return 0.0

    def integrand(y):
        # log(1 + y^-p) written to stay finite down to y -> 0
        return -p * math.log(y) + math.log1p(y**p)

    if z <= 1.0:
        value, _ = sp_integrate.quad(integrand, 0.0, z, epsabs=1e-12, limit=400)
        return value

    def upper(u):  # y = exp(u) on [z, inf)
        t = -p * u
        if t < -30.0:
            return math.exp(u + t)
        return math.log1p(math.exp(t)) * math.exp(u)

    tail, _ = sp_integrate.quad(upper, math.log(z), np.inf, epsabs=1e-12, limit=400)
    return a_constant(p) - tail


def log_cn_asymptote(
    kernel: KernelSpec, m_gl: float, n: float, prefactor: float = 1.0
) -> float:
    """Log of the matched large-M approximation of the concentrations.

    Evaluates, in log-domain,

        prefactor * (2 pi)^(gamma/2 + lam) * M^2
        / (n^(gamma+lam) * sqrt(1 + M^2 / n^(gamma+2 lam)))
        * exp(-M^(2/(gamma+2 lam)) * integral_0^{n / M^(2/(gamma+2 lam))}
              log(1 + y^-(gamma+2 lam)) dy).

    The multiplicative constant in front is not fixed by the expansion; it is
    exposed as ``prefactor`` and defaults to 1.
    """
    p = kernel.gl2
    if kernel.sign_gl2_minus_one <= 0:
        raise DivergenceError(
            "large-size asymptote requires gamma + 2*lam > 1 (the exponent "
            f"integral diverges at the critical line); got {p!r}"
        )
    if m_gl <= 1.0:
        raise ValueError(f"asymptote is stated for m_gl > 1, got {m_gl!r}")
    if n < 1.0:
        raise ValueError(f"size must satisfy n >= 1, got {n!r}")
    if prefactor <= 0.0:
        raise ValueError("prefactor must be positive")
    core = m_gl ** (2.0 / p)
    z = n / core
    log_m = math.log(m_gl)
    log_n = math.log(n)
    return (
        (0.5 * kernel.gamma + kernel.lam) * _LOG_2PI
        + math.log(prefactor)
        + 2.0 * log_m
        - kernel.gl * log_n
        - 0.5 * float(np.logaddexp(0.0, 2.0 * log_m - p * log_n))
        - core * _exponent_integral(p, z)
    )


def cn_asymptote(
    kernel: KernelSpec, m_gl: float, n: float, prefactor: float = 1.0
) -> float:
    """Linear-domain value of :func:`log_cn_asymptote` (may underflow to 0)."""
    return math.exp(log_cn_asymptote(kernel, m_gl, n, prefactor))


def log_particle_flux(
    kernel: KernelSpec, m_gl: float, prefactor: float = 1.0
) -> float:
    """Log of the cluster flux out of the small-size region.

    The flux inherits the n -> infinity limit of the concentration
    asymptote:  prefactor * (2 pi)^(gamma/2 + lam) * M^2
    * exp(-M^(2/(gamma+2 lam)) * A_{gamma+2 lam}).
    """
    p = kernel.gl2
    if kernel.sign_gl2_minus_one <= 0:
        raise DivergenceError(
            "cluster flux formula requires gamma + 2*lam > 1, got "
            f"{p!r} (tail constant diverges on the critical line)"
        )
    if m_gl < 1.0:
        raise ValueError(f"flux is stated for m_gl >= 1, got {m_gl!r}")
    return (
        (0.5 * kernel.gamma + kernel.lam) * _LOG_2PI
        + math.log(prefactor)
        + 2.0 * math.log(m_gl)
        - m_gl ** (2.0 / p) * a_constant(p)
    )


def particle_flux(kernel: KernelSpec, m_gl: float, prefactor: float = 1.0) -> float:
    """Cluster flux J_c(M); exponentially small in M^(2/(gamma+2 lam))."""
    return math.exp(log_particle_flux(kernel, m_gl, prefactor))


@dataclass(frozen=True)
class TailPrediction:
    """Large-size behaviour of the critical-line quasi-stationary solution.

    ``exists`` is False when no solution is expected (cross moment below 1);
    otherwise the density behaves like x^slope * (ln x)^log_power.
    """

    exists: bool
    slope: float | None = None
    log_power: float = 0.0


def inner_tail_prediction(kernel: KernelSpec, m_gl: float) -> TailPrediction:
    """Predicted large-size tail on the critical line gamma + 2*lam = 1.

    For cross moment M > 1 the density decays like x^(lam - 1 - M^2); the
    borderline M = 1 picks up an extra (ln x)^-2; below M = 1 no solution is
    expected and a nonexistence flag is returned.
    """
    if not kernel.on_critical_line:
        raise KernelValidationError(
            "tail prediction applies on the critical line gamma + 2*lam = 1, "
            f"got {kernel.gl2!r}"
        )
    if m_gl <= 0.0:
        raise ValueError(f"cross moment must be positive, got {m_gl!r}")
    if abs(m_gl - 1.0) <= 1e-12:
        return TailPrediction(
            exists=True, slope=-(kernel.gamma + 3.0) / 2.0, log_power=-2.0
        )
    if m_gl < 1.0:
        return TailPrediction(exists=False)
    return TailPrediction(exists=True, slope=kernel.lam - 1.0 - m_gl**2)


def loss_balance_ratio(sol: QSSolution) -> float:
    """Post-hoc check of the dominant-loss approximation.

    Returns max_n of  sum_{j>=2} K(j, n) c_j / max(K(1, n) c_1, M n^-lam).
    Small values mean the two retained loss channels really dominate the
    interactions with the rest of the inner region.
    """
    kernel = sol.kernel
    n_max = sol.n_max
    c = sol.c
    sizes = np.arange(1, n_max + 1, dtype=float)
    c1 = c[0]
    worst = 0.0
    for n in range(1, n_max + 1):
        row = eval_rate_grid(kernel, sizes[1:], float(n))
        neglected = float(row @ c[1:])
        kept = max(eval_rate(kernel, 1.0, float(n)) * c1,
                   sol.m_gl * float(n) ** (-kernel.lam))
        if kept > 0.0:
            worst = max(worst, neglected / kept)
    return worst
