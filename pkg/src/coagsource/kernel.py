"""Homogeneous coagulation kernels with a controlled cross-size asymptotic.

Kernels here have the factorized form ``K(x, y) = (x + y)^gamma * F(x/(x+y))``
with a symmetric shape function ``F(s) = F(1 - s)`` that behaves like
``s^(-lam)`` near the endpoints.  The pair ``(gamma, lam)`` fixes both the
overall homogeneity and the strength of small-against-large interactions,
which is what the rest of the package keys its behaviour on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import KernelRangeError, KernelValidationError

# Absolute tolerance for deciding whether parameters sit exactly on a
# classification boundary (gamma = -1, gamma + 2*lam = 1, gamma + lam = 0).
BOUNDARY_TOL = 1e-12


class Shape(str, enum.Enum):
    """Built-in shape families for the symmetric part of the kernel."""

    CONSTANT = "constant"  # F == 1
    CANONICAL = "canonical"  # K = x^(g+l) y^(-l) + y^(g+l) x^(-l)
    KMR = "kmr"  # K = x^(-mu) + y^(-mu), mu = lam = -gamma
    CUSTOM = "custom"  # user-supplied symmetric F on (0, 1)


def _sign(value: float, tol: float = BOUNDARY_TOL) -> int:
    if abs(value) <= tol:
        return 0
    return 1 if value > 0.0 else -1


@dataclass(frozen=True)
class KernelSpec:
    """Validated kernel parameters plus derived classification flags.

    Instances are immutable; build them through :func:`validate`.  The three
    ``sign_*`` fields are trichotomies (-1 / 0 / +1, with 0 meaning "on the
    boundary within ``BOUNDARY_TOL``") used by the regime classifier.
    """

    gamma: float
    lam: float
    shape: Shape
    custom_shape: Callable[[float], float] | None = None
    sign_gamma_plus_one: int = 0
    sign_gamma_plus_lambda: int = 0
    sign_gl2_minus_one: int = 0

    @property
    def gl(self) -> float:
        """Combined exponent gamma + lam."""
        return self.gamma + self.lam

    @property
    def gl2(self) -> float:
        """Combined exponent gamma + 2*lam."""
        return self.gamma + 2.0 * self.lam

    @property
    def on_critical_line(self) -> bool:
        return self.sign_gl2_minus_one == 0

    def rate(self, x: float, y: float) -> float:
        return eval_rate(self, x, y)

    def describe(self) -> str:
        rel = {-1: "< 1", 0: "= 1", 1: "> 1"}[self.sign_gl2_minus_one]
        return (
            f"{self.shape.value} kernel, gamma={self.gamma!r}, lam={self.lam!r}, "
            f"gamma+lam={self.gl!r}, gamma+2*lam {rel}"
        )


def validate(
    gamma: float,
    lam: float,
    shape: Shape | str = Shape.CANONICAL,
    custom_shape: Callable[[float], float] | None = None,
) -> KernelSpec:
    """Check kernel parameters and return an immutable :class:`KernelSpec`.

    Rejects gelling parameters (``gamma >= 1`` or ``gamma + lam >= 1``),
    ``gamma + 2*lam < 0``, and a KMR shape whose exponents do not satisfy
    ``gamma + lam = 0``.
    """
    shape = Shape(shape)
    gamma = float(gamma)
    lam = float(lam)
    if not (math.isfinite(gamma) and math.isfinite(lam)):
        raise KernelValidationError("kernel exponents must be finite")
    if gamma >= 1.0:
        raise KernelValidationError(
            f"gelling parameters: gamma = {gamma!r} >= 1"
        )
    if gamma + lam >= 1.0:
        raise KernelValidationError(
            f"gelling parameters: gamma + lam = {gamma + lam!r} >= 1"
        )
    if gamma + 2.0 * lam < -BOUNDARY_TOL:
        raise KernelValidationError(
            f"gamma + 2*lam = {gamma + 2.0 * lam!r} < 0 is outside the "
            "accepted exponent family"
        )
    if shape is Shape.KMR and abs(gamma + lam) > BOUNDARY_TOL:
        raise KernelValidationError(
            "KMR shape requires gamma + lam = 0, got "
            f"{gamma + lam!r}"
        )
    if shape is Shape.CUSTOM:
        if not callable(custom_shape):
            raise KernelValidationError(
                "custom shape requires a callable shape function"
            )
    elif custom_shape is not None:
        raise KernelValidationError(
            "a shape function is only accepted together with the custom shape"
        )
    return KernelSpec(
        gamma=gamma,
        lam=lam,
        shape=shape,
        custom_shape=custom_shape,
        sign_gamma_plus_one=_sign(gamma + 1.0),
        sign_gamma_plus_lambda=_sign(gamma + lam),
        sign_gl2_minus_one=_sign(gamma + 2.0 * lam - 1.0),
    )


def _power_pair(k: KernelSpec) -> tuple[float, float]:
    # Exponent pair (p, q) with K = x^p y^q + y^p x^q for the product forms.
    # KMR is pinned to p = 0 exactly so that the validated identity
    # gamma + lam = 0 is not blurred by rounding in gamma + lam.
    if k.shape is Shape.KMR:
        return 0.0, -k.lam
    return k.gl, -k.lam


def eval_rate(k: KernelSpec, x: float, y: float) -> float:
    """Evaluate K(x, y).

    The arguments are ordered internally before use, so the result is
    bit-for-bit symmetric in (x, y).  Raises :class:`KernelRangeError` when
    the value overflows the double range.
    """
    x = float(x)
    y = float(y)
    if not (x > 0.0 and y > 0.0):
        raise ValueError(f"cluster sizes must be positive, got ({x!r}, {y!r})")
    lo, hi = (x, y) if x <= y else (y, x)
    if k.shape is Shape.CONSTANT:
        value = 1.0 if k.gamma == 0.0 else (lo + hi) ** k.gamma
    elif k.shape is Shape.CUSTOM:
        s = lo / (lo + hi)
        f_sym = 0.5 * (k.custom_shape(s) + k.custom_shape(1.0 - s))
        value = f_sym if k.gamma == 0.0 else (lo + hi) ** k.gamma * f_sym
    else:
        # Product terms go through log-domain so extreme size/exponent
        # combinations do not overflow intermediates.
        p, q = _power_pair(k)
        log_lo = math.log(lo)
        log_hi = math.log(hi)
        value = math.exp(p * log_lo + q * log_hi) + math.exp(
            q * log_lo + p * log_hi
        )
    if not math.isfinite(value):
        raise KernelRangeError(
            f"K({x!r}, {y!r}) is not finite for {k.describe()}"
        )
    return value


def eval_rate_grid(k: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized K over broadcastable positive size arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k.shape is Shape.CONSTANT:
        total = x + y
        return np.ones(np.broadcast(x, y).shape) if k.gamma == 0.0 else total**k.gamma
    if k.shape is Shape.CUSTOM:
        total = x + y
        s = x / total
        shape_fn = np.vectorize(k.custom_shape, otypes=[float])
        f_sym = 0.5 * (shape_fn(s) + shape_fn(1.0 - s))
        return f_sym if k.gamma == 0.0 else total**k.gamma * f_sym
    p, q = _power_pair(k)
    log_x = np.log(x)
    log_y = np.log(y)
    return np.exp(p * log_x + q * log_y) + np.exp(q * log_x + p * log_y)


def eval_shape(k: KernelSpec, s: float) -> float:
    """Evaluate the shape function F(s) for s in (0, 1)."""
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"shape argument must lie in (0, 1), got {s!r}")
    a, b = (s, 1.0 - s) if s <= 1.0 - s else (1.0 - s, s)
    if k.shape is Shape.CONSTANT:
        return 1.0
    if k.shape is Shape.CUSTOM:
        return 0.5 * (k.custom_shape(a) + k.custom_shape(b))
    p, q = _power_pair(k)
    log_a = math.log(a)
    log_b = math.log(b)
    value = math.exp(p * log_a + q * log_b) + math.exp(q * log_a + p * log_b)
    if not math.isfinite(value):
        raise KernelRangeError(f"F({s!r}) is not finite for {k.describe()}")
    return value


def separable_form(k: KernelSpec) -> tuple[float, float, float] | None:
    """Return (p, q, rho) with K = rho * (x^p y^q + x^q y^p), if it exists.

    The canonical-product and KMR families are exactly of this form; the
    size-independent kernel is recovered with rho = 1/2.  Returns None for
    kernels without a two-term product decomposition (custom shapes, or a
    constant shape with nonzero homogeneity).
    """
    if k.shape in (Shape.CANONICAL, Shape.KMR):
        p, q = _power_pair(k)
        return p, q, 1.0
    if k.shape is Shape.CONSTANT and k.gamma == 0.0:
        return 0.0, 0.0, 0.5
    return None
