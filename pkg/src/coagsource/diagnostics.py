"""Self-similarity evidence extracted from simulated trajectories.

Everything here is a pure function of immutable snapshots or series:
rescaling onto similarity variables, L1 collapse distances on a common log
grid, power-law and log-corrected least-squares fits, and the two scalar
concentration indicators used to detect one-point (Dirac) profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .kernel import KernelSpec
from .quasistationary import TailPrediction, inner_tail_prediction
from .discrete import StateVector, moment

#: Resolution of the common grid used for collapse distances.
BINS_PER_DECADE = 32


@dataclass(frozen=True)
class RescaledSnapshot:
    """Snapshot mapped to similarity variables xi = n/L, phi = c/amplitude."""

    xi: np.ndarray
    phi: np.ndarray
    t: float
    L_used: float
    scaling_exponent_pair: tuple[str, str]
    dxi: np.ndarray | None = None

    def bin_widths(self) -> np.ndarray:
        if self.dxi is not None:
            return self.dxi
        if self.xi.size == 1:
            return np.ones(1)
        # midpoint widths from the grid itself
        edges = np.empty(self.xi.size + 1)
        edges[1:-1] = 0.5 * (self.xi[:-1] + self.xi[1:])
        edges[0] = self.xi[0] - (edges[1] - self.xi[0])
        edges[-1] = self.xi[-1] + (self.xi[-1] - edges[-2])
        return np.diff(edges)

    def mass_per_point(self) -> np.ndarray:
        return self.xi * self.phi * self.bin_widths()


def rescale_snapshot(
    state: StateVector, L: float, t: float, amplitude: float
) -> RescaledSnapshot:
    """Map a discrete snapshot onto similarity variables.

    With the standard amplitude t/L^2 this preserves the change-of-variables
    identity sum(xi * phi) * dxi = m1(t)/t exactly.
    """
    if L <= 0.0 or t <= 0.0 or amplitude <= 0.0:
        raise ValueError("L, t and amplitude must all be positive")
    n = np.arange(1, state.n_bins + 1, dtype=float)
    return RescaledSnapshot(
        xi=n / L,
        phi=state.c / amplitude,
        t=t,
        L_used=L,
        scaling_exponent_pair=(f"L={L!r}", f"amplitude={amplitude!r}"),
        dxi=np.full(state.n_bins, 1.0 / L),
    )


def collapse_distance(a: RescaledSnapshot, b: RescaledSnapshot) -> float:
    """L1 distance between the mass densities xi*phi of two rescaled snapshots.

    Point masses are deposited into a shared logarithmic grid
    (mass-conserving piecewise-constant binning) and the absolute bin
    differences are summed, normalized by the mean total mass.
    """
    masses = []
    supports = []
    for snap in (a, b):
        m = snap.mass_per_point()
        keep = m > 0.0
        if not keep.any():
            raise ValueError("collapse distance is undefined for a zero-mass snapshot")
        masses.append(m[keep])
        supports.append(snap.xi[keep])
    lo = min(s.min() for s in supports)
    hi = max(s.max() for s in supports)
    span = max(math.log10(hi / lo), 1e-12)
    n_bins = max(1, int(math.ceil(span * BINS_PER_DECADE)) + 1)

    def deposit(xi, m):
        idx = np.floor((np.log10(xi / lo)) * BINS_PER_DECADE).astype(int)
        idx = np.clip(idx, 0, n_bins - 1)
        return np.bincount(idx, weights=m, minlength=n_bins)

    binned_a = deposit(supports[0], masses[0])
    binned_b = deposit(supports[1], masses[1])
    mean_mass = 0.5 * (binned_a.sum() + binned_b.sum())
    return float(np.abs(binned_a - binned_b).sum() / mean_mass)


@dataclass(frozen=True)
class FitResult:
    exponent: float
    stderr: float
    intercept: float
    n_points: int


def _least_squares(design: np.ndarray, response: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)
    resid = response - design @ coef
    dof = max(design.shape[0] - design.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0))


def powerlaw_fit(
    points,
    window: tuple[float, float],
    log_correction: bool = False,
) -> FitResult:
    """Least-squares slope of log y against log x inside a window.

    With ``log_correction`` a log(log x) regressor is added, which removes
    the bias a pure power fit picks up from slowly varying logarithmic
    prefactors (requires x > 1 throughout the window).
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    keep = (x >= window[0]) & (x <= window[1]) & (y > 0.0) & (x > 0.0)
    if log_correction:
        keep &= x > 1.0
    x, y = x[keep], y[keep]
    if x.size < 8:
        raise InsufficientDataError(
            f"power-law fit needs at least 8 points in the window, got {x.size}"
        )
    lx = np.log(x)
    ly = np.log(y)
    if log_correction:
        design = np.column_stack([np.ones_like(lx), lx, np.log(lx)])
    else:
        design = np.column_stack([np.ones_like(lx), lx])
    coef, err = _least_squares(design, ly)
    return FitResult(
        exponent=float(coef[1]),
        stderr=float(err[1]),
        intercept=float(coef[0]),
        n_points=int(x.size),
    )


def logcorrected_moment_fit(series) -> FitResult:
    """Fit M(t) ~ (log t)^q on a series of (t, M) pairs.

    Regression of log M against log log t; requires the log t values to span
    at least two e-foldings (a factor e^2).
    """
    pts = np.asarray(list(series), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("series must be (t, M) pairs")
    t, m = pts[:, 0], pts[:, 1]
    keep = (t > 1.0) & (m > 0.0)
    t, m = t[keep], m[keep]
    if t.size < 4:
        raise InsufficientDataError("log-corrected fit needs at least 4 usable points")
    log_t = np.log(t)
    if log_t.max() / log_t.min() < math.e**2:
        raise InsufficientDataError(
            "log-corrected fit needs the log t range to span two e-foldings"
        )
    design = np.column_stack([np.ones(t.size), np.log(log_t)])
    coef, err = _least_squares(design, np.log(m))
    return FitResult(
        exponent=float(coef[1]),
        stderr=float(err[1]),
        intercept=float(coef[0]),
        n_points=int(t.size),
    )


def concentration_indicator(state: StateVector) -> float:
    """m2 * m0 / m1^2; equals 1 exactly iff all mass sits at a single size."""
    m1 = moment(state, 1.0)
    if m1 <= 0.0:
        raise ValueError("concentration indicator is undefined for an empty state")
    return moment(state, 2.0) * moment(state, 0.0) / m1**2


def characteristic_length(state: StateVector) -> float:
    """Mean cluster size m1/m0."""
    m0 = moment(state, 0.0)
    if m0 <= 0.0:
        raise ValueError("characteristic length is undefined for an empty state")
    return moment(state, 1.0) / m0


@dataclass(frozen=True)
class TailReport:
    fit: FitResult
    target_slope: float | None
    target_log_power: float
    target_source: str


def default_fit_window(n_bins: int, source_max_size: int = 1) -> tuple[float, float]:
    """Central two decades of the admissible range [4*L_eta, N/4]."""
    lo_limit = 4.0 * source_max_size
    hi_limit = n_bins / 4.0
    if hi_limit <= lo_limit:
        raise ValueError("truncation too small to hold a fit window")
    span = math.log10(hi_limit / lo_limit)
    if span <= 2.0:
        return lo_limit, hi_limit
    center = math.sqrt(lo_limit * hi_limit)
    return center / 10.0, center * 10.0


def inner_tail_report(
    state: StateVector,
    window: tuple[float, float] | None,
    kernel: KernelSpec,
    m_gl: float | None = None,
    source_max_size: int = 1,
) -> TailReport:
    """Fitted tail exponent of a snapshot against its theoretical target.

    On the critical line (with a cross moment supplied) the target comes from
    the quasi-stationary tail prediction; otherwise it is the stationary
    -(gamma+3)/2 law of the small-size region.  Passing ``window=None`` picks
    the central two decades of the admissible range.
    """
    n_bins = state.n_bins
    lo_limit = 4.0 * source_max_size
    hi_limit = n_bins / 4.0
    if window is None:
        window = default_fit_window(n_bins, source_max_size)
    if window[0] < lo_limit or window[1] > hi_limit:
        raise ValueError(
            f"fit window must lie inside [{lo_limit}, {hi_limit}] "
            f"(4x the largest injected size to a quarter of the truncation)"
        )
    n = np.arange(1, n_bins + 1, dtype=float)
    points = np.column_stack([n, state.c])
    fit = powerlaw_fit(points, window)
    if kernel.on_critical_line and m_gl is not None:
        prediction: TailPrediction = inner_tail_prediction(kernel, m_gl)
        return TailReport(
            fit=fit,
            target_slope=prediction.slope,
            target_log_power=prediction.log_power,
            target_source="critical-line quasi-stationary tail",
        )
    return TailReport(
        fit=fit,
        target_slope=-(kernel.gamma + 3.0) / 2.0,
        target_log_power=0.0,
        target_source="stationary small-size power law",
    )


def cumulative_tail(state: StateVector, lam: float):
    """Cumulative tail transform G(x) = sum_{k > x} k^(1-lam) c_k.

    Returns (x, G) arrays over the occupied range; useful for comparing
    critical-line data against x^-(M^2 - 1) decay without binning noise.
    """
    n = np.arange(1, state.n_bins + 1, dtype=float)
    weighted = n ** (1.0 - lam) * state.c
    suffix = np.cumsum(weighted[::-1])[::-1]
    g = np.concatenate([suffix[1:], [0.0]])
    return n, g
