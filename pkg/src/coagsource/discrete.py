"""Truncated discrete coagulation system with a constant cluster source.

The state is the concentration vector c_1..c_N together with a cumulative
leakage ledger: coagulation events producing a size beyond the truncation
boundary remove both reactants and credit their mass and count to the ledger,
so the exact balance  m1(t) + leaked_mass(t) = m1(0) + t * (mass injection
rate)  holds at the ODE level and is preserved by the integrator up to
roundoff (Runge-Kutta steps conserve linear invariants).

Two right-hand-side engines are provided: a generic O(N^2) pairwise sum that
works for any kernel and doubles as the correctness oracle, and a fast path
for product-form kernels whose gain term is a single linear convolution
(direct below N = 4096, FFT-based above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import ConfigError, IntegratorError
from .kernel import KernelSpec, eval_rate_grid, separable_form

#: Largest truncation for which the generic engine materializes pair tables.
GENERIC_MAX_BINS = 4096

#: Direct convolution is used below this size, FFT convolution at and above.
DIRECT_CONV_MAX_BINS = 4096


@dataclass(frozen=True)
class SourceSpec:
    """Constant-in-time injection of small clusters.

    ``entries`` is a finite list of (size, rate) pairs.  The total mass
    injection rate sum(n * rate) is required to equal 1 (the time unit of the
    model) unless ``allow_unnormalized`` is set.
    """

    entries: tuple[tuple[int, float], ...]
    allow_unnormalized: bool = False

    def __post_init__(self):
        clean = []
        for size, rate in self.entries:
            if int(size) != size or size < 1:
                raise ConfigError(f"source size must be a positive integer, got {size!r}")
            if rate < 0.0:
                raise ConfigError(f"source rate must be nonnegative, got {rate!r}")
            clean.append((int(size), float(rate)))
        object.__setattr__(self, "entries", tuple(clean))
        if not self.allow_unnormalized and self.entries:
            if abs(self.mass_rate - 1.0) > 1e-12:
                raise ConfigError(
                    "source mass-injection rate must be 1 "
                    f"(got {self.mass_rate!r}); pass allow_unnormalized=True "
                    "to override"
                )

    @classmethod
    def monomer(cls, rate: float = 1.0) -> "SourceSpec":
        return cls(((1, rate),), allow_unnormalized=(rate != 1.0))

    @classmethod
    def empty(cls) -> "SourceSpec":
        return cls((), allow_unnormalized=True)

    @property
    def mass_rate(self) -> float:
        return math.fsum(n * r for n, r in self.entries)

    @property
    def number_rate(self) -> float:
        return math.fsum(r for _, r in self.entries)

    @property
    def max_size(self) -> int:
        return max((n for n, _ in self.entries), default=1)


@dataclass
class StateVector:
    """Concentrations at one time plus the cumulative boundary-loss ledger."""

    c: np.ndarray
    t: float = 0.0
    leaked_mass: float = 0.0
    leaked_number: float = 0.0

    @classmethod
    def empty(cls, n_bins: int) -> "StateVector":
        return cls(c=np.zeros(n_bins))

    @property
    def n_bins(self) -> int:
        return self.c.shape[0]

    def copy(self) -> "StateVector":
        return StateVector(
            c=self.c.copy(),
            t=self.t,
            leaked_mass=self.leaked_mass,
            leaked_number=self.leaked_number,
        )


@dataclass(frozen=True)
class RunConfig:
    kernel: KernelSpec
    source: SourceSpec
    n_bins: int
    t_end: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    snapshot_times: tuple[float, ...] = ()
    rhs_mode: str = "separable"

    def __post_init__(self):
        if self.n_bins < self.source.max_size:
            raise ConfigError(
                f"n_bins = {self.n_bins} is smaller than the largest source "
                f"size {self.source.max_size}"
            )
        for name in ("rel_tol", "abs_tol"):
            tol = getattr(self, name)
            if not 0.0 < tol <= 1e-2:
                raise ConfigError(f"{name} must lie in (0, 1e-2], got {tol!r}")
        if self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end!r}")
        if self.rhs_mode not in ("separable", "generic"):
            raise ConfigError(f"unknown rhs_mode {self.rhs_mode!r}")
        if self.rhs_mode == "separable" and separable_form(self.kernel) is None:
            raise ConfigError(
                "separable rhs_mode requires a product-form kernel; use "
                "rhs_mode = generic for this kernel"
            )
        object.__setattr__(
            self, "snapshot_times", tuple(sorted(float(s) for s in self.snapshot_times))
        )


class _SeparableEngine:
    """Gain term as rho * conv(n^p c, n^q c); leakage from the convolution tail."""

    def __init__(self, kernel: KernelSpec, n_bins: int):
        p, q, rho = separable_form(kernel)
        self.rho = rho
        n = np.arange(1, n_bins + 1, dtype=float)
        self.u = n**p
        self.v = n**q
        self.n_bins = n_bins
        # conv index m corresponds to coagulate size m + 2
        sizes = np.arange(2, 2 * n_bins + 1, dtype=float)
        self._tail_sizes = sizes[n_bins - 1 :]
        self._use_fft = n_bins >= DIRECT_CONV_MAX_BINS
        if self._use_fft:
            self._fft_len = sp_fft.next_fast_len(2 * n_bins - 1, real=True)

    def _convolve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if not self._use_fft:
            return np.convolve(a, b)
        fa = sp_fft.rfft(a, self._fft_len)
        fb = sp_fft.rfft(b, self._fft_len)
        return sp_fft.irfft(fa * fb, self._fft_len)[: 2 * self.n_bins - 1]

    def __call__(self, c: np.ndarray, eta: np.ndarray):
        a = self.u * c
        b = self.v * c
        conv = self.rho * self._convolve(a, b)
        m_u = a.sum()
        m_v = b.sum()
        loss = c * (self.rho * (self.u * m_v + self.v * m_u))
        dc = -loss + eta
        dc[1:] += conv[: self.n_bins - 1]
        tail = conv[self.n_bins - 1 :]
        # FFT roundoff can leave the (physically nonnegative) tail slightly
        # negative when nothing sits near the boundary
        d_leak_number = max(float(tail.sum()), 0.0)
        d_leak_mass = max(float(self._tail_sizes @ tail), 0.0)
        return dc, d_leak_mass, d_leak_number


class _GenericEngine:
    """Reference O(N^2) pairwise engine, any kernel, deterministic order."""

    def __init__(self, kernel: KernelSpec, n_bins: int):
        if n_bins > GENERIC_MAX_BINS:
            raise ConfigError(
                f"generic rhs_mode materializes an {n_bins}x{n_bins} kernel "
                f"table; limited to n_bins <= {GENERIC_MAX_BINS}"
            )
        n = np.arange(1, n_bins + 1, dtype=float)
        self.km = eval_rate_grid(kernel, n[:, None], n[None, :])
        sums = (np.arange(1, n_bins + 1)[:, None] + np.arange(1, n_bins + 1)[None, :])
        self._pair_size = sums.ravel()
        self.n_bins = n_bins
        sizes = np.arange(0, 2 * n_bins + 1, dtype=float)
        self._all_sizes = sizes

    def __call__(self, c: np.ndarray, eta: np.ndarray):
        pair = self.km * np.multiply.outer(c, c)
        totals = np.bincount(
            self._pair_size, weights=pair.ravel(), minlength=2 * self.n_bins + 1
        )
        loss = c * (self.km @ c)
        dc = -loss + eta
        dc[1:] += 0.5 * totals[2 : self.n_bins + 1]
        tail = totals[self.n_bins + 1 :]
        d_leak_number = 0.5 * tail.sum()
        d_leak_mass = 0.5 * (self._all_sizes[self.n_bins + 1 :] @ tail)
        return dc, d_leak_mass, d_leak_number


def _make_engine(cfg: RunConfig):
    if cfg.rhs_mode == "separable":
        return _SeparableEngine(cfg.kernel, cfg.n_bins)
    return _GenericEngine(cfg.kernel, cfg.n_bins)


def _source_vector(source: SourceSpec, n_bins: int) -> np.ndarray:
    eta = np.zeros(n_bins)
    for size, rate in source.entries:
        eta[size - 1] += rate
    return eta


def rhs(state: StateVector, cfg: RunConfig):
    """Time derivatives (dc/dt, d leaked_mass/dt, d leaked_number/dt)."""
    if state.n_bins != cfg.n_bins:
        raise ConfigError(
            f"state has {state.n_bins} bins, config expects {cfg.n_bins}"
        )
    if not np.all(np.isfinite(state.c)):
        raise IntegratorError("non-finite concentration input", state.t)
    engine = _make_engine(cfg)
    eta = _source_vector(cfg.source, cfg.n_bins)
    return engine(state.c, eta)


# Moments tracked along every trajectory, J in {0, 1, gamma+lam, 1-lam, 2}.
SERIES_COLUMNS = ("m0", "m1", "m_gl", "m_one_minus_lambda", "m2")


@dataclass
class MomentSeries:
    t: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    m_gl: np.ndarray
    m_one_minus_lambda: np.ndarray
    m2: np.ndarray
    leaked_mass: np.ndarray
    leaked_number: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass
class Trajectory:
    cfg: RunConfig
    snapshots: list[StateVector]
    series: MomentSeries
    final_state: StateVector
    n_accepted: int
    n_rejected: int
    clamped_mass: float


# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_MAX_STEPS = 5_000_000
_SNAP_ATOL = 1e-9


def integrate(cfg: RunConfig, initial: StateVector | None = None) -> Trajectory:
    """Adaptive explicit integration of the truncated system to cfg.t_end.

    Positivity is enforced after every accepted step: concentrations in
    (-abs_tol, 0) are clamped to zero, anything more negative rejects the
    step.  Snapshots are taken exactly at the requested times; the five
    tracked moments and the leakage ledger are recorded at every accepted
    step.
    """
    n_bins = cfg.n_bins
    if initial is None:
        initial = StateVector.empty(n_bins)
    if initial.n_bins != n_bins:
        raise ConfigError(
            f"initial state has {initial.n_bins} bins, config expects {n_bins}"
        )
    engine = _make_engine(cfg)
    eta = _source_vector(cfg.source, n_bins)

    sizes = np.arange(1, n_bins + 1, dtype=float)
    gl = cfg.kernel.gl
    weights = [
        np.ones(n_bins, dtype=np.longdouble),
        sizes.astype(np.longdouble),
        (sizes**gl).astype(np.longdouble),
        (sizes ** (1.0 - cfg.kernel.lam)).astype(np.longdouble),
        (sizes**2).astype(np.longdouble),
    ]

    t = float(initial.t)
    t_end = float(cfg.t_end)
    if t_end <= t:
        raise ConfigError(f"t_end = {t_end!r} is not beyond the initial time {t!r}")
    c = initial.c.astype(float).copy()
    leaked_mass = float(initial.leaked_mass)
    leaked_number = float(initial.leaked_number)

    pending_snaps = [s for s in cfg.snapshot_times if s > t + _SNAP_ATOL]
    snapshots: list[StateVector] = []

    series_t: list[float] = []
    series_m: list[list[float]] = [[] for _ in weights]
    series_lm: list[float] = []
    series_ln: list[float] = []

    def record(t_now, c_now, lm_now, ln_now):
        series_t.append(t_now)
        cl = c_now.astype(np.longdouble)
        for store, w in zip(series_m, weights):
            store.append(float(w @ cl))
        series_lm.append(lm_now)
        series_ln.append(ln_now)

    def f(c_now):
        return engine(c_now, eta)

    record(t, c, leaked_mass, leaked_number)

    # Initial step-size guess from the derivative scale.
    dc0, dlm0, dln0 = f(c)
    scale0 = cfg.abs_tol + cfg.rel_tol * np.abs(c)
    d1 = float(np.sqrt(np.mean((dc0 / scale0) ** 2)))
    h = min(t_end - t, 1e-2 if d1 == 0.0 else 0.1 / d1, 1.0)

    k_c = [None] * 7
    k_lm = [0.0] * 7
    k_ln = [0.0] * 7
    k_c[0], k_lm[0], k_ln[0] = dc0, dlm0, dln0

    n_accepted = 0
    n_rejected = 0
    clamped_mass = 0.0
    min_h = 1e-14
    just_rejected = False

    while t < t_end - _SNAP_ATOL * max(1.0, t_end):
        hit_snap = False
        h = min(h, t_end - t)
        if pending_snaps and t + h >= pending_snaps[0] - _SNAP_ATOL:
            h = pending_snaps[0] - t
            hit_snap = True
        if h < min_h * max(1.0, abs(t)):
            raise IntegratorError("step size underflow", t)

        for i in range(1, 7):
            ci = c.copy()
            for j, a in enumerate(_DP_A[i]):
                if a != 0.0:
                    ci += (h * a) * k_c[j]
            k_c[i], k_lm[i], k_ln[i] = f(ci)

        c_new = c.copy()
        lm_new = leaked_mass
        ln_new = leaked_number
        err_c = np.zeros_like(c)
        for i in range(7):
            if _DP_B[i] != 0.0:
                c_new += (h * _DP_B[i]) * k_c[i]
                lm_new += h * _DP_B[i] * k_lm[i]
                ln_new += h * _DP_B[i] * k_ln[i]
            if _DP_E[i] != 0.0:
                err_c += (h * _DP_E[i]) * k_c[i]

        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(c), np.abs(c_new))
        err = float(np.sqrt(np.mean((err_c / scale) ** 2)))
        c_min = float(c_new.min()) if n_bins else 0.0

        if err <= 1.0 and c_min > -cfg.abs_tol:
            negatives = c_new < 0.0
            if negatives.any():
                clamped_mass += float(-(sizes[negatives] @ c_new[negatives]))
                c_new[negatives] = 0.0
            t += h
            c = c_new
            # ledger is cumulative: guard against roundoff-scale decreases
            leaked_mass = max(lm_new, leaked_mass)
            leaked_number = max(ln_new, leaked_number)
            n_accepted += 1
            record(t, c, leaked_mass, leaked_number)
            if hit_snap and pending_snaps:
                while pending_snaps and pending_snaps[0] <= t + _SNAP_ATOL:
                    pending_snaps.pop(0)
                snapshots.append(
                    StateVector(c.copy(), t, leaked_mass, leaked_number)
                )
            # FSAL: stage 7 was evaluated at (t + h, c_new)
            k_c[0], k_lm[0], k_ln[0] = k_c[6], k_lm[6], k_ln[6]
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
            if just_rejected:
                factor = min(factor, 1.0)
            just_rejected = False
        else:
            n_rejected += 1
            just_rejected = True
            factor = 0.5 if err <= 1.0 else max(0.1, 0.9 * err**-0.2)
        h *= factor
        if n_accepted + n_rejected > _MAX_STEPS:
            raise IntegratorError("step budget exhausted", t)

    final = StateVector(c.copy(), t, leaked_mass, leaked_number)
    series = MomentSeries(
        t=np.array(series_t),
        m0=np.array(series_m[0]),
        m1=np.array(series_m[1]),
        m_gl=np.array(series_m[2]),
        m_one_minus_lambda=np.array(series_m[3]),
        m2=np.array(series_m[4]),
        leaked_mass=np.array(series_lm),
        leaked_number=np.array(series_ln),
    )
    return Trajectory(
        cfg=cfg,
        snapshots=snapshots,
        series=series,
        final_state=final,
        n_accepted=n_accepted,
        n_rejected=n_rejected,
        clamped_mass=clamped_mass,
    )


def moment(state: StateVector, J: float) -> float:
    """Compensated sum of k^J c_k over the occupied bins."""
    if state.n_bins == 0:
        return 0.0
    k = np.arange(1, state.n_bins + 1, dtype=float)
    return math.fsum((k**J) * state.c)


def mass_flux(kernel: KernelSpec, state: StateVector, k_boundary: int) -> float:
    """Discrete mass current across the boundary k + 1/2.

    Sums i * K(i, j) * c_i * c_j over pairs with i <= k and i + j > k
    (j capped at the truncation).
    """
    n_bins = state.n_bins
    if not 1 <= k_boundary < n_bins:
        raise ValueError(
            f"boundary index must lie in [1, {n_bins - 1}], got {k_boundary!r}"
        )
    c = state.c
    sizes = np.arange(1, n_bins + 1, dtype=float)
    i_idx = np.arange(1, k_boundary + 1)
    # first partner index for each i: j >= max(1, k+1-i)
    j_start = np.maximum(1, k_boundary + 1 - i_idx)
    sep = separable_form(kernel)
    if sep is not None:
        p, q, rho = sep
        u = sizes**p
        v = sizes**q
        suf_u = np.concatenate([np.cumsum((u * c)[::-1])[::-1], [0.0]])
        suf_v = np.concatenate([np.cumsum((v * c)[::-1])[::-1], [0.0]])
        su = suf_u[j_start - 1]
        sv = suf_v[j_start - 1]
        inner = rho * (u[: k_boundary] * sv + v[: k_boundary] * su)
        return float(np.dot(i_idx * c[:k_boundary], inner))
    total = 0.0
    for i, j0 in zip(i_idx, j_start):
        row = eval_rate_grid(kernel, float(i), sizes[j0 - 1 :])
        total += i * c[i - 1] * float(row @ c[j0 - 1 :])
    return total


def boundary_loss(state: StateVector) -> tuple[float, float]:
    """Cumulative (mass, number) transferred past the truncation boundary."""
    return state.leaked_mass, state.leaked_number
