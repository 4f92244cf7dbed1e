"""Independent ground truth for cross-validating the mean-field solver.

Two oracles: the closed-form cluster-count solution for the size-independent
kernel (a scalar Riccati equation), and a finite-volume event-driven
stochastic simulator whose law converges to the mean-field system as the
volume grows.  The stochastic algorithm selects coagulation pairs from
per-size-class aggregate rates with rejection sampling inside classes, and
draws all randomness from a seeded numpy PCG64 generator; the generator
identity is part of the reproducibility contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegratorError
from .discrete import SourceSpec
from .kernel import KernelSpec, Shape, eval_rate, eval_shape, separable_form


def constant_kernel_m0(
    t: float, m0_initial: float, k: float, n_rate: float
) -> float:
    """Cluster count of dm0/dt = n_rate - (k/2) m0^2 at time t.

    The stable equilibrium is c* = sqrt(2 n_rate / k); initial values above
    it relax through the coth branch, values below through the tanh branch.
    """
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t!r}")
    if m0_initial < 0.0:
        raise ValueError(f"initial count must be nonnegative, got {m0_initial!r}")
    if k <= 0.0 or n_rate <= 0.0:
        raise ValueError("kernel value and injection rate must be positive")
    if t == 0.0:
        return m0_initial
    c_star = math.sqrt(2.0 * n_rate / k)
    rate = 0.5 * k * c_star  # = sqrt(n_rate * k / 2)
    ratio = m0_initial / c_star
    if ratio == 1.0:
        return c_star
    if ratio < 1.0:
        return c_star * math.tanh(rate * t + math.atanh(ratio))
    arg = rate * t + math.atanh(1.0 / ratio)
    return c_star / math.tanh(arg)


@dataclass(frozen=True)
class StochasticConfig:
    kernel: KernelSpec
    source: SourceSpec
    volume: float
    t_end: float
    seed: int
    sample_times: tuple[float, ...] = ()
    max_events: int = 20_000_000

    def __post_init__(self):
        if self.volume <= 0.0:
            raise ConfigError(f"volume must be positive, got {self.volume!r}")
        if self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end!r}")
        if not self.source.entries:
            raise ConfigError("stochastic runs need a nonempty source")
        times = tuple(sorted(float(s) for s in self.sample_times)) or (self.t_end,)
        object.__setattr__(self, "sample_times", times)


@dataclass
class EmpiricalTrajectory:
    cfg: StochasticConfig
    times: np.ndarray
    snapshots: list[np.ndarray]  # concentrations counts/V per sample time
    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    n_events: int
    injected_mass: int
    final_counts: np.ndarray


def _pair_weights(kernel: KernelSpec):
    """(p, q, rho, bound, needs_thinning) for the proposal kernel.

    Product-form kernels are proposed exactly; custom shapes are bounded by
    the canonical product with the same exponents, with the bound estimated
    on a dense grid of the shape ratio (a small safety margin is applied).
    """
    sep = separable_form(kernel)
    if sep is not None:
        p, q, rho = sep
        return p, q, rho, 1.0, False
    if kernel.shape is Shape.CONSTANT:
        raise ConfigError(
            "stochastic runs with a constant shape require gamma = 0"
        )
    # custom shape: bound F against the canonical product shape
    s = np.logspace(-9, math.log10(0.5), 2001)
    p, q = kernel.gl, -kernel.lam
    f_canon = s**p * (1.0 - s) ** q + (1.0 - s) ** p * s**q
    f_user = np.array([eval_shape(kernel, float(v)) for v in s])
    bound = 1.05 * float(np.max(f_user / f_canon))
    return p, q, 1.0, bound, True


def stochastic_run(cfg: StochasticConfig) -> EmpiricalTrajectory:
    """Event-driven finite-volume realization of coagulation with injection.

    Clusters of integer sizes i, j coagulate at rate K(i, j)/V per unordered
    pair; size-n clusters are injected at rate V * eta_n.  Deterministic for
    a fixed seed: same seed, same trajectory, byte for byte.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    p, q, rho, bound, needs_thinning = _pair_weights(cfg.kernel)
    volume = cfg.volume

    source_sizes = np.array([n for n, _ in cfg.source.entries], dtype=np.int64)
    source_rates = np.array([r for _, r in cfg.source.entries], dtype=float)
    injection_rate = volume * source_rates.sum()
    source_cum = np.cumsum(source_rates)
    source_cum /= source_cum[-1]

    capacity = max(64, int(source_sizes.max()) * 2)
    counts = np.zeros(capacity + 1, dtype=np.int64)  # index = size
    sizes_f = np.arange(capacity + 1, dtype=float)
    sizes_f[0] = 1.0  # avoid 0^negative warnings; index 0 is never occupied
    u_pow = sizes_f**p
    v_pow = sizes_f**q

    def grow(min_capacity):
        nonlocal capacity, counts, sizes_f, u_pow, v_pow
        new_cap = capacity
        while new_cap < min_capacity:
            new_cap *= 2
        new_counts = np.zeros(new_cap + 1, dtype=np.int64)
        new_counts[: capacity + 1] = counts
        counts = new_counts
        sizes_f = np.arange(new_cap + 1, dtype=float)
        sizes_f[0] = 1.0
        u_pow = sizes_f**p
        v_pow = sizes_f**q
        capacity = new_cap

    t = 0.0
    n_events = 0
    injected_mass = 0
    max_size = 0

    sample_iter = list(cfg.sample_times)
    times = []
    snapshots = []
    m0s, m1s, m2s = [], [], []

    def record(sample_t):
        occupied = counts[1:max(max_size, 1) + 1]
        conc = occupied / volume
        sizes = np.arange(1, occupied.size + 1, dtype=float)
        times.append(sample_t)
        snapshots.append(conc.copy())
        m0s.append(occupied.sum() / volume)
        m1s.append(float(sizes @ occupied) / volume)
        m2s.append(float((sizes**2) @ occupied) / volume)

    while True:
        u_w = u_pow * counts
        v_w = v_pow * counts
        total_u = u_w.sum()
        total_v = v_w.sum()
        diag = float((u_pow * v_pow) @ counts)
        coag_rate = bound * rho * max(total_u * total_v - diag, 0.0) / volume
        total_rate = coag_rate + injection_rate
        if total_rate <= 0.0:
            break
        t_next = t + rng.exponential(1.0 / total_rate)
        while sample_iter and sample_iter[0] <= min(t_next, cfg.t_end):
            record(sample_iter.pop(0))
        if t_next > cfg.t_end:
            break
        t = t_next
        n_events += 1
        if n_events > cfg.max_events:
            raise IntegratorError(
                "stochastic event budget exhausted (volume * time too large)", t
            )
        if rng.random() < injection_rate / total_rate:
            size = int(source_sizes[np.searchsorted(source_cum, rng.random())])
            counts[size] += 1
            injected_mass += size
            max_size = max(max_size, size)
            continue
        # coagulation: classes via aggregate weights, individuals uniformly
        cum_u = np.cumsum(u_w)
        cum_v = np.cumsum(v_w)
        while True:
            size_a = int(np.searchsorted(cum_u, rng.random() * cum_u[-1]))
            size_b = int(np.searchsorted(cum_v, rng.random() * cum_v[-1]))
            if size_a != size_b:
                break
            m = counts[size_a]
            if m >= 2 and rng.random() < (m - 1.0) / m:
                break
        if needs_thinning:
            proposal = rho * bound * (
                u_pow[size_a] * v_pow[size_b] + u_pow[size_b] * v_pow[size_a]
            )
            actual = eval_rate(cfg.kernel, float(size_a), float(size_b))
            if rng.random() >= actual / proposal:
                continue  # null event
        merged = size_a + size_b
        if merged > capacity:
            grow(merged)
        counts[size_a] -= 1
        counts[size_b] -= 1
        counts[merged] += 1
        max_size = max(max_size, merged)

    while sample_iter:
        record(sample_iter.pop(0))

    return EmpiricalTrajectory(
        cfg=cfg,
        times=np.array(times),
        snapshots=snapshots,
        m0=np.array(m0s),
        m1=np.array(m1s),
        m2=np.array(m2s),
        n_events=n_events,
        injected_mass=injected_mass,
        final_counts=counts[: max(max_size, 1) + 1].copy(),
    )
