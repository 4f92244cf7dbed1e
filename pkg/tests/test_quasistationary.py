import math

import numpy as np
import pytest
from scipy.special import gammaln

from coagsource import (
    a_constant,
    cn_asymptote,
    eval_rate,
    inner_tail_prediction,
    log_cn_asymptote,
    log_particle_flux,
    particle_flux,
    solve_c1,
    solve_recursion,
    validate,
    xn_sequence,
)
from coagsource.errors import DivergenceError, KernelValidationError
from coagsource.quasistationary import loss_balance_ratio


@pytest.fixture(scope="module")
def kmr_line_kernel():
    return validate(-1.5, 1.5, "canonical")


def reference_recursion(kernel, m_gl, n_max):
    """Plain linear-domain recursion, independent of the log-domain path."""
    k11 = eval_rate(kernel, 1.0, 1.0)
    c = [None, 2.0 / (m_gl + math.sqrt(m_gl**2 + 4.0 * k11))]
    for n in range(2, n_max + 1):
        acc = 0.0
        for j in range(1, n):
            acc += eval_rate(kernel, float(n - j), float(j)) * c[n - j] * c[j]
        denom = eval_rate(kernel, 1.0, float(n)) * c[1] + m_gl * float(n) ** (
            -kernel.lam
        )
        c.append(0.5 * acc / denom)
    return c


class TestSolveC1:
    def test_zero_moment(self):
        assert solve_c1(0.0, 2.0) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-15)

    def test_quadratic_root(self):
        assert solve_c1(10.0, 2.0) == pytest.approx(
            (-10.0 + math.sqrt(108.0)) / 4.0, rel=1e-14
        )
        assert solve_c1(10.0, 2.0) == pytest.approx(0.0980762, abs=1e-7)

    def test_large_moment_inverse_law(self):
        c1 = solve_c1(1e3, 2.0)
        assert c1 == pytest.approx(9.99998e-4, abs=1e-9)
        assert c1 * 1e3 == pytest.approx(1.0, abs=3e-6)

    def test_residual_property(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            m = rng.uniform(0.0, 1e4)
            k11 = rng.uniform(1e-3, 1e3)
            c1 = solve_c1(m, k11)
            assert abs(k11 * c1**2 + m * c1 - 1.0) <= 1e-12


class TestSolveRecursion:
    def test_matches_linear_domain_reference(self, kmr_line_kernel):
        ref = reference_recursion(kmr_line_kernel, 10.0, 30)
        sol = solve_recursion(kmr_line_kernel, 10.0, 30)
        for n in range(1, 31):
            assert math.exp(sol.log_c[n - 1]) == pytest.approx(ref[n], rel=1e-11)

    def test_c2_example_value(self, kmr_line_kernel):
        sol = solve_recursion(kmr_line_kernel, 10.0, 2)
        c2 = math.exp(sol.log_c[1])
        assert c2 == pytest.approx(0.00262219060, rel=1e-8)
        # leading-order value 2^lam K(1,1) / (2 M^3); the gap at M = 10 is
        # dominated by the M^-2 corrections and sits just under 8 percent
        approx = 2.0**1.5 / 1e3
        assert approx / c2 == pytest.approx(1.0, abs=0.08)

    def test_leading_order_tightens_with_m(self, kmr_line_kernel):
        sol = solve_recursion(kmr_line_kernel, 100.0, 2)
        c2 = math.exp(sol.log_c[1])
        assert 2.0**1.5 / 1e6 / c2 == pytest.approx(1.0, abs=8e-4)

    @pytest.mark.slow
    def test_positive_to_ten_thousand_bins(self, kmr_line_kernel):
        sol = solve_recursion(kmr_line_kernel, 10.0, 10_000)
        assert np.all(np.isfinite(sol.log_c))

    def test_stepwise_ratio_reduction(self, kmr_line_kernel):
        # growth factor (n+1)^(gamma+2*lam) / M^2, exact only up to the
        # monomer-pickup rate K(1, n) ~ 1 + n^(-lam) and small-n convolution
        # terms; the n = 1 step is clean, later steps carry those factors
        sol = solve_recursion(kmr_line_kernel, 50.0, 7)
        p = kmr_line_kernel.gl2
        ratios = np.exp(np.diff(sol.log_c))
        predicted = np.array([(n + 1.0) ** p / 50.0**2 for n in range(1, 7)])
        assert ratios[0] == pytest.approx(predicted[0], rel=0.01)
        assert np.all(np.abs(ratios / predicted - 1.0) <= 0.36)

    def test_consistency_residual(self, kmr_line_kernel):
        # substitute the solution back into the balance it discretizes
        m = 10.0
        n_max = 1000
        sol = solve_recursion(kmr_line_kernel, m, n_max)
        ref = None
        c1 = math.exp(sol.log_c[0])
        sizes = np.arange(1, n_max + 1, dtype=float)
        log_sizes = np.log(sizes)
        for n in (2, 10, 100, 1000):
            j = np.arange(1, n)
            log_k = np.logaddexp(
                -kmr_line_kernel.lam * log_sizes[j - 1],
                -kmr_line_kernel.lam * log_sizes[n - j - 1],
            )
            conv_log = log_k + sol.log_c[n - j - 1] + sol.log_c[j - 1]
            peak = conv_log.max()
            conv = 0.5 * math.exp(peak) * np.exp(conv_log - peak).sum()
            loss = (
                eval_rate(kmr_line_kernel, 1.0, float(n)) * c1
                + m * float(n) ** -kmr_line_kernel.lam
            ) * math.exp(sol.log_c[n - 1])
            assert conv == pytest.approx(loss, rel=1e-9)

    def test_requires_supercritical_flags(self):
        subcritical = validate(0.2, 0.2)
        with pytest.raises(KernelValidationError):
            solve_recursion(subcritical, 10.0, 5)


class TestXnSequence:
    def test_first_value_is_one(self, kmr_line_kernel):
        assert xn_sequence(kmr_line_kernel, 3)[0] == 0.0

    def test_second_value(self, kmr_line_kernel):
        log_x = xn_sequence(kmr_line_kernel, 2)
        assert math.exp(log_x[1]) == pytest.approx(2.0**1.5, rel=1e-13)

    def test_factorial_compensated_plateau(self, kmr_line_kernel):
        n_max = 300
        log_x = xn_sequence(kmr_line_kernel, n_max)
        n = np.arange(1, n_max + 1)
        compensated = (
            log_x
            + kmr_line_kernel.gl * np.log(n)
            - kmr_line_kernel.gl2 * gammaln(n + 1.0)
        )
        steps = np.abs(np.diff(compensated[200:]))
        assert steps.max() <= 1e-3

    def test_moment_scaling_view(self, kmr_line_kernel):
        # at large imposed moment, c_n = X_n / M^(2n-1) for the first bins
        m = 1e3
        sol = solve_recursion(kmr_line_kernel, m, 10)
        log_x = xn_sequence(kmr_line_kernel, 10)
        for n in range(1, 11):
            reconstructed = sol.log_c[n - 1] + (2 * n - 1) * math.log(m)
            assert math.exp(reconstructed - log_x[n - 1]) == pytest.approx(
                1.0, abs=1e-3
            )


class TestAConstant:
    @pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 7.0])
    def test_against_closed_form(self, p):
        assert abs(a_constant(p) - math.pi / math.sin(math.pi / p)) <= 1e-8

    def test_divergent_at_one(self):
        with pytest.raises(DivergenceError):
            a_constant(1.0)
        with pytest.raises(DivergenceError):
            a_constant(0.7)

    def test_random_exponents_property(self):
        rng = np.random.default_rng(2)
        for p in rng.uniform(1.05, 10.0, size=25):
            assert abs(a_constant(float(p)) - math.pi / math.sin(math.pi / p)) <= 1e-8


class TestCnAsymptote:
    def test_positive_everywhere(self, kmr_line_kernel):
        for n in (1.0, 3.0, 10.0, 1e3, 1e6):
            assert cn_asymptote(kmr_line_kernel, 6.0, n) > 0.0

    def test_large_n_limit_matches_flux_form(self):
        # for sizes far beyond the crossover scale the finite-size factors
        # drop out and the plateau value is the flux formula over n^(g+l)
        kernel = validate(-1.0, 1.5, "canonical")  # gamma + 2 lam = 2
        m = 6.0
        n = 1e4 * m ** (2.0 / kernel.gl2)
        plateau = (
            log_particle_flux(kernel, m) - kernel.gl * math.log(n)
        )
        assert math.exp(log_cn_asymptote(kernel, m, n) - plateau) == pytest.approx(
            1.0, abs=1e-3
        )

    def test_rejects_critical_line(self):
        critical = validate(-1.5, 1.25)
        with pytest.raises(DivergenceError):
            cn_asymptote(critical, 6.0, 10.0)

    def test_crossover_against_certified_values(self, kmr_line_kernel):
        # frozen from a 60-digit evaluation of the same formula
        assert log_cn_asymptote(kmr_line_kernel, 6.0, 50.0) == pytest.approx(
            -24.5798, abs=2e-4
        )


class TestParticleFlux:
    def test_uses_tail_constant_at_p_two(self):
        kernel = validate(-1.0, 1.5, "canonical")
        m = 4.0
        expected = (2 * math.pi) ** (0.5 * kernel.gamma + kernel.lam) * m**2 * math.exp(
            -(m ** (2.0 / kernel.gl2)) * math.pi
        )
        assert particle_flux(kernel, m) == pytest.approx(expected, rel=1e-9)

    def test_decreasing_beyond_stationary_point(self, kmr_line_kernel):
        p = kmr_line_kernel.gl2
        m_star = (p / a_constant(p)) ** (p / 2.0)
        values = [
            log_particle_flux(kmr_line_kernel, m)
            for m in np.linspace(max(m_star, 1.0) + 1e-6, 50.0, 40)
        ]
        assert np.all(np.diff(values) < 0.0)

    def test_faster_than_any_power_decay(self, kmr_line_kernel):
        # J_c(M) * M^100 -> 0, evaluated in log-domain to dodge overflow
        log_product = log_particle_flux(kmr_line_kernel, 1e4) + 100.0 * math.log(1e4)
        assert math.exp(log_product) == 0.0

    def test_rejects_critical_line(self):
        with pytest.raises(DivergenceError):
            particle_flux(validate(-1.5, 1.25), 2.0)


@pytest.fixture(scope="module")
def critical():
    return validate(-1.5, 1.25)


class TestInnerTailPrediction:
    def test_supercritical_moment(self, critical):
        pred = inner_tail_prediction(critical, math.sqrt(2.0))
        assert pred.exists
        assert pred.slope == pytest.approx(-1.75, rel=1e-12)
        assert pred.log_power == 0.0

    def test_marginal_moment_has_log_correction(self, critical):
        pred = inner_tail_prediction(critical, 1.0)
        assert pred.slope == pytest.approx(-0.75, rel=1e-12)
        assert pred.log_power == -2.0

    def test_subunit_moment_flags_nonexistence(self, critical):
        assert not inner_tail_prediction(critical, 0.5).exists

    def test_rejects_off_critical_kernels(self, kmr_line_kernel):
        with pytest.raises(KernelValidationError):
            inner_tail_prediction(kmr_line_kernel, 2.0)


def test_loss_balance_ratio_reports_small_values_at_large_m(kmr_line_kernel):
    sol = solve_recursion(kmr_line_kernel, 50.0, 50)
    assert loss_balance_ratio(sol) <= 0.01


@pytest.mark.parametrize("m_gl,tol", [(10.0, 1e-3), (20.0, 1e-4)])
def test_flux_identity_on_quasistationary_state(kmr_line_kernel, m_gl, tol):
    # mass put in at the bottom either crosses a boundary z as a pair flux or
    # has already been handed to the external loss field below z; on the
    # quasi-stationary state the two channels add up to the injection rate
    from coagsource import StateVector, mass_flux

    sol = solve_recursion(kmr_line_kernel, m_gl, 300)
    state = StateVector(c=sol.c)
    sizes = np.arange(1, 301, dtype=float)
    handed_over = sizes ** (1.0 - kmr_line_kernel.lam) * sol.c
    for boundary in (20, 50, 100):
        total = mass_flux(kmr_line_kernel, state, boundary) + m_gl * float(
            handed_over[:boundary].sum()
        )
        assert total == pytest.approx(1.0, abs=tol)
