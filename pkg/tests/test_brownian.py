import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gasbath.brownian import (GaussianMomentState, brownian_coefficients, coefficients_from_dpp,
                              compute_dpp, dpp_closed_form, moment_generator,
                              qbm_consistency_vs_kinetics, qbm_moment_evolution,
                              statistics_factor)
from gasbath.errors import CondensationError, DomainError
from gasbath.statmech import GasParameters
from gasbath.tmatrix import ConstantTMatrix, GaussianCutoffTMatrix


def mp_dpp(t_squared, m, beta, hbar):
    """``D_pp`` from its defining integral at 30 digits."""
    with mpmath.workdps(30):
        a = mpmath.mpf(beta) / (8 * m)
        radial = mpmath.quad(lambda q: q**3 * t_squared(q) * mpmath.exp(-a * q * q),
                             [0, 1 / mpmath.sqrt(a), mpmath.inf])
        pref = mpmath.mpf(2) / 3 * mpmath.pi**2 * m**2 / (beta * hbar) * 4 * mpmath.pi
        return float(pref * radial)


class LorentzianTMatrix:
    """A form factor with no Gaussian closed form."""

    def __init__(self, t0, qc):
        self.t0, self.qc = t0, qc

    def squared(self, q):
        return self.t0**2 / (1.0 + (np.asarray(q) / self.qc) ** 2)

    def describe(self):
        return {"model": "lorentzian", "t0": self.t0, "qc": self.qc}


# ---------------------------------------------------------------------------
# coefficients


def test_constant_dpp_reference_value():
    # 256 pi^3 / 3 at m = beta = hbar = t0 = 1
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.01)
    expected = 256.0 * math.pi**3 / 3.0
    assert compute_dpp(ConstantTMatrix(1.0), params) == pytest.approx(expected, rel=1e-12)
    assert dpp_closed_form(ConstantTMatrix(1.0), params) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("m, beta, hbar", [(1.0, 1.0, 1.0), (2.3, 0.4, 0.7), (0.5, 3.0, 1.9)])
def test_dpp_matches_mpmath(m, beta, hbar):
    params = GasParameters(m, 50.0, beta, "fermi", z=1.0, hbar=hbar)
    qc = 1.7
    gauss = GaussianCutoffTMatrix(0.8, qc)
    expected = mp_dpp(lambda q: 0.64 * mpmath.exp(-q * q / qc**2), m, beta, hbar)
    assert compute_dpp(gauss, params) == pytest.approx(expected, rel=1e-10)
    assert dpp_closed_form(gauss, params) == pytest.approx(expected, rel=1e-12)
    lor = LorentzianTMatrix(1.1, qc)
    expected = mp_dpp(lambda q: 1.21 / (1 + (q / qc) ** 2), m, beta, hbar)
    assert compute_dpp(lor, params) == pytest.approx(expected, rel=1e-10)


def test_no_closed_form_for_other_models():
    with pytest.raises(DomainError):
        dpp_closed_form(LorentzianTMatrix(1.0, 1.0), GasParameters(1, 10, 1, "mb", z=0.1))


def test_dpp_quadratic_in_coupling():
    params = GasParameters(1.0, 10.0, 1.0, "mb", z=0.1)
    d1 = compute_dpp(GaussianCutoffTMatrix(1.0, 2.0), params)
    d2 = compute_dpp(GaussianCutoffTMatrix(2.0, 2.0), params)
    assert d2 == pytest.approx(4.0 * d1, rel=1e-13)


def test_cutoff_approaches_constant():
    params = GasParameters(1.0, 10.0, 1.0, "mb", z=0.1)
    const = compute_dpp(ConstantTMatrix(1.0), params)
    width = math.sqrt(8.0 * params.m / params.beta)
    deficits = [1.0 - compute_dpp(GaussianCutoffTMatrix(1.0, k * width), params) / const
                for k in (10, 20, 40)]
    assert deficits[0] < 0.03 and all(d > 0 for d in deficits)
    # leading deficit 2 / (a qc^2) shrinks by four per doubling of the cutoff
    assert deficits[0] / deficits[1] == pytest.approx(4.0, rel=0.02)
    assert deficits[1] / deficits[2] == pytest.approx(4.0, rel=0.01)


def test_derived_coefficients():
    params = GasParameters(1.0, 20.0, 0.5, "mb", z=0.03, hbar=1.2)
    c = coefficients_from_dpp(3.0, params)
    assert c.gamma == pytest.approx(0.5 / 40.0 * 3.0)
    assert c.D_xx == pytest.approx((0.5 * 1.2 / 80.0) ** 2 * 3.0)
    assert c.stat_factor == 0.03 and c.gamma_eff == pytest.approx(0.03 * c.gamma)


@pytest.mark.parametrize("statistics, expected", [("mb", 1.0), ("bose", 2.0), ("fermi", 2 / 3)])
def test_friction_ratio_at_half_fugacity(statistics, expected):
    params = GasParameters(1.0, 100.0, 1.0, statistics, z=0.5)
    coeffs = brownian_coefficients(ConstantTMatrix(1.0), params)
    assert coeffs.friction_ratio_vs_mb == pytest.approx(expected, rel=1e-15)


def test_statistics_factor_domain():
    with pytest.raises(CondensationError):
        statistics_factor(1.0, "bose")
    with pytest.raises(DomainError):
        statistics_factor(0.0, "fermi")
    assert statistics_factor(9.0, "fermi") == pytest.approx(0.9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1.0, 1e3), st.floats(0.1, 10.0), st.floats(0.3, 3.0),
       st.floats(1e-3, 10.0))
def test_single_generator_identity(m, M, beta, hbar, t0):
    params = GasParameters(m, M, beta, "mb", z=0.01, hbar=hbar)
    assert brownian_coefficients(ConstantTMatrix(t0), params).single_generator_defect() < 1e-13


def test_zero_coupling_coefficients():
    c = brownian_coefficients(ConstantTMatrix(0.0), GasParameters(1, 10, 1, "bose", z=0.5))
    assert c.D_pp == c.D_xx == c.gamma == c.gamma_eff == 0.0
    assert c.single_generator_defect() == 0.0


def test_to_dict_round_trip():
    c = brownian_coefficients(ConstantTMatrix(1.0), GasParameters(1, 10, 1, "fermi", z=0.5))
    data = c.to_dict()
    assert data["friction_ratio_vs_mb"] == pytest.approx(2 / 3)
    assert data["provenance"]["tmatrix"]["model"] == "constant"


# ---------------------------------------------------------------------------
# moment equations


def ho_operators(dim, hbar):
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    x = math.sqrt(hbar / 2.0) * (a + a.T)
    p = 1j * math.sqrt(hbar / 2.0) * (a.T - a)
    return x, p


def bilinear_generator(rho, x, p, coeffs, hbar):
    """Brownian generator for one axis applied to a matrix in a truncated basis."""
    c, M = coeffs.stat_factor, coeffs.M

    def comm(a, b):
        return a @ b - b @ a

    H = p @ p / (2.0 * M)
    return (-1j / hbar * comm(H, rho)
            - c * coeffs.D_pp / hbar**2 * comm(x, comm(x, rho))
            - c * coeffs.D_xx / hbar**2 * comm(p, comm(p, rho))
            - c * 1j * coeffs.gamma / hbar * comm(x, p @ rho + rho @ p))


@pytest.mark.parametrize("hbar", [1.0, 0.6])
def test_moment_equations_against_operator_oracle(hbar):
    dim, support = 40, 10
    x, p = ho_operators(dim, hbar)
    rng = np.random.default_rng(11)
    params = GasParameters(1.3, 7.0, 0.8, "bose", z=0.4, hbar=hbar)
    coeffs = coefficients_from_dpp(0.37, params)
    A = moment_generator(coeffs)
    C_op = 0.5 * (x @ p + p @ x)
    ops = [x, p, x @ x, C_op, p @ p]
    for _ in range(3):
        g = np.zeros((dim, dim), complex)
        g[:support, :support] = rng.normal(size=(support, support)) \
            + 1j * rng.normal(size=(support, support))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        v = np.array([np.trace(op @ rho).real for op in ops] + [1.0])
        Lrho = bilinear_generator(rho, x, p, coeffs, hbar)
        measured = np.array([np.trace(op @ Lrho) for op in ops])
        assert np.max(np.abs(measured.imag)) < 1e-12
        np.testing.assert_allclose(measured.real, (A @ v)[:5], rtol=1e-11, atol=1e-11)


def test_expm_matches_solve_ivp():
    params = GasParameters(1.0, 10.0, 1.0, "fermi", z=2.0)
    coeffs = brownian_coefficients(GaussianCutoffTMatrix(0.05, 3.0), params)
    init = GaussianMomentState([0.3, -1.0, 2.0], [1.0, 0.0, -2.5], [1.0, 2.0, 5.0],
                               [0.5, 0.1, -4.0], [11.0, 10.0, 20.0])
    t_end = 2.0 / coeffs.gamma_eff
    A = moment_generator(coeffs)
    ts = np.linspace(0.0, t_end, 5)
    exact = qbm_moment_evolution(init, coeffs, ts)
    for axis in range(3):
        sol = integrate.solve_ivp(lambda t, v: A @ v, (0.0, t_end), init.as_vector(axis),
                                  t_eval=ts, method="DOP853", rtol=1e-13, atol=1e-13)
        for k, state in enumerate(exact):
            np.testing.assert_allclose(state.as_vector(axis), sol.y[:, k], rtol=1e-10)


def test_scalar_time_returns_single_state():
    params = GasParameters(1.0, 10.0, 1.0, "mb", z=0.1)
    coeffs = brownian_coefficients(ConstantTMatrix(0.1), params)
    init = GaussianMomentState.thermal(10.0, 1.0, width_x=1.0)
    assert isinstance(qbm_moment_evolution(init, coeffs, 1.0), GaussianMomentState)
    with pytest.raises(DomainError):
        qbm_moment_evolution(init, coeffs, -1.0)


def test_equipartition_for_random_parameters():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        statistics = rng.choice(["mb", "bose", "fermi"])
        z = rng.uniform(0.05, 0.9)
        params = GasParameters(rng.uniform(0.5, 2.0), rng.uniform(10, 500), rng.uniform(0.2, 5),
                               statistics, z=z, hbar=rng.uniform(0.5, 1.5))
        coeffs = brownian_coefficients(GaussianCutoffTMatrix(rng.uniform(0.1, 2.0),
                                                             rng.uniform(1.0, 5.0)), params)
        init = GaussianMomentState.thermal(params.M, 0.3 * params.beta, params.hbar,
                                           width_x=2.0, p0=rng.normal(size=3))
        final = qbm_moment_evolution(init, coeffs, 20.0 / coeffs.gamma_eff)
        np.testing.assert_allclose(final.pp, params.M / params.beta, rtol=1e-8)
        np.testing.assert_allclose(final.p, 0.0, atol=1e-8)


def test_covariance_stays_physical():
    params = GasParameters(1.0, 50.0, 2.0, "bose", z=0.6, hbar=0.8)
    coeffs = brownian_coefficients(ConstantTMatrix(0.2), params)
    sx = params.hbar / (2.0 * math.sqrt(params.M / 0.1))
    init = GaussianMomentState.thermal(params.M, 0.1, params.hbar, width_x=sx, p0=3.0)
    init.check(params.hbar)
    for state in qbm_moment_evolution(init, coeffs, np.linspace(0, 5 / coeffs.gamma_eff, 60)):
        state.check(params.hbar)


def test_uncertainty_violation_rejected():
    state = GaussianMomentState(0.0, 0.0, 0.01, 0.0, 1.0)
    with pytest.raises(DomainError):
        state.check(hbar=1.0)


def test_zero_coupling_is_free_motion():
    params = GasParameters(1.0, 10.0, 1.0, "mb", z=0.1)
    coeffs = brownian_coefficients(ConstantTMatrix(0.0), params)
    init = GaussianMomentState.thermal(10.0, 1.0, width_x=1.0, p0=2.0)
    state = qbm_moment_evolution(init, coeffs, 3.0)
    np.testing.assert_allclose(state.pp, init.pp, rtol=1e-15)
    np.testing.assert_allclose(state.x, 3.0 * 2.0 / 10.0, rtol=1e-14)
    np.testing.assert_allclose(state.xx, 1.0 + 9.0 * init.pp / 100.0, rtol=1e-14)


# ---------------------------------------------------------------------------
# consistency report


def synthetic_run(coeffs, params, factor=1.0, n=200):
    eq = 3.0 * params.M / params.beta
    t = np.linspace(0.0, 2.0 / coeffs.gamma_eff, n)
    return t, eq + 0.2 * eq * np.exp(-4.0 * factor * coeffs.gamma_eff * t)


def test_consistency_agrees_on_exact_relaxation():
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.01)
    coeffs = brownian_coefficients(ConstantTMatrix(1.0), params)
    report = qbm_consistency_vs_kinetics(*synthetic_run(coeffs, params), coeffs, params)
    assert report["status"] == "agree" and report["regime"] == "brownian"
    assert report["relative_difference"] < 1e-10


def test_consistency_detects_wrong_rate():
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.01)
    coeffs = brownian_coefficients(ConstantTMatrix(1.0), params)
    report = qbm_consistency_vs_kinetics(*synthetic_run(coeffs, params, 1.3), coeffs, params)
    assert report["status"] == "disagree"
    assert report["relative_difference"] == pytest.approx(0.3, rel=1e-6)


def test_consistency_flags_heavy_gas():
    params = GasParameters(1.0, 2.0, 1.0, "mb", z=0.01)
    coeffs = brownian_coefficients(ConstantTMatrix(1.0), params)
    report = qbm_consistency_vs_kinetics(*synthetic_run(coeffs, params), coeffs, params)
    assert report["alpha"] == 0.5
    assert report["regime"].startswith("outside")


def test_consistency_inconclusive_without_relaxation():
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.01)
    coeffs = brownian_coefficients(ConstantTMatrix(1.0), params)
    t = np.linspace(0.0, 1.0, 50)
    flat = np.full_like(t, 3.0 * params.M / params.beta)
    assert qbm_consistency_vs_kinetics(t, flat, coeffs, params)["status"] == "inconclusive"
    short = synthetic_run(coeffs, params, n=4)
    assert qbm_consistency_vs_kinetics(*short, coeffs, params)["status"] == "inconclusive"


def test_consistency_zero_coupling():
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.01)
    coeffs = brownian_coefficients(ConstantTMatrix(0.0), params)
    t = np.linspace(0.0, 1.0, 50)
    flat = np.full_like(t, 3.0 * params.M / params.beta)
    assert qbm_consistency_vs_kinetics(t, flat, coeffs, params)["status"] == "agree"
