import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gasbath import dsf
from gasbath.errors import DomainError
from gasbath.statmech import GasParameters, occupation
from gasbath.tmatrix import ConstantTMatrix, GaussianCutoffTMatrix, make_tmatrix


def params_for(statistics, z, M=50.0, m=1.0, beta=1.0, hbar=1.0):
    return GasParameters(m, M, beta, statistics, z=z, hbar=hbar)


def mp_log_form(q, E, params, dps=50):
    """Logarithmic closed form at extended precision.

    S = C / (eps (e^{beta E} - 1)) * ln[(1 - eps z e^{-A}) / (1 - eps z e^{-B})]
    """
    with mpmath.workdps(dps):
        q, E = mpmath.mpf(q), mpmath.mpf(E)
        m, beta, z, hbar = (mpmath.mpf(v) for v in (params.m, params.beta, params.z, params.hbar))
        n = mpmath.mpf(params.n)
        C = 2 * mpmath.pi * m**2 / ((2 * mpmath.pi * hbar) ** 3 * n * beta * q)
        A = beta * (2 * m * E + q**2) ** 2 / (8 * m * q**2)
        B = beta * (2 * m * E - q**2) ** 2 / (8 * m * q**2)
        eps = params.statistics.sign
        if eps == 0:
            return C * z * mpmath.exp(-A)
        ratio = (1 - eps * z * mpmath.exp(-A)) / (1 - eps * z * mpmath.exp(-B))
        return C * mpmath.log(ratio) / (eps * mpmath.expm1(beta * E))


def transverse_oracle(q, E, params, nodes=200):
    """Occupation-number integral over the transverse plane, Cartesian Gauss-Legendre."""
    sigma = (2 * params.m * E + q * q) / (2 * q)
    half = math.sqrt(2 * params.m / params.beta * (45.0 + max(math.log(params.z), 0.0)))
    x, w = np.polynomial.legendre.leggauss(nodes)
    kx, ky = np.meshgrid(half * x, half * x, indexing="ij")
    k2 = kx**2 + ky**2
    n_in = occupation(np.sqrt(sigma**2 + k2), params)
    n_out = occupation(np.sqrt((sigma - q) ** 2 + k2), params)
    val = half**2 * w @ (n_in * (1 + params.statistics.sign * n_out)) @ w
    return params.m * val / (params.n * q * (2 * math.pi * params.hbar) ** 3)


CASES = [("bose", 0.9), ("bose", 0.3), ("fermi", 2.0), ("fermi", 0.5), ("mb", 0.3)]


@pytest.mark.parametrize("statistics, z", CASES)
def test_closed_form_matches_extended_precision(statistics, z):
    params = params_for(statistics, z, hbar=0.8, m=1.2, beta=0.7)
    for q, E in [(0.3, 0.05), (1.0, -1.3), (2.5, 2.0), (4.0, -0.001), (0.7, 1e-9)]:
        expected = float(mp_log_form(q, E, params))
        assert float(dsf.dsf_free_exact(q, E, params)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("statistics, z", CASES)
def test_extended_precision_detailed_balance(statistics, z):
    params = params_for(statistics, z)
    for q, E in [(0.5, 0.4), (2.0, 3.0), (1.0, -2.5)]:
        with mpmath.workdps(50):
            lhs = mp_log_form(q, -E, params) * mpmath.exp(-params.beta * E)
            rhs = mp_log_form(q, E, params)
            assert abs(lhs / rhs - 1) < mpmath.mpf(10) ** -40
        assert dsf.detailed_balance_residual(dsf.FreeExact(params), q, E) < 1e-13


def test_no_singularity_at_zero_energy():
    params = params_for("bose", 0.8)
    E = np.array([-1e-12, -1e-9, 0.0, 1e-9, 1e-12])
    values = dsf.dsf_free_exact(1.0, E, params)
    assert np.all(np.isfinite(values))
    assert values[2] == pytest.approx(float(mp_log_form(1.0, 1e-30, params)), rel=1e-12)


@pytest.mark.parametrize("statistics, z", [("bose", 0.5), ("fermi", 0.5), ("fermi", 3.0),
                                           ("bose", 0.95)])
def test_occupation_integral_oracle(statistics, z):
    params = params_for(statistics, z)
    rng = np.random.default_rng(11)
    for _ in range(5):
        q = rng.uniform(0.2, 6.0)
        E = rng.uniform(-3.0, 3.0)
        assert float(dsf.dsf_free_exact(q, E, params)) == pytest.approx(
            transverse_oracle(q, E, params), rel=1e-6)


@pytest.mark.parametrize("statistics, z", [("mb", 0.1), ("bose", 0.9), ("fermi", 2.0)])
def test_f_sum_rule(statistics, z):
    # first energy moment of a per-particle structure factor is minus the free recoil
    params = params_for(statistics, z, m=1.3, beta=0.8, hbar=0.7)
    for q in (0.5, 2.0):
        value, _ = integrate.quad(lambda E: E * float(dsf.dsf_free_exact(q, E, params)),
                                  -np.inf, np.inf, epsrel=1e-12, limit=400)
        assert value == pytest.approx(-q * q / (2 * params.m), rel=1e-10)


def test_mb_matches_free_exact_for_classical_params():
    params = params_for("mb", 0.2)
    q, E = np.meshgrid(np.linspace(0.1, 5, 9), np.linspace(-3, 3, 9))
    np.testing.assert_allclose(dsf.dsf_mb(q, E, params), dsf.dsf_free_exact(q, E, params),
                               rtol=1e-15)


def test_classical_recovery_linear_in_z():
    q, E = np.meshgrid(np.linspace(0.2, 8, 30), np.linspace(-3, 3, 31))
    for statistics in ("bose", "fermi"):
        errs = []
        for z in (1e-2, 1e-3, 1e-4):
            p = params_for(statistics, z)
            mb = p.replace(statistics="mb")
            ratio = p.n * dsf.dsf_free_exact(q, E, p) / (mb.n * dsf.dsf_mb(q, E, mb))
            errs.append(np.max(np.abs(ratio - 1)))
        assert errs[0] / errs[1] == pytest.approx(10, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(10, rel=0.05)


def test_rate_ordering_uses_n_times_s():
    # at equal fugacity the rate density n S is ordered by statistics
    # kept where z e^{-B} is not lost to rounding, so the inequalities are strict
    q, E = np.meshgrid(np.linspace(0.5, 6, 12), np.linspace(-2, 2, 13))
    rates = {s: params_for(s, 0.5).n * dsf.dsf_free_exact(q, E, params_for(s, 0.5))
             for s in ("bose", "mb", "fermi")}
    assert np.all(rates["bose"] > rates["mb"])
    assert np.all(rates["mb"] > rates["fermi"])


@pytest.mark.parametrize("model_name, statistics, z", [
    ("free_exact", "bose", 0.9), ("free_exact", "fermi", 2.0), ("mb", "mb", 0.3),
    ("brownian", "bose", 0.5), ("brownian", "fermi", 2.0), ("mb_brownian", "mb", 0.3),
])
def test_detailed_balance_models(model_name, statistics, z):
    params = params_for(statistics, z)
    model = dsf.make_model(model_name, params)
    q, E = np.meshgrid(np.linspace(2.0, 10.0, 40), np.linspace(-2.0, 2.0, 41))
    assert dsf.detailed_balance_residual(model, q, E) < 1e-10


def test_detailed_balance_skips_underflow():
    params = params_for("mb", 0.3)
    assert math.isnan(dsf.detailed_balance_residual(dsf.MaxwellBoltzmann(params), 0.01, 50.0))


def test_bose_brownian_domain():
    params = params_for("bose", 0.9)
    with pytest.raises(DomainError):
        dsf.dsf_brownian(0.1, 3.0, params)


def test_brownian_limit_linear_in_alpha():
    # fixed dimensionless incoming momentum p = u sqrt(M/beta); the exponent gap is beta m E^2/2q^2
    q_vec = np.array([0.8, 0.3, -0.5])
    u = np.array([0.9, 0.2, -0.6])
    devs = []
    for alpha in (1e-2, 5e-3, 2.5e-3):
        params = params_for("bose", 0.4, M=1.0 / alpha)
        p_vec = u * math.sqrt(params.M / params.beta)
        E = dsf.energy_transfer(q_vec, p_vec, params.M)
        q = np.linalg.norm(q_vec)
        exact = float(dsf.dsf_free_exact_qp(q_vec, p_vec, params))
        devs.append(abs(float(dsf.dsf_brownian(q, E, params)) / exact - 1))
    assert devs[0] / devs[1] == pytest.approx(2, rel=0.05)
    assert devs[1] / devs[2] == pytest.approx(2, rel=0.05)


def test_qp_form_matches_qE_form():
    params = params_for("fermi", 1.5, M=7.0)
    q_vec = np.array([[0.3, 0.1, 1.0], [2.0, -1.0, 0.5]])
    p_vec = np.array([[1.0, 2.0, -3.0], [0.0, 0.5, 0.2]])
    E = dsf.energy_transfer(q_vec, p_vec, params.M)
    q = np.linalg.norm(q_vec, axis=-1)
    np.testing.assert_allclose(dsf.dsf_free_exact_qp(q_vec, p_vec, params),
                               dsf.dsf_free_exact(q, E, params), rtol=1e-12)


def test_sigma_variable():
    q_vec = np.array([0.0, 0.0, 2.0])
    p_vec = np.array([1.0, 0.0, 3.0])
    # sigma = q/2 (1 + alpha) + alpha p.q/q
    assert dsf.sigma_var(q_vec, p_vec, 0.1) == pytest.approx(1.0 * 1.1 + 0.1 * 3.0)


def test_mb_brownian_equals_exact_mb_at_zero_alpha():
    params = params_for("mb", 0.2, M=1e12)
    q_vec = np.array([0.5, 1.0, -0.2])
    p_vec = np.array([3e5, -2e5, 1e5])
    E = dsf.energy_transfer(q_vec, p_vec, params.M)
    q = np.linalg.norm(q_vec)
    assert float(dsf.dsf_mb_brownian(q, E, params)) == pytest.approx(
        float(dsf.dsf_free_exact_qp(q_vec, p_vec, params)), rel=1e-9)


def test_series_zero_fugacity_limit_is_mb_brownian():
    params = params_for("bose", 1e-300)
    assert float(dsf.dsf_series(1.0, 0.3, params, 4)) == float(dsf.dsf_mb_brownian(1.0, 0.3,
                                                                                    params))


def test_series_matches_mb_brownian_for_mb():
    params = params_for("mb", 0.4)
    assert float(dsf.dsf_series(1.0, 0.3, params, 3)) == pytest.approx(
        float(dsf.dsf_mb_brownian(1.0, 0.3, params)), rel=1e-15)


def _series_ratios(params, q, E, orders=7):
    exact = float(dsf.dsf_brownian(q, E, params))
    errs = [abs(float(dsf.dsf_series(q, E, params, k)) - exact) for k in range(1, orders)]
    return np.array(errs[1:]) / np.array(errs[:-1])


@pytest.mark.parametrize("statistics", ["bose", "fermi"])
def test_series_ratio_is_fugacity_at_small_transfer(statistics):
    params = params_for(statistics, 0.3)
    np.testing.assert_allclose(_series_ratios(params, 0.3, 0.05), 0.3, rtol=0.05)


@pytest.mark.parametrize("statistics", ["bose", "fermi"])
@pytest.mark.parametrize("q, E", [(2.0, 0.2), (0.5, -0.4), (1.2, 0.8)])
def test_series_ratio_approaches_convergence_ratio(statistics, q, E):
    # the 1/(k+1) weights make the error ratio climb towards its limit from below
    params = params_for(statistics, 0.3)
    limit = float(dsf.series_convergence_ratio(q, E, params))
    ratios = _series_ratios(params, q, E, orders=12)
    assert np.all(ratios < limit)
    assert np.all(np.diff(ratios) > 0)
    assert ratios[-1] > 0.8 * limit


def test_series_exactly_geometric_at_zero_energy():
    params = params_for("bose", 0.3)
    limit = float(dsf.series_convergence_ratio(1.0, 0.0, params))
    np.testing.assert_allclose(_series_ratios(params, 1.0, 0.0), limit, rtol=1e-6)


def test_series_divergence_flagged():
    params = params_for("bose", 0.9)
    with pytest.warns(dsf.SeriesDivergenceWarning):
        _, flag = dsf.dsf_series(np.array([0.1, 5.0]), 2.0, params, 3, return_flag=True)
    assert flag.tolist() == [True, False]


def test_series_bad_order():
    with pytest.raises(DomainError):
        dsf.dsf_series(1.0, 0.0, params_for("bose", 0.3), 0)


def test_q_must_be_positive():
    with pytest.raises(DomainError):
        dsf.dsf_free_exact(0.0, 1.0, params_for("mb", 0.1))


def test_factorization_exact_for_mb_brownian():
    params = params_for("mb", 0.3)
    errs = dsf.factorization_error(dsf.MBBrownian(params), 1.5, np.linspace(-2, 2, 9), 0.7)
    assert np.max(errs) < 1e-14


def test_factorization_zero_at_equal_energy():
    params = params_for("bose", 0.5)
    assert float(dsf.factorization_error(dsf.FreeBrownian(params), 1.5, 0.3, 0.3)) == 0.0


def test_factorization_quadratic_for_bose_brownian():
    params = params_for("bose", 0.5)
    q, Ebar = 1.5, 0.2
    errs = []
    for delta in (0.4, 0.2, 0.1, 0.05):
        errs.append(float(dsf.factorization_error(dsf.FreeBrownian(params), q,
                                                  Ebar - delta / 2, Ebar + delta / 2)))
    np.testing.assert_allclose(np.array(errs[:-1]) / np.array(errs[1:]), 4.0, atol=0.3)


def test_tabulated_node_values_exact_and_second_order():
    params = params_for("fermi", 1.0)
    model = dsf.FreeExact(params)
    errs = []
    for n in (13, 25, 49):
        q_grid, E_grid = np.linspace(0.5, 3.0, n), np.linspace(-1, 1, n)
        table = dsf.Tabulated.from_model(model, q_grid, E_grid)
        assert float(table(q_grid[3], E_grid[5])) == float(model(q_grid[3], E_grid[5]))
        # bilinear error is largest at cell centres and scales as h^2 there
        mq, mE = np.meshgrid(0.5 * (q_grid[1:] + q_grid[:-1]), 0.5 * (E_grid[1:] + E_grid[:-1]),
                             indexing="ij")
        errs.append(np.max(np.abs(table(mq, mE) - model(mq, mE))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.25)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.25)


def test_tabulated_round_trip(tmp_path):
    params = params_for("bose", 0.6)
    table = dsf.Tabulated.from_model(dsf.FreeExact(params), [0.5, 1.0, 2.0], [-1.0, 0.0, 1.5])
    path = tmp_path / "s.tab"
    dsf.save_tabulated(path, table)
    loaded = dsf.load_tabulated(path)
    np.testing.assert_array_equal(loaded.values, table.values)
    assert loaded.beta == table.beta
    assert dsf.make_model("tabulated", table=path).evaluate(1.0, 0.0) == table.evaluate(1.0, 0.0)


def test_tabulated_rejects_bad_input(tmp_path):
    with pytest.raises(DomainError):
        dsf.Tabulated([1.0, 0.5], [0, 1], np.ones((2, 2)), 1.0)
    with pytest.raises(DomainError):
        dsf.Tabulated([0.5, 1.0], [0, 1], -np.ones((2, 2)), 1.0)
    table = dsf.Tabulated([0.5, 1.0], [0, 1], np.ones((2, 2)), 1.0)
    with pytest.raises(DomainError):
        table(2.0, 0.5)
    path = tmp_path / "bad.tab"
    path.write_text("beta 1\nq 1 2\nvalues\n1 2\n")
    with pytest.raises(DomainError):
        dsf.load_tabulated(path)


def test_tuple_table_loader():
    table = dsf.dsf_tabulated_load(([0.5, 1.0], [0.0, 1.0], np.ones((2, 2)), 2.0))
    assert table.beta == 2.0


def test_make_model_names():
    params = params_for("bose", 0.4)
    assert isinstance(dsf.make_model("free_exact", params), dsf.FreeExact)
    assert dsf.make_model("series", params, order=2).order == 2
    with pytest.raises(DomainError):
        dsf.make_model("nonsense", params)


def test_models_agree_with_functions():
    params = params_for("fermi", 0.7)
    point = dsf.KinematicPoint([0.3, 0.2, 1.0], [1.0, -2.0, 0.5], params.M)
    assert dsf.FreeExact(params).evaluate_point(point) == pytest.approx(
        dsf.dsf_free_exact(point.q, point.E, params))
    assert dsf.FreeBrownian(params)(1.0, 0.2) == dsf.dsf_brownian(1.0, 0.2, params)


def test_cross_section_flux_factor():
    params = params_for("mb", 0.1, M=3.0)
    t = ConstantTMatrix(0.5)
    q_vec = np.array([0.0, 0.0, 1.0])
    p_vec = np.array([0.0, 0.0, 2.0])
    E = dsf.energy_transfer(q_vec, p_vec, params.M)
    expected = (params.M / (2 * math.pi)) ** 2 * 3.0 / 2.0 * 0.25 * dsf.dsf_mb(1.0, E, params)
    assert dsf.cross_section(q_vec, p_vec, t, dsf.MaxwellBoltzmann(params), params) == \
        pytest.approx(expected)


def test_tmatrix_models():
    g = GaussianCutoffTMatrix(2.0, 1.5)
    assert g.squared(0.0) == pytest.approx(4.0)
    assert g.squared(1.5) == pytest.approx(4.0 / math.e)
    assert make_tmatrix("constant", 0.0).squared(3.0) == 0.0
    with pytest.raises(DomainError):
        make_tmatrix("gaussian", 1.0)
    with pytest.raises(DomainError):
        ConstantTMatrix(-1.0)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(0.05, 20.0), E=st.floats(-20.0, 20.0),
       case=st.sampled_from(CASES))
def test_structure_factor_non_negative(q, E, case):
    params = params_for(*case)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = [dsf.dsf_free_exact(q, E, params), dsf.dsf_mb(q, E, params)]
        if params.statistics.sign <= 0 or dsf.series_convergence_ratio(q, E, params) < 1:
            values.append(dsf.dsf_brownian(q, E, params))
    assert all(np.isfinite(v) and v >= 0 for v in values)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(0.1, 10.0), E=st.floats(-8.0, 8.0), z=st.floats(0.01, 0.99))
def test_detailed_balance_property(q, E, z):
    params = params_for("bose", z)
    res = dsf.detailed_balance_residual(dsf.FreeExact(params), q, E)
    assert math.isnan(res) or res < 1e-10
