"""Self-configuring invariant suite behind ``gasbath validate``.

Each check returns a :class:`CheckResult` naming the physical statement it
tests, the measured value, the tolerance and a verdict. Checks are grouped by
scope (``statmech``, ``dsf``, ``kinetics``, ``brownian``).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import brownian, dsf, kinetics, statmech
from .errors import GasbathError
from .statmech import GasParameters
from .tmatrix import ConstantTMatrix

__all__ = ["CheckResult", "SCOPES", "occupation_integral_dsf", "run_checks"]


@dataclass
class CheckResult:
    name: str
    scope: str
    anchor: str
    measured: float
    tolerance: float
    verdict: str
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def occupation_integral_dsf(q, E, params: GasParameters, nodes: int = 160) -> float:
    """Structure factor by direct integration of gas occupation numbers.

    The energy delta fixes the gas momentum component along ``q`` to
    ``sigma = (2mE + q^2)/(2q)``; the remaining transverse plane is integrated
    on a Cartesian Gauss-Legendre tensor grid:

        S = (m / (n q (2 pi hbar)^3)) int d^2k  n(sqrt(sigma^2 + k^2))
            * [1 + eps n(sqrt((sigma - q)^2 + k^2))]
    """
    sign = params.statistics.sign
    sigma = (2.0 * params.m * E + q * q) / (2.0 * q)
    # the integrand decays at least like exp(-beta k^2 / 2m) times the occupation prefactor
    half_width = math.sqrt(2.0 * params.m / params.beta * (40.0 + max(math.log(params.z), 0.0)))
    x, w = leggauss(nodes)
    k = half_width * x
    kx, ky = np.meshgrid(k, k, indexing="ij")
    k2 = kx**2 + ky**2
    n_in = statmech.occupation(np.sqrt(sigma**2 + k2), params)
    n_out = statmech.occupation(np.sqrt((sigma - q) ** 2 + k2), params)
    integrand = n_in * (1.0 + sign * n_out)
    integral = half_width**2 * float(w @ integrand @ w)
    return params.m * integral / (params.n * q * (2.0 * math.pi * params.hbar) ** 3)


def _verdict(ok):
    return "pass" if ok else "fail"


def _result(name, scope, anchor, measured, tolerance, ok, detail=""):
    return CheckResult(name, scope, anchor, float(measured), float(tolerance), _verdict(ok),
                       detail=detail)


# ---------------------------------------------------------------------------
# statmech


def _check_density_roundtrip():
    worst = 0.0
    for statistics, z in (("bose", 0.9), ("fermi", 2.0), ("mb", 0.3)):
        params = GasParameters(1.0, 10.0, 1.0, statistics, z=z)
        scale = math.sqrt(2.0 * params.m / params.beta)
        t, w = leggauss(200)
        # p = scale * s on s in [0, 12]
        s = 6.0 * (t + 1.0)
        p = scale * s
        integral = 6.0 * scale * np.sum(w * 4.0 * math.pi * p**2 * statmech.occupation(p, params))
        density = integral / (2.0 * math.pi * params.hbar) ** 3
        worst = max(worst, abs(density / params.n - 1.0))
    return _result("density_roundtrip", "statmech",
                   "occupation numbers integrate to the density fixed by the fugacity",
                   worst, 1e-10, worst < 1e-10)


def _check_occupation_ordering():
    p = np.linspace(0.0, 6.0, 61)
    occ = {s: statmech.occupation(p, GasParameters(1.0, 10.0, 1.0, s, z=0.5))
           for s in ("bose", "mb", "fermi")}
    margin = min(np.min(occ["bose"] - occ["mb"]), np.min(occ["mb"] - occ["fermi"]))
    return _result("occupation_ordering", "statmech",
                   "Bose occupation above classical above Fermi at equal fugacity",
                   margin, 0.0, margin > 0)


def _check_low_density_limit():
    worst = 0.0
    for statistics in ("bose", "fermi"):
        for z in (1e-3, 1e-4):
            rel = abs(statmech.density_integral(z, statistics) / z - 1.0)
            # leading correction +- z / 2^{3/2}
            worst = max(worst, abs(rel - z / 2**1.5) / (z / 2**1.5))
    return _result("low_density_limit", "statmech",
                   "quantum gases reduce to the classical density at small fugacity",
                   worst, 1e-2, worst < 1e-2)


# ---------------------------------------------------------------------------
# dsf


def _dsf_grid(params, n=100, q_range=(0.05, 4.0), beta_e=6.0):
    vq = math.sqrt(8.0 * params.m / params.beta)
    q = np.linspace(*q_range, n) * vq
    E = np.linspace(-beta_e, beta_e, n) / params.beta
    return np.meshgrid(q, E, indexing="ij")


# the Bose Brownian form is defined for z exp(-beta q^2/8m + beta|E|/2) < 1
_BROWNIAN_GRID = {"q_range": (1.0, 4.0), "beta_e": 2.0}


def _check_detailed_balance_closed_forms():
    worst = 0.0
    cases = [("free_exact", "bose", 0.9), ("free_exact", "fermi", 2.0), ("mb", "mb", 0.3),
             ("brownian", "bose", 0.5), ("brownian", "fermi", 0.5), ("mb_brownian", "mb", 0.3)]
    for name, statistics, z in cases:
        params = GasParameters(1.0, 50.0, 1.0, statistics, z=z)
        q, E = _dsf_grid(params, **(_BROWNIAN_GRID if "brownian" in name else {}))
        worst = max(worst, dsf.detailed_balance_residual(dsf.make_model(name, params), q, E))
    return _result("detailed_balance_closed_forms", "dsf",
                   "structure factors satisfy detailed balance S(q,-E) = e^{beta E} S(q,E)",
                   worst, 1e-10, worst < 1e-10)


def _occupation_cases():
    rng = np.random.default_rng(20240611)
    for statistics in ("bose", "fermi"):
        params = GasParameters(1.0, 20.0, 1.0, statistics, z=0.5)
        vq = math.sqrt(8.0 * params.m / params.beta)
        for _ in range(4):
            yield params, rng.uniform(0.3, 2.5) * vq, rng.uniform(-2.5, 2.5) / params.beta


def _check_detailed_balance_occupations():
    worst = 0.0
    for params, q, E in _occupation_cases():
        forward = occupation_integral_dsf(q, E, params)
        reverse = occupation_integral_dsf(q, -E, params)
        worst = max(worst, abs(reverse * math.exp(-params.beta * E) / forward - 1.0))
    return _result("detailed_balance_occupations", "dsf",
                   "detailed balance of the occupation-number integral (Bose and Fermi)",
                   worst, 1e-8, worst < 1e-8)


def _check_occupation_integral_vs_closed_form():
    worst = 0.0
    for params, q, E in _occupation_cases():
        oracle = occupation_integral_dsf(q, E, params)
        worst = max(worst, abs(dsf.dsf_free_exact(q, E, params) / oracle - 1.0))
    return _result("occupation_integral_vs_closed_form", "dsf",
                   "closed-form free-gas structure factor equals the occupation integral",
                   worst, 1e-6, worst < 1e-6)


def _check_rate_ordering():
    # collision rates scale with n S; Bose enhancement and Pauli blocking order them
    margin = math.inf
    base = dict(m=1.0, M=20.0, beta=1.0, z=0.5)
    for q, E in ((0.7, 0.4), (1.5, -0.8), (2.2, 1.3)):
        rates = {}
        for statistics in ("bose", "mb", "fermi"):
            params = GasParameters(statistics=statistics, **base)
            rates[statistics] = params.n * occupation_integral_dsf(q, E, params)
        margin = min(margin, rates["bose"] / rates["mb"] - 1.0, 1.0 - rates["fermi"] / rates["mb"])
    return _result("rate_ordering", "dsf",
                   "n S ordered Bose > classical > Fermi at equal fugacity",
                   margin, 0.0, margin > 0)


def _check_classical_recovery():
    errors = []
    for z in (1e-2, 1e-3, 1e-4):
        worst = 0.0
        for statistics in ("bose", "fermi"):
            params = GasParameters(1.0, 50.0, 1.0, statistics, z=z)
            mb = params.replace(statistics="mb")
            q, E = _dsf_grid(params, 40, beta_e=3.0)
            ratio = (params.n * dsf.dsf_free_exact(q, E, params)) / (mb.n * dsf.dsf_mb(q, E, mb))
            worst = max(worst, float(np.max(np.abs(ratio - 1.0))))
        errors.append(worst)
    slopes = [errors[i] / errors[i + 1] for i in range(2)]
    measured = max(abs(s / 10.0 - 1.0) for s in slopes)
    return _result("classical_recovery", "dsf",
                   "quantum structure factors approach the classical one linearly in z",
                   measured, 0.2, measured < 0.2, detail=f"errors={errors}")


def _check_mb_brownian_factorization():
    params = GasParameters(1.0, 50.0, 1.0, "mb", z=0.1)
    q, E = _dsf_grid(params, 30)
    err = float(np.max(dsf.factorization_error(dsf.MBBrownian(params), q, E, E + 0.7)))
    return _result("mb_brownian_factorization", "dsf",
                   "classical Brownian structure factor factorizes exactly in energy",
                   err, 1e-14, err < 1e-14)


def _check_series_geometric():
    params = GasParameters(1.0, 50.0, 1.0, "bose", z=0.3)
    q = np.linspace(1.0, 3.0, 5)
    E = np.linspace(-0.5, 0.5, 5)
    qq, EE = np.meshgrid(q, E, indexing="ij")
    ref = dsf.dsf_brownian(qq, EE, params)
    errs = [float(np.max(np.abs(dsf.dsf_series(qq, EE, params, k) / ref - 1.0)))
            for k in range(1, 6)]
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    measured = float(np.max(np.abs(ratios / params.z - 1.0)))
    return _result("series_geometric", "dsf",
                   "fugacity series converges geometrically with ratio z",
                   measured, 0.2, measured < 0.2, detail=f"ratios={ratios.tolist()}")


# ---------------------------------------------------------------------------
# kinetics


def _pauli_setup():
    params = GasParameters(1.0, 10.0, 1.0, "mb", z=0.01)
    grid = kinetics.RadialMomentumGrid.for_params(params, 60)
    kernel = kinetics.build_pauli_kernel(grid, ConstantTMatrix(1.0), dsf.FreeExact(params), params)
    return params, grid, kernel


def _check_pauli_detailed_balance():
    _, _, kernel = _pauli_setup()
    res = kernel.detailed_balance_residual()
    return _result("pauli_detailed_balance", "kinetics",
                   "discrete collision rates balance against the canonical weights",
                   res, 1e-12, res < 1e-12)


def _check_canonical_stationarity():
    params, grid, kernel = _pauli_setup()
    coeffs = brownian.brownian_coefficients(ConstantTMatrix(1.0), params)
    P0 = kinetics.canonical_state(grid, params)
    t_end = 10.0 / coeffs.gamma_eff
    dt = kinetics.suggest_dt(float(kernel.loss.max()))
    steps = int(math.ceil(t_end / dt))
    traj = kinetics.evolve_pauli(P0, kernel, t_end / steps, steps, record_every=steps)
    drift = float(np.abs(traj.states[-1] - P0).sum())
    return _result("canonical_stationarity", "kinetics",
                   "canonical distribution is stationary under the collision dynamics",
                   drift, 1e-6, drift < 1e-6)


def _check_lindblad_positivity():
    params = GasParameters(1.0, 10.0, 1.0, "bose", z=0.5)
    width = math.sqrt(params.M / params.beta)
    grid = kinetics.UniformGrid1D.from_extent(8.0 * width, 31)
    gen = kinetics.build_1d_lindblad(grid, ConstantTMatrix(1.0), dsf.FreeExact(params), params)
    psi = np.exp(-(grid.nodes - 2.0 * width) ** 2 / (2.0 * width**2))
    psi /= np.linalg.norm(psi)
    hot = kinetics.canonical_density_matrix(grid, params, beta=0.5)
    rho0 = 0.5 * hot + 0.5 * np.outer(psi, psi)
    dt = 1.0 / gen.spectral_bound()
    try:
        traj = kinetics.evolve_density_matrix(rho0, gen, dt, 1000, monitor_every=50, M=params.M)
    except GasbathError as exc:
        return _result("lindblad_positivity", "kinetics",
                       "Lindblad evolution keeps the density matrix positive",
                       -math.inf, -1e-8, False, detail=str(exc))
    worst = min(o["min_eigenvalue"] for o in traj.observables)
    return _result("lindblad_positivity", "kinetics",
                   "Lindblad evolution keeps the density matrix positive",
                   worst, -1e-8, worst >= -1e-8)


# ---------------------------------------------------------------------------
# brownian


def _check_dpp_closed_form():
    params = GasParameters(1.0, 100.0, 1.0, "mb", z=0.1)
    t = ConstantTMatrix(1.3)
    rel = abs(brownian.compute_dpp(t, params) / brownian.dpp_closed_form(t, params) - 1.0)
    return _result("dpp_closed_form", "brownian",
                   "momentum diffusion quadrature matches the Gaussian-moment closed form",
                   rel, 1e-10, rel < 1e-10)


def _check_friction_ratio():
    worst = 0.0
    for statistics, zs, sign in (("bose", (0.1, 0.5, 0.9), 1), ("fermi", (0.1, 0.5, 2.0), -1)):
        for z in zs:
            params = GasParameters(1.0, 100.0, 1.0, statistics, z=z)
            c = brownian.coefficients_from_dpp(1.0, params)
            mb = brownian.coefficients_from_dpp(1.0, params.replace(statistics="mb"))
            worst = max(worst, abs(c.gamma_eff / mb.gamma_eff * (1.0 - sign * z) - 1.0))
    return _result("friction_ratio", "brownian",
                   "friction enhanced by 1/(1-z) for bosons, suppressed by 1/(1+z) for fermions",
                   worst, 1e-12, worst < 1e-12)


def _check_single_generator():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        params = GasParameters(rng.uniform(0.5, 2.0), rng.uniform(20.0, 500.0),
                               rng.uniform(0.2, 5.0), "mb", z=rng.uniform(0.01, 0.5),
                               hbar=rng.uniform(0.5, 2.0))
        c = brownian.brownian_coefficients(ConstantTMatrix(rng.uniform(0.1, 3.0)), params)
        worst = max(worst, c.single_generator_defect())
    return _result("single_generator_identity", "brownian",
                   "D_pp D_xx = hbar^2 gamma^2 / 4", worst, 1e-12, worst < 1e-12)


def _check_equipartition():
    worst = 0.0
    for statistics in ("mb", "bose", "fermi"):
        params = GasParameters(1.0, 100.0, 2.0, statistics, z=0.5)
        c = brownian.brownian_coefficients(ConstantTMatrix(1.0), params)
        start = brownian.GaussianMomentState.thermal(params.M, params.beta / 3.0, width_x=2.0)
        end = brownian.qbm_moment_evolution(start, c, 10.0 / c.gamma_eff)
        worst = max(worst, float(np.max(np.abs(end.pp / (params.M / params.beta) - 1.0))))
    return _result("equipartition", "brownian",
                   "momentum variance relaxes to M/beta for every statistics",
                   worst, 1e-6, worst < 1e-6)


SCOPES = {
    "statmech": [_check_density_roundtrip, _check_occupation_ordering, _check_low_density_limit],
    "dsf": [_check_detailed_balance_closed_forms, _check_detailed_balance_occupations,
            _check_occupation_integral_vs_closed_form, _check_rate_ordering,
            _check_classical_recovery, _check_mb_brownian_factorization, _check_series_geometric],
    "kinetics": [_check_pauli_detailed_balance, _check_canonical_stationarity,
                 _check_lindblad_positivity],
    "brownian": [_check_dpp_closed_form, _check_friction_ratio, _check_single_generator,
                 _check_equipartition],
}


def run_checks(scopes=None) -> list[CheckResult]:
    """Run the checks of the given scopes (all by default), in a fixed order."""
    selected = list(SCOPES) if not scopes else list(scopes)
    unknown = [s for s in selected if s not in SCOPES]
    if unknown:
        raise ValueError(f"unknown scope(s) {unknown}; known: {list(SCOPES)}")
    results = []
    for scope in selected:
        for check in SCOPES[scope]:
            name = check.__name__.removeprefix("_check_")
            start = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    result = check()
            except (GasbathError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
                result = CheckResult(name, scope, "", math.nan, math.nan, "fail",
                                     detail=f"{type(exc).__name__}: {exc}")
            result.seconds = time.perf_counter() - start
            results.append(result)
    return results
