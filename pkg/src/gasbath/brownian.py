"""Quantum Brownian motion limit of the collision dynamics.

Small momentum transfers reduce the generator to a bilinear form in ``x`` and
``p`` with momentum diffusion ``D_pp``, position diffusion ``D_xx`` and friction
``gamma``. The gas statistics enter only through the overall factor ``z``
(classical) or ``z / (1 -+ z)`` (Bose / Fermi).

The moment equations used by :func:`qbm_moment_evolution` are derived in
``docs/moment_equations.md``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, linalg

from .errors import CondensationError, ConvergenceError, DomainError
from .statmech import GasParameters, Statistics
from .tmatrix import ConstantTMatrix, GaussianCutoffTMatrix, TMatrixModel

__all__ = [
    "BrownianCoefficients",
    "GaussianMomentState",
    "statistics_factor",
    "compute_dpp",
    "dpp_closed_form",
    "coefficients_from_dpp",
    "brownian_coefficients",
    "moment_generator",
    "qbm_moment_evolution",
    "qbm_consistency_vs_kinetics",
]


def statistics_factor(z: float, statistics) -> float:
    """``z`` for a classical gas, ``z/(1-z)`` for bosons, ``z/(1+z)`` for fermions."""
    statistics = Statistics.parse(statistics)
    if not z > 0:
        raise DomainError(f"fugacity must be positive, got {z!r}")
    if statistics is Statistics.BOSE_EINSTEIN and z >= 1.0:
        raise CondensationError(f"Bose fugacity must be < 1, got {z!r}")
    return z / (1.0 - statistics.sign * z)


def _dpp_prefactor(params: GasParameters) -> float:
    # (2/3) pi^2 m^2 / (beta hbar), times 4 pi from the angular integral
    return 2.0 / 3.0 * math.pi**2 * params.m**2 / (params.beta * params.hbar) * 4.0 * math.pi


def compute_dpp(tmatrix: TMatrixModel, params: GasParameters) -> float:
    """Momentum diffusion coefficient by radial quadrature.

    ``D_pp = (2/3)(pi^2 m^2 / beta hbar) int d^3q |t(q)|^2 q exp(-beta q^2 / 8m)``
    """
    a = params.beta / (8.0 * params.m)
    # substitute q = s / sqrt(a) so the Gaussian envelope has unit width
    scale = 1.0 / math.sqrt(a)

    def integrand(s):
        q = s * scale
        return q**3 * float(tmatrix.squared(q)) * math.exp(-s * s)

    value, err = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    if not np.isfinite(value) or err > 1e-11 * abs(value) + 1e-300:
        raise ConvergenceError("D_pp quadrature did not converge", {"value": value, "error": err})
    return _dpp_prefactor(params) * value * scale


def dpp_closed_form(tmatrix: TMatrixModel, params: GasParameters) -> float:
    """Gaussian-moment evaluation of ``D_pp``: ``int_0^inf q^3 e^{-a q^2} dq = 1/(2 a^2)``."""
    a = params.beta / (8.0 * params.m)
    if isinstance(tmatrix, ConstantTMatrix):
        return _dpp_prefactor(params) * tmatrix.t0**2 / (2.0 * a**2)
    if isinstance(tmatrix, GaussianCutoffTMatrix):
        a_eff = a + 1.0 / tmatrix.qc**2
        return _dpp_prefactor(params) * tmatrix.t0**2 / (2.0 * a_eff**2)
    raise DomainError(f"no closed form for {type(tmatrix).__name__}")


@dataclass(frozen=True)
class BrownianCoefficients:
    """Coefficients of the bilinear generator.

    ``gamma`` is the bare friction ``(beta/2M) D_pp``; the statistics factor
    multiplies the whole dissipator, so the friction actually felt by the
    particle is ``gamma_eff = stat_factor * gamma``.
    """

    D_pp: float
    D_xx: float
    gamma: float
    stat_factor: float
    gamma_eff: float
    z: float
    statistics: str
    M: float
    beta: float
    hbar: float
    provenance: dict = field(default_factory=dict)

    @property
    def friction_ratio_vs_mb(self) -> float:
        """``gamma_eff`` relative to a classical gas at the same fugacity."""
        return self.stat_factor / self.z

    def single_generator_defect(self) -> float:
        """Relative violation of ``D_pp D_xx = hbar^2 gamma^2 / 4``."""
        rhs = self.hbar**2 * self.gamma**2 / 4.0
        lhs = self.D_pp * self.D_xx
        return abs(lhs - rhs) / rhs if rhs else abs(lhs)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["friction_ratio_vs_mb"] = self.friction_ratio_vs_mb
        return data


def coefficients_from_dpp(D_pp: float, params: GasParameters, statistics=None,
                          provenance: dict | None = None) -> BrownianCoefficients:
    if not D_pp >= 0:
        raise DomainError(f"D_pp must be non-negative, got {D_pp!r}")
    statistics = Statistics.parse(statistics if statistics is not None else params.statistics)
    stat = statistics_factor(params.z, statistics)
    beta, M, hbar = params.beta, params.M, params.hbar
    gamma = beta / (2.0 * M) * D_pp
    return BrownianCoefficients(
        D_pp=D_pp,
        D_xx=(beta * hbar / (4.0 * M)) ** 2 * D_pp,
        gamma=gamma,
        stat_factor=stat,
        gamma_eff=stat * gamma,
        z=params.z,
        statistics=statistics.value,
        M=M,
        beta=beta,
        hbar=hbar,
        provenance=dict(provenance or {}),
    )


def brownian_coefficients(tmatrix: TMatrixModel, params: GasParameters) -> BrownianCoefficients:
    """Quadrature ``D_pp`` followed by :func:`coefficients_from_dpp`."""
    provenance = {"tmatrix": tmatrix.describe(),
                  "quadrature": {"method": "scipy.integrate.quad", "epsrel": 1e-13}}
    return coefficients_from_dpp(compute_dpp(tmatrix, params), params, provenance=provenance)


# ---------------------------------------------------------------------------
# Gaussian moments


@dataclass(frozen=True)
class GaussianMomentState:
    """First and second moments per Cartesian axis (arrays of length 3).

    Second moments are raw (not centred): ``xx = <x^2>``,
    ``xp = <(xp + px)/2>``, ``pp = <p^2>``.
    """

    x: np.ndarray
    p: np.ndarray
    xx: np.ndarray
    xp: np.ndarray
    pp: np.ndarray

    def __post_init__(self):
        for name in ("x", "p", "xx", "xp", "pp"):
            value = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            object.__setattr__(self, name, value)

    @classmethod
    def thermal(cls, M, beta, hbar=1.0, width_x=1.0, x0=0.0, p0=0.0) -> GaussianMomentState:
        """Uncorrelated Gaussian with thermal momentum spread and position spread ``width_x``."""
        return cls(x0, p0, np.asarray(x0, float) ** 2 + width_x**2, np.asarray(x0, float) * p0,
                   np.asarray(p0, float) ** 2 + M / beta)

    def covariance(self) -> np.ndarray:
        """Per-axis 2x2 covariance blocks, shape (3, 2, 2)."""
        vxx = self.xx - self.x**2
        vxp = self.xp - self.x * self.p
        vpp = self.pp - self.p**2
        return np.stack([np.stack([vxx, vxp], -1), np.stack([vxp, vpp], -1)], -2)

    def check(self, hbar=1.0, tol=1e-9) -> None:
        cov = self.covariance()
        for axis, block in enumerate(cov):
            if np.linalg.eigvalsh(block).min() < -tol * max(1.0, np.abs(block).max()):
                raise DomainError(f"covariance of axis {axis} is not positive semidefinite")
            if np.linalg.det(block) < hbar**2 / 4.0 * (1.0 - 1e-9):
                raise DomainError(f"axis {axis} violates the uncertainty relation")

    def as_vector(self, axis: int) -> np.ndarray:
        return np.array([self.x[axis], self.p[axis], self.xx[axis], self.xp[axis],
                         self.pp[axis], 1.0])

    @classmethod
    def from_vectors(cls, vectors) -> GaussianMomentState:
        v = np.asarray(vectors)
        return cls(v[:, 0], v[:, 1], v[:, 2], v[:, 3], v[:, 4])


def moment_generator(coeffs: BrownianCoefficients) -> np.ndarray:
    """Affine generator of ``(x, p, xx, xp, pp, 1)`` for one axis.

    d<x>/dt  = <p>/M
    d<p>/dt  = -2 g <p>
    d<xx>/dt = 2 <xp>/M + 2 c D_xx
    d<xp>/dt = <pp>/M - 2 g <xp>
    d<pp>/dt = -4 g <pp> + 2 c D_pp

    with ``c = stat_factor`` and ``g = gamma_eff``.
    """
    c, g, M = coeffs.stat_factor, coeffs.gamma_eff, coeffs.M
    A = np.zeros((6, 6))
    A[0, 1] = 1.0 / M
    A[1, 1] = -2.0 * g
    A[2, 3] = 2.0 / M
    A[2, 5] = 2.0 * c * coeffs.D_xx
    A[3, 4] = 1.0 / M
    A[3, 3] = -2.0 * g
    A[4, 4] = -4.0 * g
    A[4, 5] = 2.0 * c * coeffs.D_pp
    return A


def qbm_moment_evolution(initial: GaussianMomentState, coeffs: BrownianCoefficients,
                         t) -> GaussianMomentState | list:
    """Exact moments at time ``t`` (scalar) or at each of several times (sequence)."""
    initial.check(coeffs.hbar)
    A = moment_generator(coeffs)
    v0 = np.stack([initial.as_vector(axis) for axis in range(3)], axis=1)  # (6, 3)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise DomainError("evolution time must be non-negative")
    states = [GaussianMomentState.from_vectors((linalg.expm(A * s) @ v0).T) for s in times]
    return states[0] if np.ndim(t) == 0 else states


# ---------------------------------------------------------------------------
# cross-check against the kinetic simulation


def qbm_consistency_vs_kinetics(times, mean_p2, coeffs: BrownianCoefficients,
                                params: GasParameters, equilibrium_p2: float | None = None,
                                tolerance: float = 0.10, window=(0.9, 0.05)) -> dict:
    """Compare the relaxation rate of ``<p^2>`` in a kinetic run with ``4 gamma_eff``.

    ``mean_p2`` is the full three-dimensional ``<p^2>``. The excess over
    equilibrium is fitted with a single exponential over the part of the run
    where it lies between ``window[1]`` and ``window[0]`` of its initial value.
    """
    times = np.asarray(times, dtype=float)
    mean_p2 = np.asarray(mean_p2, dtype=float)
    eq = 3.0 * params.M / params.beta if equilibrium_p2 is None else equilibrium_p2
    predicted = 4.0 * coeffs.gamma_eff
    regime = "brownian" if params.alpha <= 0.01 else "outside brownian limit (alpha > 0.01)"
    report = {
        "alpha": params.alpha,
        "regime": regime,
        "rate_qbm": predicted,
        "rate_kinetics": None,
        "relative_difference": None,
        "fit_residual": None,
        "tolerance": tolerance,
    }
    excess = mean_p2 - eq
    if coeffs.gamma_eff == 0 or np.allclose(excess, 0.0, atol=1e-14 * eq):
        report.update(rate_kinetics=0.0, status="inconclusive" if predicted else "agree")
        return report
    hi, lo = window
    sel = (excess < hi * excess[0]) & (excess > lo * excess[0])
    if excess[0] <= 0 or sel.sum() < 5:
        report["status"] = "inconclusive"
        return report
    coef, residuals, *_ = np.polyfit(times[sel], np.log(excess[sel]), 1, full=True)
    rate = -coef[0]
    rel = abs(rate - predicted) / predicted
    report.update(
        rate_kinetics=float(rate),
        relative_difference=float(rel),
        fit_residual=float(np.sqrt(residuals[0] / sel.sum())) if len(residuals) else 0.0,
        status="agree" if rel <= tolerance else "disagree",
    )
    return report
