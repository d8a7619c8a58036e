"""Equilibrium thermodynamics of the ideal gas acting as the bath.

Reduced units are the default (hbar = m = k_B = 1) but every quantity is
passed explicitly, so physical units work as long as they are consistent.
The momentum-space measure is ``d^3p / (2 pi hbar)^3`` with no spin
degeneracy factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import CondensationError, ConvergenceError, DomainError

__all__ = [
    "Statistics",
    "GasParameters",
    "ZETA_3_2",
    "thermal_wavelength",
    "occupation",
    "degeneracy_parameter",
    "density_integral",
    "solve_fugacity",
]

ZETA_3_2 = float(special.zeta(1.5))

# Series branch of the polylogarithm is used up to this |z|.
_SERIES_Z_MAX = 0.5


class Statistics(enum.Enum):
    MAXWELL_BOLTZMANN = "mb"
    BOSE_EINSTEIN = "bose"
    FERMI_DIRAC = "fermi"

    @property
    def sign(self) -> int:
        """+1 for Bose enhancement, -1 for Fermi blocking, 0 for classical."""
        return {"mb": 0, "bose": 1, "fermi": -1}[self.value]

    @classmethod
    def parse(cls, name: str | Statistics) -> Statistics:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {
            "mb": "mb", "maxwell-boltzmann": "mb", "maxwellboltzmann": "mb",
            "boltzmann": "mb", "classical": "mb",
            "bose": "bose", "bose-einstein": "bose", "boseeinstein": "bose", "be": "bose",
            "fermi": "fermi", "fermi-dirac": "fermi", "fermidirac": "fermi", "fd": "fermi",
        }
        if key not in aliases:
            raise DomainError(f"unknown statistics {name!r}")
        return cls(aliases[key])


def _require_positive(**values):
    for name, value in values.items():
        if not (np.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")


def thermal_wavelength(m, beta, hbar=1.0):
    """Thermal de Broglie wavelength ``sqrt(2 pi beta hbar^2 / m)``."""
    _require_positive(m=m, beta=beta, hbar=hbar)
    return math.sqrt(2.0 * math.pi * beta * hbar**2 / m)


def _polylog_series(z, sign):
    # sum_k (+-1)^(k+1) z^k / k^1.5; sign=+1 Bose, -1 Fermi
    terms = []
    partial = 0.0
    k = 1
    while True:
        term = (sign ** (k + 1)) * z**k / k**1.5
        terms.append(term)
        partial += term
        if abs(term) < 1e-16 * abs(partial) or k > 2000:
            break
        k += 1
    return math.fsum(terms)


def _polylog_quad(z, sign):
    # (4/sqrt(pi)) int_0^inf t^2 x/(1 - sign x) dt with x = z exp(-t^2)
    log_z = math.log(z)
    if sign > 0:
        return _bose_quad(-log_z)

    def integrand(t):
        x = math.exp(log_z - t * t)
        return t * t * x / (1.0 + x)

    t_fermi = math.sqrt(log_z) if log_z > 0 else 0.0
    t_max = math.sqrt(max(log_z, 0.0) + 60.0)
    points = [t_fermi] if 0 < t_fermi < t_max else None
    value, err = integrate.quad(
        integrand, 0.0, t_max, epsabs=0.0, epsrel=1e-13, limit=400, points=points
    )
    _check_quad(value, err, z)
    return 4.0 / math.sqrt(math.pi) * value


def _bose_quad(eps):
    # With u = t^2 + eps the Bose integrand is 1/(e^u - 1), which peaks like 1/u
    # at t -> 0 when z -> 1. Subtract e^{-u}/u analytically:
    # int_0^inf t^2 e^{-u}/u dt = e^{-eps} (sqrt(pi)/2 - (pi sqrt(eps)/2) erfcx(sqrt(eps)))
    def integrand(t):
        u = t * t + eps
        return t * t * (1.0 / math.expm1(u) - math.exp(-u) / u)

    value, err = integrate.quad(integrand, 0.0, math.sqrt(eps + 60.0) + 1.0,
                                epsabs=1e-15, epsrel=1e-13, limit=400)
    _check_quad(value, err, math.exp(-eps))
    root = math.sqrt(eps)
    singular = math.exp(-eps) * (
        0.5 * math.sqrt(math.pi) - 0.5 * math.pi * root * float(special.erfcx(root))
    )
    return 4.0 / math.sqrt(math.pi) * (value + singular)


def _check_quad(value, err, z):
    if not np.isfinite(value) or err > 1e-11 * max(abs(value), 1e-3):
        raise ConvergenceError(
            "density integral did not converge", {"z": z, "value": value, "error": err}
        )


def density_integral(z, statistics):
    """Dimensionless density ``n lambda^3`` as a function of the fugacity.

    This is ``z`` for classical particles, ``g_{3/2}(z)`` for bosons and
    ``f_{3/2}(z)`` for fermions.
    """
    statistics = Statistics.parse(statistics)
    if not z > 0:
        raise DomainError(f"fugacity must be positive, got {z!r}")
    if statistics is Statistics.MAXWELL_BOLTZMANN:
        return float(z)
    if statistics is Statistics.BOSE_EINSTEIN and z >= 1.0:
        raise CondensationError(f"Bose fugacity must be < 1, got {z!r}")
    if z <= _SERIES_Z_MAX:
        return _polylog_series(z, statistics.sign)
    return _polylog_quad(z, statistics.sign)


def solve_fugacity(n, m, beta, statistics, hbar=1.0):
    """Fugacity reproducing the number density ``n``.

    Raises
    ------
    CondensationError
        Bose gas with ``n lambda^3 >= zeta(3/2)``.
    ConvergenceError
        Root bracketing or refinement failed.
    """
    statistics = Statistics.parse(statistics)
    _require_positive(n=n)
    target = n * thermal_wavelength(m, beta, hbar) ** 3
    if statistics is Statistics.MAXWELL_BOLTZMANN:
        return target

    if statistics is Statistics.BOSE_EINSTEIN:
        if target >= ZETA_3_2:
            raise CondensationError(
                f"n lambda^3 = {target:.6g} >= zeta(3/2) = {ZETA_3_2:.6g}: condensed phase"
            )
        z_hi = float(np.nextafter(1.0, 0.0))
        if density_integral(z_hi, statistics) < target:
            raise CondensationError(
                f"n lambda^3 = {target!r} is within double precision of condensation"
            )
    else:
        z_hi = 1.0
        while density_integral(z_hi, statistics) < target:
            z_hi *= 2.0
            if z_hi > 1e300:
                raise ConvergenceError("could not bracket Fermi fugacity", {"target": target})

    def residual(z):
        return density_integral(z, statistics) - target

    try:
        z, info = optimize.brentq(
            residual, 1e-3 * min(target, 1.0), z_hi,
            xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500, full_output=True,
        )
    except (ValueError, RuntimeError) as exc:
        raise ConvergenceError(
            f"fugacity solve failed: {exc}", {"target": target, "z_hi": z_hi}
        ) from exc
    if not info.converged:
        raise ConvergenceError(
            "fugacity solve did not converge",
            {"target": target, "iterations": info.iterations, "root": z},
        )
    return z


@dataclass(frozen=True)
class GasParameters:
    """Physical scene: ideal gas of mass ``m`` and a test particle of mass ``M``.

    Give exactly one of ``n`` (number density) or ``z`` (fugacity); the other
    is derived through the density constraint.
    """

    m: float
    M: float
    beta: float
    statistics: Statistics
    n: float | None = None
    z: float | None = None
    hbar: float = 1.0

    def __post_init__(self):
        statistics = Statistics.parse(self.statistics)
        object.__setattr__(self, "statistics", statistics)
        _require_positive(m=self.m, M=self.M, beta=self.beta, hbar=self.hbar)
        if (self.n is None) == (self.z is None):
            raise DomainError("give exactly one of n (density) or z (fugacity)")
        lam3 = thermal_wavelength(self.m, self.beta, self.hbar) ** 3
        if self.z is None:
            z = solve_fugacity(self.n, self.m, self.beta, statistics, self.hbar)
            object.__setattr__(self, "z", float(z))
            object.__setattr__(self, "n", float(self.n))
        else:
            z = float(self.z)
            if not (np.isfinite(z) and z > 0):
                raise DomainError(f"fugacity must be positive, got {z!r}")
            if statistics is Statistics.BOSE_EINSTEIN and z >= 1.0:
                raise CondensationError(f"Bose fugacity must be < 1, got {z!r}")
            object.__setattr__(self, "z", z)
            object.__setattr__(self, "n", density_integral(z, statistics) / lam3)

    @property
    def alpha(self) -> float:
        """Mass ratio m/M."""
        return self.m / self.M

    @property
    def thermal_wavelength(self) -> float:
        return thermal_wavelength(self.m, self.beta, self.hbar)

    def replace(self, **changes) -> GasParameters:
        """Copy with some fields changed; changing ``n`` drops ``z`` and vice versa."""
        fields = dict(m=self.m, M=self.M, beta=self.beta, statistics=self.statistics,
                      n=self.n, z=self.z, hbar=self.hbar)
        if "n" in changes and "z" not in changes:
            fields["z"] = None
        elif "z" in changes and "n" not in changes:
            fields["n"] = None
        elif "n" not in changes and "z" not in changes:
            # temperature or mass changes keep the fugacity fixed
            fields["n"] = None
        fields.update(changes)
        return GasParameters(**fields)


def occupation(p, params: GasParameters):
    """Mean occupation of the gas single-particle state with momentum ``p``.

    ``z e^{-beta p^2/2m} / (1 -+ z e^{-beta p^2/2m})``, upper sign Bose.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError("momentum magnitude must be non-negative")
    x = params.z * np.exp(-params.beta * p**2 / (2.0 * params.m))
    sign = params.statistics.sign
    if sign > 0 and np.any(x >= 1.0):
        raise DomainError("Bose occupation diverges (z e^{-beta p^2/2m} >= 1)")
    return x / (1.0 - sign * x)


def degeneracy_parameter(params: GasParameters) -> float:
    """``n lambda^3``."""
    return params.n * params.thermal_wavelength**3
