"""Dynamic structure factor of an ideal gas probed by a heavy test particle.

Every evaluator takes the momentum transfer magnitude ``q`` and the energy
transfer ``E`` (both transferred *to the test particle*), broadcasting over
numpy arrays. The normalization follows the occupation-integral definition

    S(q, E) = (1/n) int d^3k/(2 pi hbar)^3 <n_k> (1 +- <n_{k-q}>) delta(Delta E)

so ``S`` carries units of inverse energy.

The quantum-statistical forms share one closed expression. With

    A = beta sigma^2 / 2m,   B = beta (sigma - q)^2 / 2m,   A - B = beta E

the Bose/Fermi result ``-+ log[(1 -+ z e^{-A}) / (1 -+ z e^{-B})] / (1 - e^{beta E})``
is rewritten exactly as

    z e^{-A} / (1 -+ z e^{-B}) * log1p(u)/u,   u = +-z (e^{-B} - e^{-A}) / (1 -+ z e^{-B})

which has no singularity on the elastic line ``E = 0`` and keeps full relative
precision for small fugacity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .statmech import GasParameters

__all__ = [
    "KinematicPoint",
    "SeriesDivergenceWarning",
    "sigma_var",
    "energy_transfer",
    "dsf_prefactor",
    "dsf_free_exact",
    "dsf_free_exact_qp",
    "dsf_mb",
    "dsf_brownian",
    "dsf_mb_brownian",
    "dsf_series",
    "series_convergence_ratio",
    "DsfModel",
    "FreeExact",
    "MaxwellBoltzmann",
    "FreeBrownian",
    "MBBrownian",
    "SeriesTruncated",
    "Tabulated",
    "make_model",
    "dsf_tabulated_load",
    "load_tabulated",
    "save_tabulated",
    "detailed_balance_residual",
    "factorization_error",
    "cross_section",
]


class SeriesDivergenceWarning(RuntimeWarning):
    """Fugacity series evaluated where its terms do not decrease."""


# ---------------------------------------------------------------------------
# kinematics


def _as_vectors(q_vec, p_vec):
    q_vec = np.asarray(q_vec, dtype=float)
    p_vec = np.asarray(p_vec, dtype=float)
    if q_vec.shape[-1:] != (3,) or p_vec.shape[-1:] != (3,):
        raise DomainError("momentum vectors must have a trailing axis of length 3")
    return q_vec, p_vec


def sigma_var(q_vec, p_vec, alpha):
    """Gas-particle momentum component along ``q`` selected by energy conservation.

    ``sigma = [(1 + alpha) q^2 + 2 alpha p.q] / (2 q)``
    """
    q_vec, p_vec = _as_vectors(q_vec, p_vec)
    q = np.linalg.norm(q_vec, axis=-1)
    if np.any(q == 0):
        raise DomainError("sigma is undefined at zero momentum transfer")
    pq = np.sum(p_vec * q_vec, axis=-1)
    return ((1.0 + alpha) * q**2 + 2.0 * alpha * pq) / (2.0 * q)


def energy_transfer(q_vec, p_vec, M):
    """Kinetic energy gained by a test particle of mass ``M`` kicked from ``p`` to ``p + q``."""
    q_vec, p_vec = _as_vectors(q_vec, p_vec)
    return (np.sum(q_vec * q_vec, axis=-1) / 2.0 + np.sum(p_vec * q_vec, axis=-1)) / M


@dataclass(frozen=True)
class KinematicPoint:
    """Collision of a test particle with momentum ``p_vec`` receiving ``q_vec``."""

    q_vec: np.ndarray
    p_vec: np.ndarray
    M: float

    @property
    def q(self):
        return np.linalg.norm(np.asarray(self.q_vec, dtype=float), axis=-1)

    @property
    def E(self):
        return energy_transfer(self.q_vec, self.p_vec, self.M)


# ---------------------------------------------------------------------------
# closed forms


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any(~(q > 0)):
        raise DomainError("structure factor requires q > 0 (forward scattering excluded)")
    return q


def dsf_prefactor(q, params: GasParameters):
    """``(2 pi hbar)^-3 * 2 pi m^2 / (n beta q)``."""
    q = _check_q(q)
    return 2.0 * math.pi * params.m**2 / (
        (2.0 * math.pi * params.hbar) ** 3 * params.n * params.beta * q
    )


def _log1p_ratio(u):
    # log1p(u)/u, equal to 1 at u = 0
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-6
    safe = np.where(small, 1.0, u)
    series = 1.0 - u / 2.0 + u**2 / 3.0 - u**3 / 4.0
    return np.where(small, series, np.log1p(safe) / safe)


def _statistics_factor(A, B, z, sign):
    """``z e^{-A}/(1 - sign z e^{-B}) * log1p(u)/u``; reduces to ``z e^{-A}`` for sign 0."""
    ea = np.exp(-A)
    if sign == 0:
        return z * ea
    eb = np.exp(-B)
    denom = 1.0 - sign * z * eb
    u = sign * z * (eb - ea) / denom
    return z * ea / denom * _log1p_ratio(u)


def _exact_exponents(q, E, params):
    # sigma = (2mE + q^2)/(2q); sigma - q = (2mE - q^2)/(2q)
    scale = params.beta / (8.0 * params.m * q**2)
    two_m_e = 2.0 * params.m * E
    return scale * (two_m_e + q**2) ** 2, scale * (two_m_e - q**2) ** 2


def _brownian_exponents(q, E, params):
    recoil = params.beta * q**2 / (8.0 * params.m)
    half = 0.5 * params.beta * E
    return recoil + half, recoil - half


def dsf_free_exact(q, E, params: GasParameters):
    """Exact finite-temperature structure factor of the free gas.

    Uses the statistics carried by ``params``; Maxwell-Boltzmann parameters
    give the classical form.
    """
    q = _check_q(q)
    E = np.asarray(E, dtype=float)
    A, B = _exact_exponents(q, E, params)
    return dsf_prefactor(q, params) * _statistics_factor(A, B, params.z, params.statistics.sign)


def dsf_free_exact_qp(q_vec, p_vec, params: GasParameters):
    """Same as :func:`dsf_free_exact`, parameterized by momentum vectors through ``sigma``."""
    q_vec, p_vec = _as_vectors(q_vec, p_vec)
    q = np.linalg.norm(q_vec, axis=-1)
    sigma = sigma_var(q_vec, p_vec, params.alpha)
    c = params.beta / (2.0 * params.m)
    A = c * sigma**2
    B = c * (sigma - q) ** 2
    return dsf_prefactor(q, params) * _statistics_factor(A, B, params.z, params.statistics.sign)


def dsf_mb(q, E, params: GasParameters):
    """Classical (Maxwell-Boltzmann) structure factor ``C z exp(-beta sigma^2/2m)``."""
    q = _check_q(q)
    A, _ = _exact_exponents(q, np.asarray(E, dtype=float), params)
    return dsf_prefactor(q, params) * params.z * np.exp(-A)


def dsf_brownian(q, E, params: GasParameters):
    """Heavy-particle limit of the structure factor.

    The recoil term in the exponent is replaced by ``beta q^2/8m + beta E/2``,
    valid for ``m/M << 1``.
    """
    q = _check_q(q)
    E = np.asarray(E, dtype=float)
    if params.statistics.sign > 0:
        # the Bose form needs z e^{-B} < 1 for both signs of E, which is the
        # convergence region of its fugacity series
        outside = series_convergence_ratio(q, E, params) >= 1.0
        if np.any(outside):
            raise DomainError(
                f"Bose Brownian structure factor undefined at {int(np.sum(outside))} point(s) "
                "where z exp(-beta q^2/8m + beta |E|/2) >= 1"
            )
    A, B = _brownian_exponents(q, E, params)
    return dsf_prefactor(q, params) * _statistics_factor(A, B, params.z, params.statistics.sign)


def dsf_mb_brownian(q, E, params: GasParameters):
    q = _check_q(q)
    A, _ = _brownian_exponents(q, np.asarray(E, dtype=float), params)
    return dsf_prefactor(q, params) * params.z * np.exp(-A)


def series_convergence_ratio(q, E, params: GasParameters):
    """Asymptotic ratio of successive fugacity-series terms.

    ``z exp(-beta q^2/8m + beta |E|/2)``
    """
    q = _check_q(q)
    E = np.asarray(E, dtype=float)
    return params.z * np.exp(-params.beta * q**2 / (8.0 * params.m) + 0.5 * params.beta * np.abs(E))


def dsf_series(q, E, params: GasParameters, order: int, return_flag: bool = False):
    """Brownian-limit structure factor as a fugacity series truncated after ``order`` terms.

    Points where the series does not converge are flagged with a
    :class:`SeriesDivergenceWarning`; with ``return_flag`` the boolean mask of
    such points is returned alongside the values.
    """
    if int(order) != order or order < 1:
        raise DomainError(f"series order must be a positive integer, got {order!r}")
    q = _check_q(q)
    E = np.asarray(E, dtype=float)
    sign = params.statistics.sign
    x = params.beta * E
    w = params.z * np.exp(-params.beta * q**2 / (8.0 * params.m))
    bracket = np.ones(np.broadcast(q, E).shape)
    for k in range(1, int(order) + 1):
        inner = sum(np.exp(j * x) for j in range(k + 1))
        bracket = bracket + float(sign**k) / (k + 1) * w**k * np.exp(-0.5 * k * x) * inner
    divergent = np.asarray(series_convergence_ratio(q, E, params) >= 1.0) & (sign != 0)
    if np.any(divergent):
        warnings.warn(
            f"fugacity series outside its convergence region at {int(np.sum(divergent))} point(s)",
            SeriesDivergenceWarning,
            stacklevel=2,
        )
    value = dsf_mb_brownian(q, E, params) * bracket
    if return_flag:
        return value, divergent
    return value


# ---------------------------------------------------------------------------
# models


class DsfModel:
    """A structure-factor evaluator ``S(q, E)`` bound to an inverse temperature."""

    name = "abstract"

    @property
    def beta(self) -> float:
        raise NotImplementedError

    def evaluate(self, q, E):
        raise NotImplementedError

    def __call__(self, q, E):
        return self.evaluate(q, E)

    def evaluate_point(self, point: KinematicPoint):
        return self.evaluate(point.q, point.E)

    def evaluate_qp(self, q_vec, p_vec, M=None):
        if M is None:
            params = getattr(self, "params", None)
            if params is None:
                raise DomainError("test-particle mass needed to convert (q, p) to (q, E)")
            M = params.M
        q_vec, p_vec = _as_vectors(q_vec, p_vec)
        return self.evaluate(np.linalg.norm(q_vec, axis=-1), energy_transfer(q_vec, p_vec, M))

    def describe(self) -> dict:
        return {"model": self.name}


@dataclass(frozen=True)
class _ParamModel(DsfModel):
    params: GasParameters

    @property
    def beta(self):
        return self.params.beta

    def describe(self):
        return {"model": self.name, "statistics": self.params.statistics.value, "z": self.params.z}


class FreeExact(_ParamModel):
    name = "free_exact"

    def evaluate(self, q, E):
        return dsf_free_exact(q, E, self.params)

    def evaluate_qp(self, q_vec, p_vec, M=None):
        if M is not None and M != self.params.M:
            return super().evaluate_qp(q_vec, p_vec, M)
        return dsf_free_exact_qp(q_vec, p_vec, self.params)


class MaxwellBoltzmann(_ParamModel):
    name = "mb"

    def evaluate(self, q, E):
        return dsf_mb(q, E, self.params)


class FreeBrownian(_ParamModel):
    name = "free_brownian"

    def evaluate(self, q, E):
        return dsf_brownian(q, E, self.params)


class MBBrownian(_ParamModel):
    name = "mb_brownian"

    def evaluate(self, q, E):
        return dsf_mb_brownian(q, E, self.params)


@dataclass(frozen=True)
class SeriesTruncated(_ParamModel):
    order: int = 1

    name = "series"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise DomainError(f"series order must be a positive integer, got {self.order!r}")

    def evaluate(self, q, E):
        return dsf_series(q, E, self.params, self.order)

    def describe(self):
        return {**super().describe(), "order": self.order}


@dataclass(frozen=True, eq=False)
class Tabulated(DsfModel):
    """Structure factor sampled on a rectangular ``(q, E)`` grid.

    Bilinear interpolation inside the grid, no extrapolation. ``values[i, j]``
    belongs to ``(q_grid[i], E_grid[j])``.
    """

    q_grid: np.ndarray
    E_grid: np.ndarray
    values: np.ndarray
    table_beta: float
    source: str = field(default="", compare=False)

    name = "tabulated"

    def __post_init__(self):
        q_grid = np.array(self.q_grid, dtype=float)
        E_grid = np.array(self.E_grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if q_grid.ndim != 1 or E_grid.ndim != 1 or len(q_grid) < 2 or len(E_grid) < 2:
            raise DomainError("tabulated S needs at least two nodes on each axis")
        if np.any(np.diff(q_grid) <= 0) or np.any(np.diff(E_grid) <= 0):
            raise DomainError("tabulated S grid must be strictly increasing on both axes")
        if q_grid[0] <= 0:
            raise DomainError("tabulated S needs q > 0")
        if values.shape != (len(q_grid), len(E_grid)):
            raise DomainError(
                f"values shape {values.shape} does not match grid ({len(q_grid)}, {len(E_grid)})"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError("tabulated S values must be finite and non-negative")
        if not self.table_beta > 0:
            raise DomainError("tabulated S needs a positive beta")
        for array in (q_grid, E_grid, values):
            array.setflags(write=False)
        object.__setattr__(self, "q_grid", q_grid)
        object.__setattr__(self, "E_grid", E_grid)
        object.__setattr__(self, "values", values)

    @property
    def beta(self):
        return self.table_beta

    def evaluate(self, q, E):
        q, E = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(E, dtype=float))
        qg, eg = self.q_grid, self.E_grid
        outside = (q < qg[0]) | (q > qg[-1]) | (E < eg[0]) | (E > eg[-1]) | ~np.isfinite(q + E)
        if np.any(outside):
            raise DomainError(
                f"query outside tabulated range q in [{qg[0]}, {qg[-1]}], "
                f"E in [{eg[0]}, {eg[-1]}]"
            )
        i = np.clip(np.searchsorted(qg, q, side="right") - 1, 0, len(qg) - 2)
        j = np.clip(np.searchsorted(eg, E, side="right") - 1, 0, len(eg) - 2)
        tq = (q - qg[i]) / (qg[i + 1] - qg[i])
        te = (E - eg[j]) / (eg[j + 1] - eg[j])
        v = self.values
        lower = v[i, j] * (1.0 - te) + v[i, j + 1] * te
        upper = v[i + 1, j] * (1.0 - te) + v[i + 1, j + 1] * te
        # exact node values when tq == 0
        return np.where(tq == 0.0, lower, lower * (1.0 - tq) + upper * tq)

    def describe(self):
        return {"model": self.name, "source": self.source,
                "n_q": len(self.q_grid), "n_E": len(self.E_grid)}

    @classmethod
    def from_model(cls, model: DsfModel, q_grid, E_grid) -> Tabulated:
        qq, ee = np.meshgrid(q_grid, E_grid, indexing="ij")
        return cls(q_grid, E_grid, model.evaluate(qq, ee), model.beta, source=model.name)


_MODELS = {
    "free_exact": FreeExact,
    "exact": FreeExact,
    "mb": MaxwellBoltzmann,
    "maxwell_boltzmann": MaxwellBoltzmann,
    "free_brownian": FreeBrownian,
    "brownian": FreeBrownian,
    "mb_brownian": MBBrownian,
}


def make_model(name: str, params: GasParameters | None = None, order: int | None = None,
               table: str | Path | None = None) -> DsfModel:
    """Construct a model by its configuration name."""
    key = name.strip().lower()
    if key == "tabulated":
        if table is None:
            raise DomainError("tabulated model needs a table file")
        return load_tabulated(table)
    if params is None:
        raise DomainError(f"model {name!r} needs gas parameters")
    if key in ("series", "series_truncated"):
        return SeriesTruncated(params, 1 if order is None else order)
    if key not in _MODELS:
        raise DomainError(f"unknown structure-factor model {name!r}")
    return _MODELS[key](params)


# ---------------------------------------------------------------------------
# tabulated file format
#
#   # comment lines start with '#'
#   beta <float>
#   q <float> <float> ...
#   E <float> <float> ...
#   values
#   <len(E) floats>        one line per q node, in q order

_TABLE_MAGIC = "# gasbath tabulated S(q,E) v1"


def save_tabulated(path, model: Tabulated) -> None:
    def fmt(values):
        return " ".join(repr(float(v)) for v in values)

    lines = [_TABLE_MAGIC, f"beta {model.beta!r}", f"q {fmt(model.q_grid)}",
             f"E {fmt(model.E_grid)}", "values"]
    lines.extend(fmt(row) for row in model.values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_tabulated(path) -> Tabulated:
    """Read a structure-factor table written by :func:`save_tabulated` or by hand."""
    path = Path(path)
    header = {}
    rows = []
    in_values = False
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if in_values:
                rows.append([float(tok) for tok in line.split()])
                continue
            key, _, rest = line.partition(" ")
            if key == "values":
                in_values = True
            elif key == "beta":
                header["beta"] = float(rest)
            elif key in ("q", "E"):
                header[key] = [float(tok) for tok in rest.split()]
            else:
                raise DomainError(f"unknown header key {key!r}")
        except ValueError as exc:
            raise DomainError(f"{path}:{lineno}: {exc}") from exc
    missing = {"beta", "q", "E"} - header.keys()
    if missing or not in_values:
        raise DomainError(f"{path}: missing {sorted(missing) or ['values']} section")
    if any(len(row) != len(header["E"]) for row in rows):
        raise DomainError(f"{path}: every values row needs {len(header['E'])} entries")
    return Tabulated(header["q"], header["E"], np.array(rows), header["beta"], source=str(path))


def dsf_tabulated_load(table) -> Tabulated:
    """Build a tabulated model from a file path or a ``(q, E, values, beta)`` tuple."""
    if isinstance(table, (str, Path)):
        return load_tabulated(table)
    q_grid, E_grid, values, beta = table
    return Tabulated(q_grid, E_grid, values, beta)


# ---------------------------------------------------------------------------
# diagnostics


def detailed_balance_residual(model: DsfModel, q, E) -> float:
    """Largest ``|S(q,-E) e^{-beta E} / S(q,E) - 1|`` over the given points.

    ``q`` and ``E`` broadcast against each other. Points where either value
    is below the smallest normal double are skipped, since underflowed and
    subnormal numbers carry no relative precision. Returns NaN when no point
    survives.
    """
    q, E = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(E, dtype=float))
    forward = model.evaluate(q, E)
    reverse = model.evaluate(q, -E)
    usable = np.minimum(forward, reverse) >= np.finfo(float).tiny
    if not np.any(usable):
        return math.nan
    rel = np.abs(reverse[usable] * np.exp(-model.beta * E[usable]) / forward[usable] - 1.0)
    return float(np.max(rel))


def factorization_error(model: DsfModel, q, E, E_prime):
    """Relative gap between S at the mean energy and the geometric mean of S.

    ``|S(q,(E+E')/2) - sqrt(S(q,E) S(q,E'))| / S(q,(E+E')/2)``
    """
    mid = model.evaluate(q, 0.5 * (np.asarray(E, dtype=float) + np.asarray(E_prime, dtype=float)))
    geo = np.sqrt(model.evaluate(q, E) * model.evaluate(q, E_prime))
    if np.any(mid <= 0):
        raise DomainError("factorization error undefined where S vanishes at the midpoint")
    return np.abs(mid - geo) / mid


def cross_section(q_vec, p_vec, tmatrix, model: DsfModel, params: GasParameters):
    """Double-differential cross section ``d^2 sigma / dOmega dE`` for ``p -> p + q``.

    ``(M / 2 pi hbar^2)^2 (p'/p) |t(q)|^2 S(q, E)``
    """
    q_vec, p_vec = _as_vectors(q_vec, p_vec)
    p = np.linalg.norm(p_vec, axis=-1)
    if np.any(p == 0):
        raise DomainError("cross section needs a non-zero incoming momentum")
    p_out = np.linalg.norm(p_vec + q_vec, axis=-1)
    q = np.linalg.norm(q_vec, axis=-1)
    E = energy_transfer(q_vec, p_vec, params.M)
    flux = (params.M / (2.0 * math.pi * params.hbar**2)) ** 2 * p_out / p
    return flux * tmatrix.squared(q) * model.evaluate(q, E)
