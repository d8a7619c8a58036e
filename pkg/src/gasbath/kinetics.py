"""Discretized collision dynamics of the test particle.

Two reductions of the master equation are provided:

* Pauli (momentum-diagonal) dynamics of an isotropic distribution on a radial
  momentum grid. Rates are integrated over collision angles in closed form by
  switching the angular variable to the transfer magnitude ``q``.
* Full density-matrix dynamics restricted to collinear momentum transfers on
  a uniform 1D grid. Each transfer ``q = k h`` contributes one jump operator
  ``shift_k @ diag(sqrt(S(|q|, E)))``.

Both use the rate density per unit ``d^3q``

    R(q, E) = (2 pi / hbar) (2 pi hbar)^3 n |t(q)|^2 S(q, E)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse

from .dsf import DsfModel
from .errors import DomainError, MonitorViolation, StepSizeError
from .statmech import GasParameters
from .tmatrix import TMatrixModel

log = logging.getLogger(__name__)

__all__ = [
    "TRAJECTORY_COLUMNS",
    "rate_prefactor",
    "default_q_max",
    "RadialMomentumGrid",
    "UniformGrid1D",
    "CollisionKernel",
    "PauliTrajectory",
    "Lindblad1D",
    "DensityTrajectory",
    "build_pauli_kernel",
    "canonical_state",
    "evolve_pauli",
    "suggest_dt",
    "build_1d_lindblad",
    "canonical_density_matrix",
    "evolve_density_matrix",
    "stationarity_residual",
    "pauli_observables",
    "density_observables",
]

TRAJECTORY_COLUMNS = ("time", "mean_p", "mean_p2", "kinetic_energy", "entropy",
                      "min_eigenvalue", "trace")


def rate_prefactor(params: GasParameters) -> float:
    """``(2 pi / hbar) (2 pi hbar)^3 n``."""
    return 2.0 * math.pi / params.hbar * (2.0 * math.pi * params.hbar) ** 3 * params.n


def default_q_max(params: GasParameters) -> float:
    """Transfer cutoff at six widths of the ``exp(-beta q^2 / 8m)`` envelope."""
    return 6.0 * math.sqrt(8.0 * params.m / params.beta)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class RadialMomentumGrid:
    """Nodes ``p_i > 0`` and weights for ``int d^3p`` of isotropic functions (4 pi p^2 included)."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or len(nodes) < 2:
            raise DomainError("radial grid needs matching 1D node and weight arrays")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise DomainError("radial nodes must be positive and strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("radial weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def gauss_legendre(cls, p_max: float, n: int) -> RadialMomentumGrid:
        x, w = leggauss(n)
        p = 0.5 * p_max * (x + 1.0)
        return cls(p, 4.0 * math.pi * p**2 * 0.5 * p_max * w, "gauss_legendre")

    @classmethod
    def uniform(cls, p_max: float, n: int) -> RadialMomentumGrid:
        """Midpoint nodes of ``n`` equal shells; weights are the exact shell volumes."""
        edges = np.linspace(0.0, p_max, n + 1)
        p = 0.5 * (edges[1:] + edges[:-1])
        return cls(p, 4.0 * math.pi / 3.0 * np.diff(edges**3), "uniform")

    @classmethod
    def for_params(cls, params: GasParameters, n: int, widths: float = 7.0,
                   kind: str = "gauss_legendre") -> RadialMomentumGrid:
        p_max = widths * math.sqrt(params.M / params.beta)
        if kind == "uniform":
            return cls.uniform(p_max, n)
        if kind == "gauss_legendre":
            return cls.gauss_legendre(p_max, n)
        raise DomainError(f"unknown radial grid kind {kind!r}")

    @property
    def p_max(self) -> float:
        if self.kind == "uniform":
            return float(self.nodes[-1] + 0.5 * (self.nodes[1] - self.nodes[0]))
        return float(self.nodes[-1])

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class UniformGrid1D:
    """Symmetric uniform momentum grid ``p_a = (a - (N-1)/2) h``."""

    n: int
    spacing: float

    def __post_init__(self):
        if self.n < 2 or not self.spacing > 0:
            raise DomainError("1D grid needs n >= 2 and positive spacing")

    @classmethod
    def from_extent(cls, p_max: float, n: int) -> UniformGrid1D:
        return cls(n, 2.0 * p_max / (n - 1))

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) - 0.5 * (self.n - 1)) * self.spacing

    @property
    def p_max(self) -> float:
        return 0.5 * (self.n - 1) * self.spacing


# ---------------------------------------------------------------------------
# Pauli kernel


@dataclass(frozen=True, eq=False)
class CollisionKernel:
    """Rates ``W[j, i]`` for moving probability mass from node ``i`` to node ``j``.

    ``loss[i]`` is the column sum, so the generator ``W - diag(loss)``
    conserves total probability exactly.
    """

    W: np.ndarray
    loss: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    energies: np.ndarray
    beta: float
    info: dict = field(default_factory=dict)

    @classmethod
    def from_rates(cls, W, nodes, weights, energies, beta, info=None) -> CollisionKernel:
        W = np.array(W, dtype=float)
        np.fill_diagonal(W, 0.0)
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise DomainError("transition rates must be finite and non-negative")
        return cls(W, W.sum(axis=0), np.asarray(nodes, float), np.asarray(weights, float),
                   np.asarray(energies, float), float(beta), dict(info or {}))

    @property
    def generator(self) -> np.ndarray:
        return self.W - np.diag(self.loss)

    def equilibrium(self, beta=None) -> np.ndarray:
        """Normalized discrete canonical masses ``w_i exp(-beta E_i)``."""
        beta = self.beta if beta is None else beta
        logw = np.log(self.weights) - beta * (self.energies - self.energies.min())
        pi = np.exp(logw - logw.max())
        return pi / pi.sum()

    def detailed_balance_residual(self) -> float:
        """Max relative mismatch of the flux pairs ``W[j,i] pi_i`` and ``W[i,j] pi_j``."""
        pi = self.equilibrium()
        flux = self.W * pi[None, :]
        scale = np.maximum(flux, flux.T)
        mask = scale > 1e-300
        if not np.any(mask):
            return 0.0
        return float(np.max(np.abs(flux - flux.T)[mask] / scale[mask]))


def build_pauli_kernel(grid: RadialMomentumGrid, tmatrix: TMatrixModel, model: DsfModel,
                       params: GasParameters, n_angular: int = 32,
                       q_max: float | None = None) -> CollisionKernel:
    """Isotropic Pauli rates between radial shells.

    The angular average over outgoing directions is written as an integral
    over the transfer magnitude,

        int dOmega' R = (2 pi / (p p')) int_{|p-p'|}^{p+p'} q R(q, E_{p'} - E_p) dq,

    evaluated by Gauss-Legendre with ``n_angular`` nodes. Since ``S ~ 1/q``
    the integrand ``q R`` stays smooth down to ``q -> 0``.
    """
    p = grid.nodes
    energies = p**2 / (2.0 * params.M)
    q_max = default_q_max(params) if q_max is None else float(q_max)
    x, w = leggauss(n_angular)

    pi_, pj = p[None, :], p[:, None]          # column i = source, row j = target
    lo = np.abs(pj - pi_)
    hi = np.minimum(pj + pi_, q_max)
    active = hi > lo
    half = np.where(active, 0.5 * (hi - lo), 0.0)
    mid = 0.5 * (hi + lo)
    q = mid[..., None] + half[..., None] * x            # (n, n, n_angular)
    q = np.where(active[..., None], q, 1.0)             # placeholder, zero-weighted below
    E = np.broadcast_to((energies[:, None] - energies[None, :])[..., None], q.shape)
    try:
        s_values = model.evaluate(q, E)
    except DomainError as exc:
        raise DomainError(
            f"structure factor failed on the kernel domain q in [{q[active].min():.4g}, "
            f"{q[active].max():.4g}], |E| <= {np.abs(E).max():.4g}: {exc}"
        ) from exc
    integrand = q * tmatrix.squared(q) * s_values
    integral = np.where(active, half * (integrand @ w), 0.0)
    angular = 2.0 * math.pi / (pi_ * pj) * rate_prefactor(params) * integral
    W = grid.weights[:, None] / (4.0 * math.pi) * angular
    info = {"n_angular": n_angular, "q_max": q_max, "grid": grid.kind, "n_nodes": len(p)}
    return CollisionKernel.from_rates(W, p, grid.weights, energies, params.beta, info)


def canonical_state(grid: RadialMomentumGrid, params: GasParameters, beta=None,
                    projection: str = "node") -> np.ndarray:
    """Maxwell distribution of the test particle as probability masses on the grid.

    ``projection="node"`` samples the density at the nodes and multiplies by
    the weights. ``projection="cell"`` integrates the density exactly over
    each shell of a uniform grid.
    """
    beta = params.beta if beta is None else beta
    if projection == "node":
        logw = np.log(grid.weights) - beta * grid.nodes**2 / (2.0 * params.M)
        P = np.exp(logw - logw.max())
        return P / P.sum()
    if projection == "cell":
        if grid.kind != "uniform":
            raise DomainError("cell projection needs a uniform radial grid")
        from scipy.special import erf

        h = grid.nodes[1] - grid.nodes[0]
        edges = np.append(grid.nodes - 0.5 * h, grid.p_max)
        s = math.sqrt(params.M / beta)
        u = edges / (math.sqrt(2.0) * s)
        # radial CDF of the 3D Maxwell distribution
        cdf = erf(u) - 2.0 / math.sqrt(math.pi) * u * np.exp(-u * u)
        P = np.diff(cdf)
        return P / P.sum()
    raise DomainError(f"unknown projection {projection!r}")


@dataclass
class PauliTrajectory:
    times: np.ndarray
    states: np.ndarray
    clipped: int = 0


def suggest_dt(total_rate: float, safety: float = 0.05) -> float:
    return safety / total_rate if total_rate > 0 else 1.0


def _rk4_propagator(A: np.ndarray, dt: float) -> np.ndarray:
    hA = dt * A
    eye = np.eye(len(A))
    term = eye.copy()
    prop = eye.copy()
    for order in range(1, 5):
        term = term @ hA / order
        prop = prop + term
    return prop


def evolve_pauli(P0, kernel: CollisionKernel, dt: float, n_steps: int,
                 record_every: int = 1) -> PauliTrajectory:
    """Classic RK4 integration of ``dP/dt = W P - loss * P``.

    For a constant linear generator one RK4 step is the degree-4 Taylor
    polynomial of ``exp(dt A)``, which is precomputed once. Column sums of that
    propagator are one, so total probability is conserved to rounding.
    """
    P = np.array(P0, dtype=float)
    if P.shape != kernel.loss.shape:
        raise DomainError("state and kernel sizes differ")
    if np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
        raise DomainError("Pauli state must be non-negative and sum to one")
    max_loss = float(kernel.loss.max(initial=0.0))
    if dt * max_loss >= 0.1:
        suggested = suggest_dt(max_loss)
        raise StepSizeError(
            f"dt * max(loss) = {dt * max_loss:.3g} exceeds 0.1; try dt <= {suggested:.4g}",
            suggested,
        )
    prop = _rk4_propagator(kernel.generator, dt)
    times = [0.0]
    states = [P.copy()]
    clipped = 0
    for step in range(1, n_steps + 1):
        P = prop @ P
        negative = P < 0
        if np.any(negative):
            if np.any(P < -1e-14):
                log.warning("Pauli step %d produced mass %.3g below zero", step, P.min())
            clipped += int(negative.sum())
            P[negative] = 0.0
        drift = abs(P.sum() - 1.0)
        if drift > 1e-12:
            raise MonitorViolation(
                f"total probability drifted by {drift:.3g} at step {step}",
                {"step": step, "time": step * dt, "checks": {"trace": drift},
                 "failed": ["trace"], "P": P.copy()},
            )
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(P.copy())
    return PauliTrajectory(np.array(times), np.array(states), clipped)


def pauli_observables(P, grid: RadialMomentumGrid, M: float) -> dict:
    """Moments of an isotropic state; ``mean_p`` is the mean momentum magnitude."""
    P = np.asarray(P, dtype=float)
    p = grid.nodes
    mean_p2 = float(P @ p**2)
    positive = P > 0
    density = P[positive] / grid.weights[positive]
    return {
        "mean_p": float(P @ p),
        "mean_p2": mean_p2,
        "kinetic_energy": mean_p2 / (2.0 * M),
        "entropy": float(-np.sum(P[positive] * np.log(density))),
        "min_eigenvalue": float(P.min()),
        "trace": float(P.sum()),
    }


# ---------------------------------------------------------------------------
# quasi-1D Lindblad dynamics


@dataclass(frozen=True, eq=False)
class Lindblad1D:
    """Lindblad generator on a uniform 1D momentum grid.

    ``matrix`` acts on the row-major flattening of ``rho``. Jumps whose target
    lies off the grid are removed from the jump operators, so the generator is
    an exact Lindblad form on the finite grid; the rate those jumps would have
    carried is kept in ``leak`` for auditing.
    """

    grid: UniformGrid1D
    shifts: np.ndarray          # k, transfer q = k h
    rates: np.ndarray           # (2 pi/hbar)(2 pi hbar)^3 n |t|^2 h per shift
    s_values: np.ndarray        # S(|q|, E) for each (shift, source node); 0 where off-grid
    energies: np.ndarray
    escape: np.ndarray          # total on-grid jump rate out of each node
    leak: np.ndarray            # jump rate that would leave the grid, per node
    matrix: sparse.csr_matrix
    hbar: float
    beta: float

    @property
    def n(self) -> int:
        return self.grid.n

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return (self.matrix @ rho.reshape(-1)).reshape(self.n, self.n)

    def __call__(self, rho):
        return self.apply(rho)

    def jump_operators(self):
        """Dense ``(rate, L_k)`` pairs, for inspection and tests."""
        ops = []
        for k, rate, s in zip(self.shifts, self.rates, self.s_values):
            L = np.zeros((self.n, self.n))
            src = np.arange(self.n)
            dst = src + k
            ok = (dst >= 0) & (dst < self.n)
            L[dst[ok], src[ok]] = np.sqrt(s[ok])
            ops.append((float(rate), L))
        return ops

    def pauli_kernel(self) -> CollisionKernel:
        """Rates of the momentum-diagonal sector, as a Pauli kernel on the same nodes."""
        W = np.zeros((self.n, self.n))
        src = np.arange(self.n)
        for k, rate, s in zip(self.shifts, self.rates, self.s_values):
            dst = src + k
            ok = (dst >= 0) & (dst < self.n)
            W[dst[ok], src[ok]] += rate * s[ok]
        return CollisionKernel.from_rates(W, self.grid.nodes, np.full(self.n, self.grid.spacing),
                                          self.energies, self.beta, {"source": "lindblad1d"})

    def leak_rate(self, rho) -> float:
        return float(np.real(np.diagonal(rho)) @ self.leak)

    def spectral_bound(self) -> float:
        """Upper estimate of the generator's spectral radius."""
        spread = (self.energies.max() - self.energies.min()) / self.hbar
        return 2.0 * float(self.escape.max(initial=0.0)) + spread


def build_1d_lindblad(grid: UniformGrid1D, tmatrix: TMatrixModel, model: DsfModel,
                      params: GasParameters, q_max: float | None = None) -> Lindblad1D:
    """Collinear-transfer restriction of the Lindblad master equation."""
    if not isinstance(grid, UniformGrid1D):
        raise DomainError("the 1D Lindblad generator needs a uniform grid")
    n, h = grid.n, grid.spacing
    p = grid.nodes
    energies = p**2 / (2.0 * params.M)
    q_max = default_q_max(params) if q_max is None else float(q_max)
    k_max = min(int(math.floor(q_max / h + 1e-12)), n - 1)
    if k_max < 1:
        raise DomainError("grid spacing exceeds the momentum-transfer cutoff")
    shifts = np.array([k for k in range(-k_max, k_max + 1) if k != 0])
    q = np.abs(shifts) * h
    rates = rate_prefactor(params) * tmatrix.squared(q) * h

    target = p[None, :] + shifts[:, None] * h
    E = (target**2 - p[None, :] ** 2) / (2.0 * params.M)
    qq = np.broadcast_to(q[:, None], E.shape)
    try:
        s_all = np.asarray(model.evaluate(qq, E), dtype=float)
    except DomainError as exc:
        raise DomainError(f"structure factor failed on the 1D transfer domain: {exc}") from exc
    dst = np.arange(n)[None, :] + shifts[:, None]
    on_grid = (dst >= 0) & (dst < n)
    s_values = np.where(on_grid, s_all, 0.0)
    escape = (rates[:, None] * s_values).sum(axis=0)
    leak = (rates[:, None] * np.where(on_grid, 0.0, s_all)).sum(axis=0)

    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    # coherent part and loss: -i (E_a - E_b)/hbar - (escape_a + escape_b)/2
    diag = (-1j * (energies[:, None] - energies[None, :]) / params.hbar
            - 0.5 * (escape[:, None] + escape[None, :]))
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    sqrt_s = np.sqrt(s_values)
    for k, rate, amp in zip(shifts, rates, sqrt_s):
        src = np.arange(max(0, -k), min(n, n - k))
        a, b = np.meshgrid(src, src, indexing="ij")
        rows.append(idx[a + k, b + k].ravel())
        cols.append(idx[a, b].ravel())
        vals.append((rate * amp[a] * amp[b]).ravel().astype(complex))
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    ).tocsr()
    return Lindblad1D(grid, shifts, rates, s_values, energies, escape, leak, matrix,
                      params.hbar, params.beta)


def canonical_density_matrix(grid: UniformGrid1D, params: GasParameters, beta=None) -> np.ndarray:
    beta = params.beta if beta is None else beta
    e = grid.nodes**2 / (2.0 * params.M)
    w = np.exp(-beta * (e - e.min()))
    return np.diag(w / w.sum()).astype(complex)


@dataclass
class DensityTrajectory:
    times: np.ndarray
    states: list
    observables: list
    lost_norm: float = 0.0


def _hermiticity_defect(rho) -> float:
    return float(np.max(np.abs(rho - rho.conj().T)))


def _min_eigenvalue(rho) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())


def density_observables(rho, grid: UniformGrid1D, M: float) -> dict:
    p = grid.nodes
    pops = np.real(np.diagonal(rho))
    herm = 0.5 * (rho + rho.conj().T)
    evals = np.linalg.eigvalsh(herm)
    positive = evals[evals > 1e-300]
    mean_p2 = float(pops @ p**2)
    return {
        "mean_p": float(pops @ p),
        "mean_p2": mean_p2,
        "kinetic_energy": mean_p2 / (2.0 * M),
        "entropy": float(-np.sum(positive * np.log(positive))),
        "min_eigenvalue": float(evals.min()),
        "trace": float(np.real(np.trace(rho))),
    }


_FLUSH = 1e-200


def evolve_density_matrix(rho0, superop: Lindblad1D, dt: float, n_steps: int,
                          monitor_every: int = 10, record_every: int | None = None,
                          M: float | None = None, max_lost_norm: float = 1e-9,
                          tolerances: dict | None = None) -> DensityTrajectory:
    """RK4 evolution of a density matrix with invariant monitors.

    Every ``monitor_every`` steps the trace drift, Hermiticity defect, smallest
    eigenvalue and audited edge leakage are checked; a violation raises
    :class:`MonitorViolation` carrying the offending state.
    """
    tol = {"trace": 1e-9, "hermiticity": 1e-10, "min_eigenvalue": -1e-8}
    tol.update(tolerances or {})
    rho = np.array(rho0, dtype=complex)
    n = superop.n
    if rho.shape != (n, n):
        raise DomainError(f"density matrix must be {n}x{n}")
    if _hermiticity_defect(rho) > 1e-12:
        raise DomainError("initial density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-10:
        raise DomainError("initial density matrix must have unit trace")
    if _min_eigenvalue(rho) < -1e-8:
        raise DomainError("initial density matrix is not positive semidefinite")
    bound = superop.spectral_bound()
    if dt * bound > 2.5:
        suggested = 2.5 / bound
        raise StepSizeError(
            f"dt = {dt:.4g} above RK4 stability bound {suggested:.4g}", suggested
        )
    M = M if M is not None else 1.0
    record_every = record_every or monitor_every
    L = superop.matrix
    trace0 = np.trace(rho).real
    lost = 0.0
    vec = rho.reshape(-1)
    times, states, observables = [0.0], [rho.copy()], [density_observables(rho, superop.grid, M)]

    for step in range(1, n_steps + 1):
        lost += dt * superop.leak_rate(vec.reshape(n, n))
        k1 = L @ vec
        k2 = L @ (vec + 0.5 * dt * k1)
        k3 = L @ (vec + 0.5 * dt * k2)
        k4 = L @ (vec + dt * k3)
        vec = vec + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # entries deep in the thermal tail underflow to subnormals, which are
        # orders of magnitude slower in the sparse product
        vec[np.abs(vec) < _FLUSH] = 0.0
        if step % monitor_every == 0 or step == n_steps:
            rho = vec.reshape(n, n)
            checks = {
                "trace": abs(np.trace(rho).real - trace0),
                "hermiticity": _hermiticity_defect(rho),
                "min_eigenvalue": _min_eigenvalue(rho),
                "lost_norm": lost,
            }
            failed = [name for name in ("trace", "hermiticity") if checks[name] > tol[name]]
            if checks["min_eigenvalue"] < tol["min_eigenvalue"]:
                failed.append("min_eigenvalue")
            if lost > max_lost_norm:
                failed.append("lost_norm")
            if failed:
                raise MonitorViolation(
                    f"monitor violation at step {step}: {', '.join(failed)}",
                    {"step": step, "time": step * dt, "checks": checks, "failed": failed,
                     "rho": rho.copy()},
                )
        if step % record_every == 0 or step == n_steps:
            rho = vec.reshape(n, n)
            times.append(step * dt)
            states.append(rho.copy())
            observables.append(density_observables(rho, superop.grid, M))
    return DensityTrajectory(np.array(times), states, observables, lost)


# ---------------------------------------------------------------------------
# stationarity


def stationarity_residual(generator, params: GasParameters, beta=None, grid=None,
                          projection: str = "node", widths: float = 6.0) -> float:
    """Norm of the generator applied to the canonical state at ``beta``.

    L1 norm for a :class:`CollisionKernel`, trace norm for a
    :class:`Lindblad1D`. Warns when the grid does not reach ``widths`` thermal
    momentum widths of the test particle.
    """
    beta = params.beta if beta is None else beta
    width = math.sqrt(params.M / beta)
    if isinstance(generator, CollisionKernel):
        p_max = grid.p_max if grid is not None else float(generator.nodes.max())
        if p_max < widths * width:
            log.warning("radial grid reaches %.2f thermal widths (< %.1f); residual unreliable",
                        p_max / width, widths)
        if grid is None:
            logw = np.log(generator.weights) - beta * generator.energies
            P = np.exp(logw - logw.max())
            P /= P.sum()
        else:
            P = canonical_state(grid, params, beta, projection)
        return float(np.abs(generator.generator @ P).sum())
    if isinstance(generator, Lindblad1D):
        if generator.grid.p_max < widths * width:
            log.warning("1D grid reaches %.2f thermal widths (< %.1f); residual unreliable",
                        generator.grid.p_max / width, widths)
        d = generator.apply(canonical_density_matrix(generator.grid, params, beta))
        return float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())
    raise DomainError(f"cannot compute a stationarity residual for {type(generator).__name__}")
