"""Two-body interaction form factors ``|t(q)|^2``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["TMatrixModel", "ConstantTMatrix", "GaussianCutoffTMatrix", "make_tmatrix"]


class TMatrixModel:
    """Translation-invariant scattering amplitude as a function of ``|q|``."""

    t0: float

    def squared(self, q):
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantTMatrix(TMatrixModel):
    """Contact interaction, ``|t(q)|^2 = t0^2``."""

    t0: float

    def __post_init__(self):
        if not self.t0 >= 0:
            raise DomainError(f"t0 must be non-negative, got {self.t0!r}")

    def squared(self, q):
        return np.full(np.shape(q), self.t0**2, dtype=float)

    def describe(self):
        return {"model": "constant", "t0": self.t0}


@dataclass(frozen=True)
class GaussianCutoffTMatrix(TMatrixModel):
    """Finite-range interaction, ``|t(q)|^2 = t0^2 exp(-q^2/qc^2)``."""

    t0: float
    qc: float

    def __post_init__(self):
        if not self.t0 >= 0:
            raise DomainError(f"t0 must be non-negative, got {self.t0!r}")
        if not self.qc > 0:
            raise DomainError(f"qc must be positive, got {self.qc!r}")

    def squared(self, q):
        q = np.asarray(q, dtype=float)
        return self.t0**2 * np.exp(-(q / self.qc) ** 2)

    def describe(self):
        return {"model": "gaussian", "t0": self.t0, "qc": self.qc}


def make_tmatrix(model: str, t0: float, qc: float | None = None) -> TMatrixModel:
    key = model.strip().lower()
    if key == "constant":
        return ConstantTMatrix(t0)
    if key in ("gaussian", "gaussian_cutoff", "gaussiancutoff"):
        if qc is None:
            raise DomainError("gaussian t-matrix needs qc")
        return GaussianCutoffTMatrix(t0, qc)
    raise DomainError(f"unknown t-matrix model {model!r}")
