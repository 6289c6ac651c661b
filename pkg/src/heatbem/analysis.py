"""Condition numbers, discretization errors, and convergence rates."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .galerkin import DiscreteFlux
from .krylov import NumericalError
from .mesh import Side
from .reference import SineSeries

__all__ = [
    "StudyRecord",
    "condition_number",
    "l2_error",
    "eoc",
    "ellipticity_margin",
]


@dataclass
class StudyRecord:
    """One refinement level of a convergence/conditioning study.

    Condition numbers carry both conventions: the plain fields are the
    singular-value ratio, the ``*_eig`` fields the eigenvalue-modulus ratio
    of the same explicitly formed matrix.  Entries are None when the stage
    was skipped (preconditioner not requested, N above the kappa cap).
    """

    level: int
    n_elements: int
    l2_error: float
    eoc: float | None = None
    kappa_V: float | None = None
    kappa_diag_prec: float | None = None
    kappa_calderon_prec: float | None = None
    kappa_V_eig: float | None = None
    kappa_diag_prec_eig: float | None = None
    kappa_calderon_prec_eig: float | None = None
    iters_none: int | None = None
    iters_diag: int | None = None
    iters_calderon: int | None = None


def condition_number(A, method: str = "sv") -> float:
    """Condition number of a dense matrix.

    method="sv": ratio of extreme singular values; method="eig": ratio of
    extreme eigenvalue moduli.  Raises NumericalError when the matrix is
    singular to working precision.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    if method == "sv":
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= 1e-14 * s[0]:
            raise NumericalError("matrix is numerically singular (sv ratio > 1e14)")
        return float(s[0] / s[-1])
    if method == "eig":
        ev = np.abs(np.linalg.eigvals(A))
        lo, hi = float(ev.min()), float(ev.max())
        if lo <= 1e-14 * hi:
            raise NumericalError("matrix is numerically singular (eig ratio > 1e14)")
        return hi / lo
    raise ValueError(f"unknown convention {method!r}")


def l2_error(flux: DiscreteFlux, reference: SineSeries, gauss_order: int = 8) -> float:
    """Element-wise Gauss quadrature of ||w_ref - w_h||_{L2(Sigma)}."""
    mesh = flux.mesh
    xi, wt = np.polynomial.legendre.leggauss(gauss_order)
    total = 0.0
    nl = mesh.n_left
    for i in range(mesh.n_elements):
        side = Side.LEFT if i < nl else Side.RIGHT
        h = mesh.element_sizes[i]
        ts = mesh.t_begin_all[i] + 0.5 * (xi + 1.0) * h
        diff = reference.flux(side, ts) - flux.coefficients[i]
        total += 0.5 * h * float(np.dot(wt, diff * diff))
    return math.sqrt(total)


def eoc(errors) -> list[float]:
    """Estimated orders of convergence log2(err_{k-1} / err_k).

    Nonpositive errors yield NaN entries (flagged with a warning) rather than
    aborting the study.
    """
    errors = [float(e) for e in errors]
    out = []
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev <= 0.0 or cur <= 0.0:
            warnings.warn("eoc undefined for nonpositive errors", stacklevel=2)
            out.append(float("nan"))
        else:
            out.append(math.log2(prev / cur))
    return out


def ellipticity_margin(A) -> float:
    """Smallest eigenvalue of the symmetric part (A + A^T)/2."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    return float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
