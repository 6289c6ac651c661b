"""Non-restarted GMRES with pluggable preconditioners, plus a dense LU oracle.

Right preconditioning is used throughout: GMRES runs on A P^{-1} and maps the
Krylov solution back through P^{-1}.  This keeps the stopping criterion on the
relative residual of the *original* system, so iteration counts are comparable
across preconditioners.  Orthogonalization is modified Gram-Schmidt with one
full reorthogonalization pass; the least-squares problem is updated with
Givens rotations, whose running residual estimate is exact in exact
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericalError",
    "Preconditioner",
    "SolveReport",
    "gmres",
    "direct_solve",
]


class NumericalError(RuntimeError):
    """A linear-algebra stage failed (singular matrix, breakdown, ...)."""


@dataclass(frozen=True)
class Preconditioner:
    """Right preconditioner P^{-1} in one of three flavours.

    identity:  P^{-1} r = r
    diagonal:  P^{-1} r = r / diag          (diag strictly positive)
    calderon:  P^{-1} r = M^{-1} D M^{-1} r (M the diagonal mass matrix; the
               mass matrix is symmetric so M^{-T} = M^{-1})
    """

    kind: str
    diag: np.ndarray | None = None
    hyper: np.ndarray | None = None
    mass_diag: np.ndarray | None = None

    @classmethod
    def identity(cls) -> "Preconditioner":
        return cls(kind="identity")

    @classmethod
    def diagonal(cls, diag) -> "Preconditioner":
        diag = np.asarray(diag, dtype=float)
        if np.any(diag <= 0.0):
            raise NumericalError("diagonal preconditioner needs strictly positive entries")
        return cls(kind="diagonal", diag=diag)

    @classmethod
    def calderon(cls, mass_diag, hyper) -> "Preconditioner":
        mass_diag = np.asarray(mass_diag, dtype=float)
        hyper = np.asarray(hyper, dtype=float)
        n = len(mass_diag)
        if hyper.shape != (n, n):
            raise NumericalError("hypersingular matrix shape does not match the mass diagonal")
        if np.any(mass_diag == 0.0):
            raise NumericalError("mass diagonal must be invertible")
        return cls(kind="calderon", hyper=hyper, mass_diag=mass_diag)

    def apply(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(r, dtype=float)
        if self.kind == "diagonal":
            return r / self.diag
        if self.kind == "calderon":
            return (self.hyper @ (r / self.mass_diag)) / self.mass_diag
        raise NumericalError(f"unknown preconditioner kind {self.kind!r}")

    def explicit(self, n: int) -> np.ndarray:
        """Dense P^{-1}, for forming the preconditioned operator explicitly."""
        if self.kind == "identity":
            return np.eye(n)
        if self.kind == "diagonal":
            return np.diag(1.0 / self.diag)
        if self.kind == "calderon":
            return self.hyper / np.outer(self.mass_diag, self.mass_diag)
        raise NumericalError(f"unknown preconditioner kind {self.kind!r}")


@dataclass
class SolveReport:
    """Outcome of one GMRES solve."""

    solution: np.ndarray
    iterations: int
    relative_residual_history: list[float]
    converged: bool
    breakdown: bool = False

    @property
    def final_relative_residual(self) -> float:
        return self.relative_residual_history[-1]


def _as_operator(A):
    if callable(A):
        return A
    mat = np.asarray(A, dtype=float)
    return lambda v: mat @ v


def gmres(
    A,
    b,
    tol: float = 1e-8,
    max_iter: int | None = None,
    preconditioner: Preconditioner | None = None,
) -> SolveReport:
    """Full-memory GMRES on A x = b with right preconditioning.

    ``A`` is a square array or a matvec callable.  Stops when the relative
    residual ||b - A x|| / ||b|| drops below ``tol`` (the Givens estimate,
    which for right preconditioning is the true residual up to roundoff; the
    returned history ends with the explicitly recomputed true value).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = len(b)
    apply_A = _as_operator(A)
    prec = preconditioner or Preconditioner.identity()
    if max_iter is None:
        max_iter = n

    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return SolveReport(
            solution=np.zeros(n),
            iterations=0,
            relative_residual_history=[0.0],
            converged=True,
        )

    history = [1.0]  # x0 = 0 always
    if 1.0 <= tol:
        return SolveReport(np.zeros(n), 0, history, True)

    basis = np.zeros((max_iter + 1, n))
    basis[0] = b / norm_b
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    rhs = np.zeros(max_iter + 1)
    rhs[0] = norm_b

    h_scale = 0.0
    breakdown = False
    m = 0
    for j in range(max_iter):
        w = apply_A(prec.apply(basis[j]))
        for i in range(j + 1):
            H[i, j] = basis[i] @ w
            w -= H[i, j] * basis[i]
        for i in range(j + 1):  # one reorthogonalization pass
            corr = basis[i] @ w
            H[i, j] += corr
            w -= corr * basis[i]
        h_next = float(np.linalg.norm(w))
        H[j + 1, j] = h_next
        h_scale = max(h_scale, float(np.max(np.abs(H[: j + 2, j]))))

        # apply accumulated Givens rotations to the new column
        for i in range(j):
            hi, hj = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * hi + sn[i] * hj
            H[i + 1, j] = -sn[i] * hi + cs[i] * hj
        denom = float(np.hypot(H[j, j], H[j + 1, j]))
        if denom <= 1e-14 * max(h_scale, 1e-300):
            # column adds nothing solvable: discard it and stop
            breakdown = True
            break
        cs[j] = H[j, j] / denom
        sn[j] = H[j + 1, j] / denom
        H[j, j] = denom
        H[j + 1, j] = 0.0
        rhs[j + 1] = -sn[j] * rhs[j]
        rhs[j] = cs[j] * rhs[j]

        m = j + 1
        history.append(abs(rhs[j + 1]) / norm_b)
        if history[-1] <= tol:
            break
        if h_next <= 1e-14 * max(h_scale, 1e-300):
            breakdown = True
            break
        basis[j + 1] = w / h_next

    y = np.linalg.solve(
        np.triu(H[:m, :m]), rhs[:m]
    ) if m else np.zeros(0)
    x = prec.apply(basis[:m].T @ y) if m else np.zeros(n)

    true_rel = float(np.linalg.norm(b - apply_A(x)) / norm_b)
    history[-1] = true_rel
    converged = true_rel <= tol
    return SolveReport(
        solution=x,
        iterations=m,
        relative_residual_history=history,
        converged=converged,
        breakdown=breakdown and not converged,
    )


def direct_solve(A, b) -> np.ndarray:
    """Dense LU with partial pivoting; raises NumericalError when singular."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"direct solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError("direct solve produced non-finite entries")
    return x
