"""Galerkin assembly with piecewise constant basis functions.

Entries of all operator matrices reduce to closed-form kernel primitives via
inclusion-exclusion over the four corner time lags of an element pair.  With
elements l = (p, q) and k = (r, s) at spatial distance d = x_l - x_k and any
time antiderivative F of the kernel,

    int_l int_k kernel(d, t - sigma) dsigma dt
        = F2(d, q - r) - F2(d, q - s) - F2(d, p - r) + F2(d, p - s)

where F2 is the second antiderivative.  Causality makes every combination with
nonpositive lag vanish, so entries with q <= r (test element entirely before
the trial element) are exactly zero.

Sign conventions are fixed operationally: the hypersingular matrix is the one
whose symmetric part is positive definite, and the interior representation
formula test pins the remaining signs end to end.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import (
    KernelParams,
    QuadratureError,
    adaptive_quadrature,
    kernel_dx,
    heat_kernel,
    primitive_I0,
    primitive_I1,
    primitive_J0,
    primitive_J1,
)
from .mesh import BoundaryMesh

__all__ = [
    "Problem",
    "QuadratureConfig",
    "DiscreteFlux",
    "OperatorMatrices",
    "assemble_V",
    "assemble_K",
    "assemble_D",
    "assemble_mass",
    "assemble_all",
    "assemble_rhs",
    "initial_dirichlet_moments",
    "initial_neumann_moments",
    "evaluate_interior",
    "second_bie_residual",
    "mass_weighted_norm",
    "project_element_means",
    "write_matrix_text",
]


@dataclass(frozen=True)
class Problem:
    """Dirichlet problem data for the heat equation on (a, b) x (0, T).

    ``g`` and ``u0`` are callables (g(x, t) on the boundary, u0(y) on the
    interval); None means identically zero.  Compatibility of the corner data
    u0(a) = g(a, 0) is checked and warned about, never enforced.
    """

    alpha: float = 1.0
    a: float = 0.0
    b: float = 1.0
    horizon: float = 1.0
    g: object = None
    u0: object = None

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if not self.horizon > 0.0:
            raise ValueError("need T > 0")
        self._check_compatibility()

    def _check_compatibility(self) -> None:
        if self.u0 is None:
            return
        for xc in (self.a, self.b):
            u0c = float(np.asarray(self.u0(xc)))
            gc = 0.0 if self.g is None else float(self.g(xc, 0.0))
            if abs(u0c - gc) > 1e-10 * max(1.0, abs(u0c), abs(gc)):
                warnings.warn(
                    f"initial and boundary data are incompatible at x={xc}: "
                    f"u0={u0c:.3e} vs g={gc:.3e}",
                    stacklevel=3,
                )

    @property
    def params(self) -> KernelParams:
        return KernelParams(alpha=self.alpha)

    def check_mesh(self, mesh: BoundaryMesh) -> None:
        if mesh.interval != (self.a, self.b) or mesh.horizon != self.horizon:
            raise ValueError("mesh geometry does not match the problem data")


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy knobs for the right-hand-side and potential integrals."""

    tol: float = 1e-10
    order: int = 8
    max_order: int = 64
    grading_depth: int = 40  # geometric panels toward each interval endpoint


@dataclass(frozen=True)
class DiscreteFlux:
    """Piecewise constant Neumann datum, one coefficient per element."""

    coefficients: np.ndarray
    mesh: BoundaryMesh

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if self.coefficients.shape != (self.mesh.n_elements,):
            raise ValueError("coefficient count must match the mesh")


@dataclass(frozen=True)
class OperatorMatrices:
    """Dense Galerkin matrices plus the diagonal mass matrix (as a vector)."""

    V: np.ndarray
    K: np.ndarray
    D: np.ndarray
    mass: np.ndarray
    mesh: BoundaryMesh


def _alpha_of(params) -> float:
    if isinstance(params, KernelParams):
        return params.alpha
    return KernelParams(alpha=float(params)).alpha


def _corner_lags(mesh: BoundaryMesh):
    t1 = mesh.t_begin_all
    t2 = mesh.t_end_all
    return (
        t2[:, None] - t1[None, :],
        t2[:, None] - t2[None, :],
        t1[:, None] - t1[None, :],
        t1[:, None] - t2[None, :],
    )


def _corner_sum(primitive, dmat, lags, alpha):
    qr, qs, pr, ps = lags
    return (
        primitive(dmat, qr, alpha)
        - primitive(dmat, qs, alpha)
        - primitive(dmat, pr, alpha)
        + primitive(dmat, ps, alpha)
    )


def assemble_V(mesh: BoundaryMesh, params) -> np.ndarray:
    """Single layer matrix: (1/alpha) double integral of the heat kernel."""
    alpha = _alpha_of(params)
    dmat = mesh.x_all[:, None] - mesh.x_all[None, :]
    return _corner_sum(primitive_J0, dmat, _corner_lags(mesh), alpha) / alpha


def assemble_K(mesh: BoundaryMesh, params) -> np.ndarray:
    """Double layer matrix with kernel (1/alpha) d/dn_y G(x - y, t - s).

    The kernel is odd in d, so same-side entries vanish identically; only the
    cross-side blocks are populated.  d/dn_y G = -n_y dG/dd.
    """
    alpha = _alpha_of(params)
    x = mesh.x_all
    dmat = x[:, None] - x[None, :]
    raw = _corner_sum(primitive_J1, dmat, _corner_lags(mesh), alpha)
    K = (-mesh.normal_all[None, :] / alpha) * raw
    cross = x[:, None] != x[None, :]
    return np.where(cross, K, 0.0)


def assemble_D(mesh: BoundaryMesh, params) -> np.ndarray:
    """Hypersingular matrix via the exact temporal collapse.

    The kernel n_x n_y d2G/dd2 / alpha equals n_x n_y dG/dtau, whose double
    time integral telescopes to first-antiderivative differences; this
    realizes the finite-part value without any numerical regularization.  The
    global sign is the one that makes the symmetric part positive definite.
    """
    alpha = _alpha_of(params)
    dmat = mesh.x_all[:, None] - mesh.x_all[None, :]
    raw = _corner_sum(primitive_I0, dmat, _corner_lags(mesh), alpha)
    return np.outer(mesh.normal_all, mesh.normal_all) * raw


def assemble_mass(mesh: BoundaryMesh) -> np.ndarray:
    """Diagonal of the mass matrix: element sizes (trace sums to 2T)."""
    return mesh.element_sizes.copy()


def assemble_all(mesh: BoundaryMesh, params) -> OperatorMatrices:
    return OperatorMatrices(
        V=assemble_V(mesh, params),
        K=assemble_K(mesh, params),
        D=assemble_D(mesh, params),
        mass=assemble_mass(mesh),
        mesh=mesh,
    )


# ---------------------------------------------------------------------------
# right-hand side and potential evaluation


def _vectorized_handle(f):
    def fv(xs):
        xs = np.asarray(xs, dtype=float)
        try:
            out = np.asarray(f(xs), dtype=float)
            if out.shape == xs.shape:
                return out
        except Exception:
            pass
        return np.array([float(f(x)) for x in np.atleast_1d(xs)], dtype=float)

    return fv


@lru_cache(maxsize=32)
def _graded_breaks(a: float, b: float, depth: int) -> tuple[float, ...]:
    # geometric grading toward both endpoints: resolves kernel layers of
    # width down to (b - a) * 2^-depth
    w = b - a
    left = [a + w * 2.0 ** (-j) for j in range(depth, 0, -1)]
    right = [b - w * 2.0 ** (-j) for j in range(depth, 0, -1)]
    pts = np.unique(np.concatenate([[a], left, right, [b]]))
    return tuple(pts.tolist())


def _composite_nodes(breaks: np.ndarray, order: int):
    xi, wt = np.polynomial.legendre.leggauss(order)
    lo = breaks[:-1]
    hi = breaks[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    ys = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    ws = (half[:, None] * wt[None, :]).ravel()
    return ys, ws


def _spatial_moments(mesh, problem, quad, primitive):
    """int_a^b u0(y) [F(x_l - y, t_l2) - F(x_l - y, t_l1)] dy for every element.

    The time integral is exact (F is the kernel's time antiderivative); the
    y-integral uses a composite Gauss rule graded toward both endpoints, with
    order doubling until the moments stabilize.
    """
    u0 = _vectorized_handle(problem.u0)
    alpha = problem.alpha
    breaks = np.asarray(
        _graded_breaks(problem.a, problem.b, quad.grading_depth)
    )
    t1 = mesh.t_begin_all
    t2 = mesh.t_end_all
    x = mesh.x_all

    def compute(order):
        ys, ws = _composite_nodes(breaks, order)
        d = x[:, None] - ys[None, :]
        win = primitive(d, t2[:, None], alpha) - primitive(d, t1[:, None], alpha)
        return win @ (ws * u0(ys))

    order = quad.order
    prev = compute(order)
    while True:
        order *= 2
        cur = compute(order)
        diff = np.abs(cur - prev)
        if diff.max() <= quad.tol:
            return cur
        if order >= quad.max_order:
            worst = int(np.argmax(diff))
            raise QuadratureError(
                f"initial-datum moment for element {worst} did not stabilize "
                f"to {quad.tol:g} (last change {diff[worst]:g})"
            )
        prev = cur


def initial_dirichlet_moments(mesh, problem, quad=None) -> np.ndarray:
    """<M0 u0, phi_l>: time-integrated initial heat potential on the boundary."""
    if problem.u0 is None:
        return np.zeros(mesh.n_elements)
    quad = quad or QuadratureConfig()
    return _spatial_moments(mesh, problem, quad, primitive_I0)


def initial_neumann_moments(mesh, problem, quad=None) -> np.ndarray:
    """<M1 u0, phi_l>: moments of the normal derivative of the initial potential."""
    if problem.u0 is None:
        return np.zeros(mesh.n_elements)
    quad = quad or QuadratureConfig()
    raw = _spatial_moments(mesh, problem, quad, primitive_I1)
    return mesh.normal_all * raw


def _g_moments(mesh, problem, quad) -> np.ndarray:
    """<(I/2 + K) g, phi_l> for a general boundary datum handle."""
    alpha = problem.alpha
    g = problem.g
    out = np.zeros(mesh.n_elements)
    x = mesh.x_all
    nrm = mesh.normal_all
    t1 = mesh.t_begin_all
    t2 = mesh.t_end_all
    sides = [(problem.a, -1.0), (problem.b, 1.0)]
    for ell in range(mesh.n_elements):
        out[ell] += 0.5 * adaptive_quadrature(
            lambda t: np.asarray(g(x[ell], t), dtype=float) + 0.0 * np.asarray(t),
            t1[ell],
            t2[ell],
            tol=quad.tol,
        )
        for y0, ny in sides:
            if y0 == x[ell]:
                continue  # odd kernel vanishes on the same side
            d = x[ell] - y0

            def integrand(s, d=d, ell=ell):
                s = np.asarray(s, dtype=float)
                win = primitive_I1(d, t2[ell] - s, alpha) - primitive_I1(
                    d, t1[ell] - s, alpha
                )
                return np.asarray(g(y0, s), dtype=float) * win

            out[ell] += (-ny / alpha) * adaptive_quadrature(
                integrand, 0.0, t2[ell], tol=quad.tol
            )
    return out


def assemble_rhs(mesh: BoundaryMesh, problem: Problem, quad=None) -> np.ndarray:
    """Right-hand side <(I/2 + K) g, phi_l> - <M0 u0, phi_l>."""
    problem.check_mesh(mesh)
    quad = quad or QuadratureConfig()
    f = np.zeros(mesh.n_elements)
    if problem.g is not None:
        f += _g_moments(mesh, problem, quad)
    if problem.u0 is not None:
        f -= initial_dirichlet_moments(mesh, problem, quad)
    return f


def evaluate_interior(
    x: float, t: float, flux: DiscreteFlux, problem: Problem, quad=None
) -> float:
    """Representation formula: initial potential + single layer - double layer."""
    if not problem.a < x < problem.b:
        raise ValueError(f"x={x} is not inside ({problem.a}, {problem.b})")
    if not 0.0 < t <= problem.horizon:
        raise ValueError(f"t={t} is not inside (0, {problem.horizon}]")
    quad = quad or QuadratureConfig()
    mesh = flux.mesh
    alpha = problem.alpha

    d = x - mesh.x_all
    single = float(
        np.sum(
            flux.coefficients
            * (
                primitive_I0(d, t - mesh.t_begin_all, alpha)
                - primitive_I0(d, t - mesh.t_end_all, alpha)
            )
        )
    ) / alpha

    initial = 0.0
    if problem.u0 is not None:
        u0 = _vectorized_handle(problem.u0)

        def m0_integrand(y):
            return u0(y) * heat_kernel(x - np.asarray(y, dtype=float), t, alpha)

        # the kernel peaks at y = x; split there so each panel is one-sided
        initial = adaptive_quadrature(
            m0_integrand, problem.a, x, tol=quad.tol
        ) + adaptive_quadrature(m0_integrand, x, problem.b, tol=quad.tol)

    double = 0.0
    if problem.g is not None:
        for y0, ny in ((problem.a, -1.0), (problem.b, 1.0)):

            def dl_integrand(s, y0=y0):
                s = np.asarray(s, dtype=float)
                return np.asarray(problem.g(y0, s), dtype=float) * kernel_dx(
                    x - y0, t - s, alpha
                )

            # -(1/alpha) int dG/dn_y g = +(n_y/alpha) int dG/dd g
            double += (ny / alpha) * adaptive_quadrature(
                dl_integrand, 0.0, t, tol=quad.tol
            )

    return initial + single - double


def project_element_means(mesh: BoundaryMesh, handle, tol: float = 1e-10) -> np.ndarray:
    """Element means of a boundary function handle(x, t); used to discretize g."""
    out = np.empty(mesh.n_elements)
    for ell in range(mesh.n_elements):
        h = mesh.element_sizes[ell]
        out[ell] = adaptive_quadrature(
            lambda t: np.asarray(handle(mesh.x_all[ell], t), dtype=float)
            + 0.0 * np.asarray(t),
            mesh.t_begin_all[ell],
            mesh.t_end_all[ell],
            tol=tol * max(h, 1e-3),
        ) / h
    return out


def second_bie_residual(
    mesh: BoundaryMesh,
    problem: Problem,
    flux: DiscreteFlux,
    matrices: OperatorMatrices | None = None,
    quad=None,
) -> np.ndarray:
    """Galerkin residual of the Neumann-trace identity.

    r[l] = <w_h - M1 u0 - (I/2 + K') w_h - D g, phi_l>, with K' realized as
    the transpose of the assembled K (identical trial and test spaces).  Its
    mass-weighted norm decays under refinement when w_h converges.
    """
    problem.check_mesh(mesh)
    if mesh is not flux.mesh:
        raise ValueError("flux does not live on the given mesh")
    quad = quad or QuadratureConfig()
    if matrices is None:
        matrices = assemble_all(mesh, problem.params)
    w = flux.coefficients
    mass = matrices.mass
    r = 0.5 * mass * w - matrices.K.T @ w
    r -= initial_neumann_moments(mesh, problem, quad)
    if problem.g is not None:
        g_h = project_element_means(mesh, problem.g, tol=quad.tol)
        r -= matrices.D @ g_h
    return r


def mass_weighted_norm(mesh: BoundaryMesh, residual: np.ndarray) -> float:
    """sqrt(r^T M^{-1} r): the L2(Sigma)-equivalent norm of a moment vector."""
    return float(np.sqrt(np.sum(residual * residual / mesh.element_sizes)))


def write_matrix_text(path, array) -> None:
    """Row-major plain-text dump with 17 significant digits (debug contract)."""
    arr = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
