"""Nonnegative solutions of the strongly competing system on the disk.

For species ``i = 1..k`` the system is

    -Delta u_i = -beta * u_i * sum_{j != i} a_ij u_j   in the disk,
    u_i = phi_i                                       on the boundary circle,

discretized on a :class:`~spiralseg.grid.StripGrid` (``u_i = 0`` on the inner
truncation circle).  In strip coordinates the coupling term carries the
conformal factor ``exp(-2y)``.

Two relaxation methods are available:

``"multigrid"`` (default)
    Nonlinear FAS V-cycles with an exact nodal smoother
    (:mod:`spiralseg.multigrid`).
``"species"``
    Gauss-Seidel over species: each ``u_i`` is replaced by the solution of the
    linear screened problem with the competitors frozen.  Robust and simple,
    but the contraction rate tends to 1 as ``beta`` grows.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, StripGrid, strip_laplacian
from .multigrid import FASSolver

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = tuple(10.0**p for p in range(1, 8))


class SolverError(RuntimeError):
    pass


class ScreenedSolveError(SolverError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


class ContinuationError(SolverError):
    def __init__(self, message, beta, state=None, trajectory=None):
        super().__init__(message)
        self.beta = beta
        self.state = state
        self.trajectory = trajectory or []


class MatrixError(ValueError):
    pass


@dataclass(frozen=True)
class CompetitionMatrix:
    """Interspecific competition rates; the diagonal is ignored."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise MatrixError(f"competition matrix must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise MatrixError("need at least two species")
        off = ~np.eye(a.shape[0], dtype=bool)
        if not np.all(np.isfinite(a[off])) or np.any(a[off] <= 0):
            raise MatrixError("off-diagonal competition rates must be finite and > 0")
        np.fill_diagonal(a, 0.0)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def k(self) -> int:
        return self.a.shape[0]

    def ratio(self, i: int, j: int) -> float:
        """``a_ij / a_ji`` (0-based indices)."""
        return float(self.a[i, j] / self.a[j, i])

    def transpose(self) -> "CompetitionMatrix":
        return CompetitionMatrix(self.a.T)

    @classmethod
    def symmetric(cls, k: int, value: float = 1.0) -> "CompetitionMatrix":
        return cls(np.full((k, k), float(value)))

    @classmethod
    def cyclic(cls, k: int, c: float) -> "CompetitionMatrix":
        """``a_ij = c`` when ``j - i = 1 (mod k)``, else 1."""
        a = np.ones((k, k))
        for i in range(k):
            a[i, (i + 1) % k] = c
        return cls(a)

    @classmethod
    def parse(cls, text: str, k: int) -> "CompetitionMatrix":
        """Build from ``"symmetric"``, ``"cyclic:c"`` or rows ``"a,b,c; d,e,f; ..."``."""
        text = text.strip()
        if text == "symmetric":
            return cls.symmetric(k)
        if text.startswith("cyclic:"):
            try:
                c = float(text.split(":", 1)[1])
            except ValueError:
                raise MatrixError(f"bad cyclic preset {text!r}") from None
            return cls.cyclic(k, c)
        try:
            rows = [[float(x) for x in row.split(",")] for row in text.split(";") if row.strip()]
        except ValueError:
            raise MatrixError(f"cannot parse matrix entries {text!r}") from None
        if len(rows) != k or any(len(r) != k for r in rows):
            shape = [len(r) for r in rows]
            raise MatrixError(f"matrix rows have lengths {shape}, expected {k} rows of {k}")
        return cls(np.array(rows, dtype=float))


@dataclass
class SystemState:
    grid: StripGrid
    u: np.ndarray  # (k, n_y, n_theta)
    beta: float = 0.0
    residual: np.ndarray = None
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.u.shape[0]

    def field(self, i: int) -> Field:
        return Field(self.grid, self.u[i], role="species")

    def copy(self) -> "SystemState":
        return replace(self, u=self.u.copy(), history=list(self.history),
                       residual=None if self.residual is None else self.residual.copy())


def initial_state(grid: StripGrid, boundary: np.ndarray) -> SystemState:
    """Zero interior with the given trace rows, shape ``(k, n_theta)``."""
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim != 2 or boundary.shape[1] != grid.n_theta:
        raise SolverError(f"boundary data must have shape (k, {grid.n_theta})")
    if np.any(boundary < 0):
        raise SolverError("species traces must be nonnegative")
    u = np.zeros((boundary.shape[0],) + grid.shape)
    u[:, 0] = boundary
    return SystemState(grid, u)


def competition_sum(u: np.ndarray, A: CompetitionMatrix) -> np.ndarray:
    """``sum_{j != i} a_ij u_j`` for every species, same shape as ``u``."""
    return np.einsum("ij,j...->i...", A.a, u)


def system_defect(u: np.ndarray, grid: StripGrid, A: CompetitionMatrix, beta: float) -> np.ndarray:
    """Max-norm of ``-Delta_strip u_i + exp(-2y) beta u_i sum_j a_ij u_j`` per species."""
    lap = strip_laplacian(u, grid)
    w = np.exp(-2.0 * grid.y[1:-1])[:, None]
    coup = competition_sum(u, A)[:, 1:-1]
    d = -lap + beta * w * u[:, 1:-1] * coup
    return np.abs(d).reshape(u.shape[0], -1).max(axis=1)


# -- linear screened solves ---------------------------------------------------

_DIRECT_LIMIT = 20000


@functools.lru_cache(maxsize=4)
def _neg_laplacian(grid: StripGrid) -> sp.csr_matrix:
    nt, m = grid.n_theta, grid.n_y - 2
    Dt = sp.diags([np.ones(nt - 1), -2.0 * np.ones(nt), np.ones(nt - 1)], [-1, 0, 1], format="lil")
    Dt[0, nt - 1] = 1.0
    Dt[nt - 1, 0] = 1.0
    Dt = Dt.tocsr() / grid.d_theta**2
    Dy = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / grid.dy**2
    return (-(sp.kron(sp.eye(m), Dt) + sp.kron(Dy, sp.eye(nt)))).tocsr()


def solve_screened(grid: StripGrid, potential, boundary, inner=None, tol: float = 1e-10,
                   maxiter: int = 500, x0=None) -> Field:
    """Solve ``(-Delta_strip + exp(-2y) c) u = 0`` with Dirichlet rows.

    Parameters
    ----------
    potential : array, shape ``(n_y, n_theta)`` or ``(n_y - 2, n_theta)``
        Nonnegative disk potential ``c``; only interior rows are used.
    boundary : array, shape ``(n_theta,)``
        Values on the unit circle (row 0).
    inner : array, optional
        Values on the truncation circle; zero by default.

    Small systems are factorized directly; larger ones use conjugate gradients
    preconditioned by smoothed-aggregation AMG, to relative residual ``tol``.
    With nonnegative boundary data the discrete solution is nonnegative
    (M-matrix), and iterative round-off below zero is clipped.
    """
    nt, ny = grid.n_theta, grid.n_y
    boundary = np.asarray(boundary, dtype=float)
    inner = np.zeros(nt) if inner is None else np.asarray(inner, dtype=float)
    c = np.asarray(potential, dtype=float)
    if c.shape == grid.shape:
        c = c[1:-1]
    elif np.ndim(c) == 0:
        c = np.full((ny - 2, nt), float(c))
    if c.shape != (ny - 2, nt):
        raise SolverError(f"potential has shape {np.shape(potential)}")
    if np.any(c < 0):
        raise SolverError("screening potential must be nonnegative")
    u = np.zeros(grid.shape)
    u[0], u[-1] = boundary, inner
    if ny == 2:
        return Field(grid, u, role="species" if u.min() >= 0 else "signed")
    rhs = np.zeros((ny - 2, nt))
    rhs[0] += boundary / grid.dy**2
    rhs[-1] += inner / grid.dy**2
    w = np.exp(-2.0 * grid.y[1:-1])[:, None]
    M = _neg_laplacian(grid) + sp.diags((w * c).ravel())
    b = rhs.ravel()
    if b.size <= _DIRECT_LIMIT:
        x = spla.spsolve(M.tocsc(), b)
    else:
        ml = pyamg.smoothed_aggregation_solver(M, symmetry="symmetric")
        res = []
        x = ml.solve(b, x0=None if x0 is None else np.asarray(x0)[1:-1].ravel(),
                     tol=tol, accel="cg", maxiter=maxiter, residuals=res)
        bnorm = np.linalg.norm(b)
        if bnorm > 0 and np.linalg.norm(b - M @ x) > 10 * tol * bnorm:
            raise ScreenedSolveError(
                f"screened solve did not reach relative residual {tol:g} in {maxiter} iterations",
                np.asarray(res) / bnorm,
            )
    u[1:-1] = x.reshape(ny - 2, nt)
    if boundary.min() >= 0 and inner.min() >= 0:
        np.maximum(u, 0.0, out=u)
        return Field(grid, u, role="species")
    return Field(grid, u, role="signed")


# -- nonlinear relaxation -----------------------------------------------------

@functools.lru_cache(maxsize=2)
def _fas(grid: StripGrid) -> FASSolver:
    return FASSolver(grid.n_theta, grid.n_y, grid.y_max)


def relax_system(state: SystemState, A: CompetitionMatrix, beta: float, tol: float = 1e-8,
                 max_outer: int | None = None, method: str = "multigrid",
                 inner_tol: float = 1e-10) -> SystemState:
    """Relax ``state`` to a solution of the system at competition rate ``beta``.

    Iterates until every species defect (max-norm, strip units) is at most
    ``tol``.  The input is not modified.  If ``max_outer`` iterations do not
    suffice, the last iterate is returned with ``converged=False``.
    """
    if beta < 0:
        raise SolverError("beta must be nonnegative")
    if A.k != state.k:
        raise SolverError(f"matrix is {A.k}x{A.k} but state has {state.k} species")
    grid = state.grid
    u = state.u.copy()
    if u.min() < 0:
        raise SolverError("state has negative densities")
    history = []
    if method == "multigrid":
        max_outer = 200 if max_outer is None else max_outer
        fas = _fas(grid)
        F = np.zeros_like(u)
        a = np.ascontiguousarray(A.a)
        for it in range(1, max_outer + 1):
            fas.vcycle(u, F, a, float(beta))
            d = system_defect(u, grid, A, beta)
            history.append(float(d.max()))
            if d.max() <= tol:
                break
    elif method == "species":
        max_outer = 2000 if max_outer is None else max_outer
        for it in range(1, max_outer + 1):
            for i in range(state.k):
                c = beta * (competition_sum(u, A)[i])
                u[i] = solve_screened(grid, c, u[i, 0], u[i, -1], tol=inner_tol, x0=u[i]).values
            d = system_defect(u, grid, A, beta)
            history.append(float(d.max()))
            if d.max() <= tol:
                break
    else:
        raise SolverError(f"unknown relaxation method {method!r}")
    converged = bool(d.max() <= tol)
    if not converged:
        log.warning("beta=%g: defect %.3e after %d iterations (tol %.1e)", beta, d.max(), it, tol)
    return SystemState(grid, u, float(beta), d, it, converged, history)


def continuation_sweep(grid: StripGrid, A: CompetitionMatrix, traces: np.ndarray,
                       beta_schedule=DEFAULT_SCHEDULE, tol: float = 1e-8,
                       method: str = "multigrid", max_outer: int | None = None,
                       strict: bool = True, callback=None) -> list[SystemState]:
    """Solve along an increasing ``beta`` schedule, warm-starting each step.

    ``traces`` has shape ``(k, n_theta)``.  Returns the full trajectory.  With
    ``strict`` a non-converged step raises :class:`ContinuationError` carrying
    the failing ``beta`` and the trajectory so far.
    """
    schedule = [float(b) for b in beta_schedule]
    if not schedule:
        raise SolverError("empty beta schedule")
    if any(b1 <= b0 for b0, b1 in zip(schedule, schedule[1:])):
        raise SolverError(f"beta schedule must be strictly increasing: {schedule}")
    state = initial_state(grid, traces)
    if A.k != state.k:
        raise SolverError(f"matrix is {A.k}x{A.k} but {state.k} traces were given")
    out = []
    for beta in schedule:
        state = relax_system(state, A, beta, tol=tol, method=method, max_outer=max_outer)
        log.info("beta=%g defect=%.2e iterations=%d", beta, state.residual.max(), state.iterations)
        out.append(state)
        if callback is not None:
            callback(state)
        if strict and not state.converged:
            raise ContinuationError(
                f"no convergence at beta={beta:g} (defect {state.residual.max():.3e})",
                beta, state, out,
            )
    return out
