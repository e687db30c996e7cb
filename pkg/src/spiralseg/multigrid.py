"""Full-approximation-scheme multigrid for the competition system on the strip.

The discrete operator, per species ``s`` at interior node ``(j, i)``, is

    N_s(U) = -Delta_strip u_s + beta * exp(-2 y_j) * u_s * sum_{r != s} a_sr u_r

The smoother is a symmetric (forward + backward) nodal Gauss-Seidel sweep that
solves the local ``k x k`` nonlinear system at each node exactly, projected
onto ``u >= 0``.  Exact local solves matter: at large ``beta`` the species at
an interface node are so strongly coupled that a single pass over species per
node stalls the coarse-grid correction.

Levels halve ``n_theta`` (exact nesting, periodic) and take
``(n_y + 1) // 2`` rows, which need not nest; transfers are tensor products of
1-d linear interpolation, so non-nested rows are handled the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .grid import TWO_PI


@numba.njit(cache=True)
def _node_solve(u, nb, f, A, cw, D, k, J, g, un):
    # one projected pass over species gives a nonnegative start
    for s in range(k):
        c = 0.0
        for r in range(k):
            if r != s:
                c += A[s, r] * u[r]
        v = (nb[s] + f[s]) / (D + cw * c)
        u[s] = v if v > 0.0 else 0.0
    if cw == 0.0:
        return
    for _ in range(12):
        gnorm = 0.0
        scale = 0.0
        for s in range(k):
            c = 0.0
            for r in range(k):
                if r != s:
                    c += A[s, r] * u[r]
            g[s] = u[s] * (D + cw * c) - nb[s] - f[s]
            gnorm += abs(g[s])
            scale += abs(nb[s]) + abs(f[s])
            for r in range(k):
                J[s, r] = cw * A[s, r] * u[s] if r != s else D + cw * c
        if gnorm <= 1e-15 * scale + 1e-300:
            return
        # species held at zero by the projection stay there
        for s in range(k):
            if u[s] == 0.0 and g[s] >= 0.0:
                for r in range(k):
                    J[s, r] = 0.0
                J[s, s] = 1.0
                g[s] = 0.0
        du = np.linalg.solve(J, g)
        ok = True
        for s in range(k):
            un[s] = u[s] - du[s]
            if un[s] < 0.0:
                ok = False
        if ok:
            for s in range(k):
                u[s] = un[s]
        else:
            for s in range(k):
                c = 0.0
                for r in range(k):
                    if r != s:
                        c += A[s, r] * u[r]
                v = (nb[s] + f[s]) / (D + cw * c)
                u[s] = v if v > 0.0 else 0.0


@numba.njit(cache=True)
def smooth(U, F, A, beta, w, dt, dy, sweeps):
    k, ny, nt = U.shape
    it2 = 1.0 / dt**2
    iy2 = 1.0 / dy**2
    D = 2.0 * it2 + 2.0 * iy2
    u = np.empty(k)
    nb = np.empty(k)
    f = np.empty(k)
    J = np.empty((k, k))
    g = np.empty(k)
    un = np.empty(k)
    for _ in range(sweeps):
        for direction in range(2):
            for jj in range(1, ny - 1):
                j = jj if direction == 0 else ny - 1 - jj
                cw = beta * w[j]
                for ii in range(nt):
                    i = ii if direction == 0 else nt - 1 - ii
                    ip = i + 1 if i + 1 < nt else 0
                    im = i - 1 if i > 0 else nt - 1
                    for s in range(k):
                        nb[s] = (U[s, j, ip] + U[s, j, im]) * it2 + (U[s, j + 1, i] + U[s, j - 1, i]) * iy2
                        u[s] = U[s, j, i]
                        f[s] = F[s, j, i]
                    _node_solve(u, nb, f, A, cw, D, k, J, g, un)
                    for s in range(k):
                        U[s, j, i] = u[s]


@numba.njit(cache=True)
def apply_operator(U, A, beta, w, dt, dy, out):
    """``out = N(U)`` at interior nodes, zero on the two boundary rows."""
    k, ny, nt = U.shape
    it2 = 1.0 / dt**2
    iy2 = 1.0 / dy**2
    D = 2.0 * it2 + 2.0 * iy2
    for s in range(k):
        for i in range(nt):
            out[s, 0, i] = 0.0
            out[s, ny - 1, i] = 0.0
    for j in range(1, ny - 1):
        cw = beta * w[j]
        for i in range(nt):
            ip = i + 1 if i + 1 < nt else 0
            im = i - 1 if i > 0 else nt - 1
            for s in range(k):
                c = 0.0
                for r in range(k):
                    if r != s:
                        c += A[s, r] * U[r, j, i]
                out[s, j, i] = (D * U[s, j, i]
                                - (U[s, j, ip] + U[s, j, im]) * it2
                                - (U[s, j + 1, i] + U[s, j - 1, i]) * iy2
                                + cw * U[s, j, i] * c)


def _interp_matrix(x_to, x_from, period=None):
    """Dense linear interpolation matrix sampling a function known at ``x_from`` at ``x_to``."""
    n_from = len(x_from)
    h = (period / n_from) if period else (x_from[1] - x_from[0])
    M = np.zeros((len(x_to), n_from))
    for a, x in enumerate(x_to):
        t = x / h
        i0 = int(np.floor(t + 1e-12))
        if not period:
            i0 = min(i0, n_from - 2)
        frac = t - i0
        if abs(frac) < 1e-12:
            M[a, i0 % n_from] = 1.0
        else:
            M[a, i0 % n_from] += 1.0 - frac
            M[a, (i0 + 1) % n_from] += frac
    return M


@dataclass
class Level:
    n_theta: int
    n_y: int
    y_max: float
    # transfers to/from the next coarser level (unset on the coarsest)
    prolong: tuple = field(default=None, repr=False)
    restrict: tuple = field(default=None, repr=False)
    inject: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.dt = TWO_PI / self.n_theta
        self.dy = self.y_max / (self.n_y - 1)
        self.theta = np.arange(self.n_theta) * self.dt
        self.y = np.arange(self.n_y) * self.dy
        self.w = np.exp(-2.0 * self.y)


def build_levels(n_theta, n_y, y_max, coarsest_theta=16, coarsest_y=5):
    levels = [Level(n_theta, n_y, y_max)]
    while levels[-1].n_theta // 2 >= coarsest_theta and (levels[-1].n_y + 1) // 2 >= coarsest_y:
        fine = levels[-1]
        levels.append(Level(fine.n_theta // 2, (fine.n_y + 1) // 2, y_max))
    for fine, coarse in zip(levels[:-1], levels[1:]):
        Py = _interp_matrix(fine.y, coarse.y)
        Pt = _interp_matrix(fine.theta, coarse.theta, TWO_PI)
        fine.prolong = (Py, Pt)
        fine.restrict = (Py.T / Py.T.sum(axis=1, keepdims=True),
                         Pt.T / Pt.T.sum(axis=1, keepdims=True))
        fine.inject = (_interp_matrix(coarse.y, fine.y), _interp_matrix(coarse.theta, fine.theta, TWO_PI))
    return levels


def _tensor(pair, X):
    My, Mt = pair
    return np.einsum("ab,sbc,dc->sad", My, X, Mt, optimize=True)


class FASSolver:
    """V-cycle driver for a fixed grid; the hierarchy is reused across ``beta``."""

    def __init__(self, n_theta, n_y, y_max, pre=4, post=4, coarse_sweeps=50):
        self.levels = build_levels(n_theta, n_y, y_max)
        self.pre, self.post, self.coarse_sweeps = pre, post, coarse_sweeps

    def residual(self, U, A, beta, F=None, level=0):
        lv = self.levels[level]
        out = np.empty_like(U)
        apply_operator(U, A, beta, lv.w, lv.dt, lv.dy, out)
        return (F - out) if F is not None else -out

    def vcycle(self, U, F, A, beta, level=0):
        lv = self.levels[level]
        if level == len(self.levels) - 1:
            smooth(U, F, A, beta, lv.w, lv.dt, lv.dy, self.coarse_sweeps)
            return
        smooth(U, F, A, beta, lv.w, lv.dt, lv.dy, self.pre)
        R = self.residual(U, A, beta, F, level)
        cv = self.levels[level + 1]
        Uc = np.maximum(_tensor(lv.inject, U), 0.0)
        Nc = np.empty_like(Uc)
        apply_operator(Uc, A, beta, cv.w, cv.dt, cv.dy, Nc)
        Fc = Nc + _tensor(lv.restrict, R)
        Fc[:, 0] = 0.0
        Fc[:, -1] = 0.0
        Uc0 = Uc.copy()
        self.vcycle(Uc, Fc, A, beta, level + 1)
        U += _tensor(lv.prolong, Uc - Uc0)
        np.maximum(U, 0.0, out=U)
        smooth(U, F, A, beta, lv.w, lv.dt, lv.dy, self.post)
