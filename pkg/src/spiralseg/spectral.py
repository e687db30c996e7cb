"""Explicit constants of a multiple point and half-plane Fourier analysis.

For species ordered counterclockwise around the multiple point:

* ``lambda_of``: the cycle product ``(a_k1/a_1k) * prod_j a_(j-1)j / a_j(j-1)``;
* ``alpha_of``: ``log(lambda) / (2 pi)``, the spiral twist rate;
* ``predicted_nu``: vanishing order ``h/2 + 2 alpha^2 / h``;
* ``weights_U``: signed weights making ``sum_i w_i u_i`` harmonic away from
  the interface between the last and the first species.

The Fourier part works on functions of the lifted coordinates ``(x, y)``
(``x`` the angle on the universal cover, ``y = -log r``).  A harmonic ``v``
with ``v(x + 2 pi, y) = lambda v(x, y)`` becomes 2pi-periodic after
``w = exp(-alpha x) v`` and then

    w(x, y) = sum_k [a_k cos(k x + alpha y) + b_k sin(k x + alpha y)] exp(-k y),

with ``k`` running over all integers.  Modes ``k >= 0`` decay in ``y``
("nice"), modes ``k < 0`` grow ("bad").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import TWO_PI, Field, StripGrid
from .solver import CompetitionMatrix


class SpectralError(ValueError):
    pass


def _matrix(A) -> np.ndarray:
    return A.a if isinstance(A, CompetitionMatrix) else CompetitionMatrix(A).a


def lambda_of(A) -> float:
    a = _matrix(A)
    k = a.shape[0]
    lam = a[k - 1, 0] / a[0, k - 1]
    for j in range(1, k):
        lam *= a[j - 1, j] / a[j, j - 1]
    return float(lam)


def alpha_of(lam: float) -> float:
    if not lam > 0:
        raise SpectralError(f"lambda must be positive, got {lam}")
    return float(np.log(lam) / TWO_PI)


def alpha_of_matrix(A) -> float:
    return alpha_of(lambda_of(A))


def predicted_nu(h: int, alpha: float) -> float:
    if h < 3:
        raise SpectralError(f"vanishing order is defined for h >= 3, got {h}")
    return h / 2.0 + 2.0 * alpha**2 / h


def weights_U(A) -> np.ndarray:
    a = _matrix(A)
    w = np.ones(a.shape[0])
    for i in range(1, a.shape[0]):
        w[i] = -w[i - 1] * a[i - 1, i] / a[i, i - 1]
    return w


@dataclass(frozen=True)
class SpectralConstants:
    h: int
    lam: float
    alpha: float
    nu: float
    weights: tuple
    doubled: bool
    # constants of the half-plane problem actually analysed (odd h is doubled)
    lam_lift: float
    alpha_lift: float
    n_star: int

    @classmethod
    def from_matrix(cls, A, h: int | None = None) -> "SpectralConstants":
        a = _matrix(A)
        h = a.shape[0] if h is None else h
        lam = lambda_of(a)
        alpha = alpha_of(lam)
        doubled = h % 2 == 1
        lam_lift = lam**2 if doubled else lam
        alpha_lift = alpha_of(lam_lift)
        n_star = h if doubled else h // 2
        return cls(h, lam, alpha, predicted_nu(h, alpha), tuple(weights_U(a)),
                   doubled, lam_lift, alpha_lift, n_star)

    def back_converted(self) -> tuple[float, float]:
        """``(lambda, alpha)`` recovered from the lifted constants."""
        if self.doubled:
            return float(np.sqrt(self.lam_lift)), self.alpha_lift / 2.0
        return self.lam_lift, self.alpha_lift

    def as_rows(self) -> list[tuple[str, float]]:
        rows = [("h", self.h), ("lambda", self.lam), ("alpha", self.alpha), ("nu", self.nu),
                ("doubled", int(self.doubled)), ("lambda_lift", self.lam_lift),
                ("alpha_lift", self.alpha_lift), ("n_star", self.n_star)]
        rows += [(f"w{i + 1}", w) for i, w in enumerate(self.weights)]
        return rows


def build_U(state, weights, delta: float = 0.0) -> Field:
    """Signed density ``w_i u_i`` of the locally dominant species.

    Nodes where every density is ``<= delta`` get 0.  Nodes where the two
    largest densities are both above ``delta`` are counted in
    ``meta["ambiguous"]``; the max rule decides them.
    """
    u = state.u if hasattr(state, "u") else np.asarray(state)
    grid = state.grid
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (u.shape[0],):
        raise SpectralError(f"need {u.shape[0]} weights, got {weights.shape}")
    dom = np.argmax(u, axis=0)
    top = np.take_along_axis(u, dom[None], axis=0)[0]
    vals = weights[dom] * top
    vals[top <= delta] = 0.0
    second = np.sort(u, axis=0)[-2] if u.shape[0] > 1 else np.zeros_like(top)
    ambiguous = int(np.count_nonzero((second > delta) & (top > delta)))
    return Field(grid, vals, role="signed", meta={"ambiguous": ambiguous, "delta": delta})


def harmonic_modes(x, y, alpha: float, modes) -> np.ndarray:
    """Evaluate ``sum e^{alpha x} [a cos(kx + alpha y) + b sin(kx + alpha y)] e^{-ky}``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for k, a, b in modes:
        ph = k * x + alpha * y
        out += (a * np.cos(ph) + b * np.sin(ph)) * np.exp(-k * y)
    return out * np.exp(alpha * x)


def synth_harmonic(grid: StripGrid, alpha: float, modes) -> Field:
    """Sample a lifted harmonic function on the strip nodes (``x`` = grid angle)."""
    th, yy = grid.mesh()
    return Field(grid, harmonic_modes(th, yy, alpha, modes), role="signed",
                 meta={"alpha": alpha, "modes": list(modes)})


@dataclass
class FourierTable:
    """Per-row angular Fourier coefficients of a periodic ``w`` and the fitted modes."""

    y: np.ndarray
    ks: np.ndarray  # FFT indices 0..n/2
    W: np.ndarray  # (n_rows, len(ks)) complex, w = sum_k W_k e^{ikx}
    alpha: float
    row_mean_square: np.ndarray
    coeffs: dict = field(default_factory=dict)  # k in Z -> (a_k, b_k)

    def energy(self, k: int) -> float:
        a, b = self.coeffs.get(k, (0.0, 0.0))
        return a * a + b * b

    def parseval_error(self) -> float:
        """Largest relative mismatch between coefficient energy and row mean square."""
        n = 2 * (len(self.ks) - 1)
        weight = np.full(len(self.ks), 2.0)
        weight[0] = 1.0
        weight[-1] = 1.0 if n % 2 == 0 else 2.0
        energy = (np.abs(self.W) ** 2 * weight).sum(axis=1)
        scale = np.maximum(self.row_mean_square, 1e-300)
        err = np.abs(energy - self.row_mean_square) / scale
        return float(err[self.row_mean_square > 0].max(initial=0.0))


def _seam_ok(w: np.ndarray, rel: float = 10.0) -> np.ndarray:
    """Rows whose wrap-around second differences look like interior ones."""
    d2 = np.abs(np.roll(w, 1, axis=1) - 2 * w + np.roll(w, -1, axis=1))
    interior = d2[:, 1:-1].max(axis=1)
    seam = np.maximum(d2[:, 0], d2[:, -1])
    floor = 1e-12 * np.abs(w).max(axis=1) + 1e-300
    return seam <= rel * interior + floor


def fourier_rows(values, grid: StripGrid, alpha: float, lifted: bool = False,
                 k_max: int | None = None, rows=None) -> FourierTable:
    """Fourier-analyse a periodic ``w`` row by row and fit the mode coefficients.

    ``values`` is ``w`` itself, or ``v`` when ``lifted=True`` (then
    ``w = exp(-alpha x) v`` is formed on the grid angles).  For each index
    ``k >= 0`` the row coefficients ``W_k(y)`` are fitted by least squares to
    ``A_k e^{(k - i alpha) y} + B_k e^{(-k + i alpha) y}``; ``B_k`` gives the
    decaying mode ``k`` and ``conj(A_k)`` the growing mode ``-k``.

    Raises
    ------
    SpectralError
        If a row is not periodic across the seam (the input was not a valid
        ``w``).
    """
    vals = values.values if isinstance(values, Field) else np.asarray(values, dtype=float)
    if vals.shape != grid.shape:
        raise SpectralError(f"field shape {vals.shape} does not match grid {grid.shape}")
    w = vals * np.exp(-alpha * grid.theta)[None, :] if lifted else vals
    rows = np.arange(grid.n_y) if rows is None else np.asarray(rows)
    w = w[rows]
    y = grid.y[rows]
    bad = ~_seam_ok(w)
    if bad.any():
        raise SpectralError(
            f"{int(bad.sum())} row(s) are not 2pi-periodic across the seam "
            f"(first at y={y[bad][0]:.4g}); pass the reduced function w"
        )
    n = grid.n_theta
    W = np.fft.rfft(w, axis=1) / n
    ks = np.arange(W.shape[1])
    table = FourierTable(y, ks, W, alpha, (w**2).mean(axis=1))
    k_max = ks[-1] - 1 if k_max is None else min(k_max, ks[-1] - 1)
    y_top = y.max()
    for k in range(0, k_max + 1):
        Wk = W[:, k]
        if k == 0 and alpha == 0.0:
            # W_0 is constant; a linear-in-y part is not of the lemma's form
            c = Wk.real.mean()
            table.coeffs[0] = (float(c), 0.0)
            continue
        # growing basis normalized at the deepest row so both columns are <= 1
        grow = np.exp((k - 1j * alpha) * (y - y_top))
        decay = np.exp((-k + 1j * alpha) * y)
        M = np.column_stack([grow, decay])
        sol, *_ = np.linalg.lstsq(M, Wk, rcond=None)
        with np.errstate(under="ignore", over="ignore"):
            Ak = sol[0] * np.exp(-(k - 1j * alpha) * y_top)
        Bk = sol[1]
        if k == 0:
            # A_0 and B_0 both describe mode 0 (A_0 = conj B_0 for real w)
            Bk = 0.5 * (Bk + np.conj(Ak))
            table.coeffs[0] = (float(2 * Bk.real), float(-2 * Bk.imag))
            continue
        table.coeffs[k] = (float(2 * Bk.real), float(-2 * Bk.imag))
        Bneg = np.conj(Ak)
        if np.isfinite(Bneg):
            table.coeffs[-k] = (float(2 * Bneg.real), float(-2 * Bneg.imag))
    return table


@dataclass
class NiceBadSplit:
    e_nice: float
    e_bad: float
    k_bar: int | None


def nice_bad_split(table: FourierTable, rel_threshold: float = 1e-6) -> NiceBadSplit:
    """Energy of decaying (``k >= 0``) vs growing (``k < 0``) modes and the first active mode."""
    energies = {k: table.energy(k) for k in table.coeffs}
    e_nice = sum(e for k, e in energies.items() if k >= 0)
    e_bad = sum(e for k, e in energies.items() if k < 0)
    emax = max(energies.values(), default=0.0)
    if emax == 0.0:
        return NiceBadSplit(0.0, 0.0, None)
    active = [k for k, e in energies.items() if e > rel_threshold * emax]
    return NiceBadSplit(e_nice, e_bad, min(active))


def target_form(x, y, n_star: int, alpha: float, a: float = 1.0, b: float = 0.0,
                extra=()) -> np.ndarray:
    """Dominant-mode profile ``[a cos(n x + alpha y) + b sin(n x + alpha y)] e^{alpha x - n y}``.

    ``extra`` adds higher decaying modes ``(k, a_k, b_k)`` with ``k > n_star``.
    """
    return harmonic_modes(x, y, alpha, [(n_star, a, b), *extra])


def interface_gradient_ratio(U: Field, theta_cross: float, row: int, offset: int = 3,
                             span: int = 8) -> float:
    """Ratio of the one-sided angular slopes of ``U`` across an interface on one row.

    Each side gets a quadratic through ``span`` nodes starting ``offset``
    nodes away from the crossing (outside the transition layer); its
    derivative is evaluated at the crossing itself.  Returns
    ``|slope after| / |slope before|`` in counterclockwise order.
    """
    grid = U.grid
    n = grid.n_theta
    tc = float(np.mod(theta_cross, TWO_PI))
    i0 = int(np.floor(tc / grid.d_theta))
    row_vals = U.values[row]
    slopes = []
    for idx in ([i0 - offset - s for s in range(span)], [i0 + 1 + offset + s for s in range(span)]):
        th = grid.d_theta * np.asarray(idx) - tc
        p = np.polyfit(th, row_vals[np.mod(idx, n)], 2)
        slopes.append(p[1])  # derivative at th = 0
    return float(abs(slopes[1]) / abs(slopes[0]))
