"""Fits of the near-centre expansion ``r^nu cos(h theta / 2 - alpha log r)``.

Zero sets of the expansion satisfy ``h theta / 2 - alpha log r = pi/2 + m pi``,
i.e. ``theta = -(2 alpha / h) y + c`` with ``y = -log r``.  A nodal curve
fitted by a line ``theta(y)`` therefore gives ``alpha = -(h/2) dtheta/dy``;
positive ``alpha`` means the curves turn clockwise as ``r`` decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import TWO_PI, Field, StripGrid, from_cartesian

DEFAULT_WINDOW = (1.0, 3.0)


class FitError(ValueError):
    pass


@dataclass
class SpiralFit:
    pair: tuple
    slope: float  # dtheta/dy
    intercept: float
    residual_rms: float  # radians
    window: tuple
    alpha: float
    alpha_se: float
    n_points: int
    non_monotone: bool = False


def _linfit(x, y):
    """Least-squares line with the standard error of the slope."""
    n = len(x)
    X = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    sxx = ((x - x.mean()) ** 2).sum()
    se = np.sqrt((res**2).sum() / (n - 2) / sxx) if n > 2 and sxx > 0 else np.inf
    return float(coef[0]), float(coef[1]), float(np.sqrt((res**2).mean())), float(se)


def fit_spiral(curve, h: int, window=DEFAULT_WINDOW, min_points: int = 10,
               bin_width: float | None = None) -> SpiralFit:
    """Least-squares line ``theta(y)`` through the part of ``curve`` inside ``window``.

    If ``y`` does not increase strictly along the selected points, the curve
    is re-parameterized by ``y``: points are binned (``bin_width``, default
    the median spacing) and ``theta`` is averaged per bin; the result is
    flagged ``non_monotone``.
    """
    y_lo, y_hi = window
    y = np.asarray(curve.y, dtype=float)
    th = np.asarray(curve.theta, dtype=float)
    sel = (y >= y_lo) & (y <= y_hi)
    y, th = y[sel], th[sel]
    if len(y) < min_points:
        raise FitError(f"curve {getattr(curve, 'pair', '?')} has {len(y)} points in "
                       f"window {window}, need {min_points}")
    non_monotone = bool(np.any(np.diff(y) <= 0))
    if non_monotone:
        order = np.argsort(y, kind="stable")
        y, th = y[order], th[order]
        if bin_width is None:
            steps = np.diff(y)
            bin_width = float(np.median(steps[steps > 0])) if np.any(steps > 0) else 1.0
        idx = np.floor((y - y_lo) / bin_width).astype(int)
        keys, inv = np.unique(idx, return_inverse=True)
        y = np.bincount(inv, weights=y) / np.bincount(inv)
        th = np.bincount(inv, weights=th) / np.bincount(inv)
        if len(keys) < min_points:
            raise FitError(f"only {len(keys)} distinct depths in window {window}")
    slope, icpt, rms, se = _linfit(y, th)
    return SpiralFit(tuple(getattr(curve, "pair", ())), slope, icpt, rms, tuple(window),
                     -0.5 * h * slope, 0.5 * h * se, len(y), non_monotone)


def alphas_agree(alphas, ses, abs_floor: float = 0.01, n_se: float = 3.0) -> bool:
    """Pairwise agreement of fitted ``alpha`` within ``max(n_se * combined SE, abs_floor)``."""
    alphas, ses = np.asarray(alphas, dtype=float), np.asarray(ses, dtype=float)
    for a in range(len(alphas)):
        for b in range(a + 1, len(alphas)):
            tol = max(n_se * np.hypot(ses[a], ses[b]), abs_floor)
            if not abs(alphas[a] - alphas[b]) <= tol:
                return False
    return True


@dataclass
class OrderFit:
    nu: float
    intercept: float
    residual: float  # RMS of the log M regression
    window: tuple
    shrunk: bool
    resampled: bool
    n_rows: int


def _values(U):
    return (U.grid, U.values) if isinstance(U, Field) else (None, np.asarray(U))


def circle_maxima(U: Field, center=None, radii=None, n_samples: int | None = None):
    """``M(r) = max |U|`` on circles about ``center``.

    Without a centre (or with the origin) the grid rows are exact circles and
    ``radii`` is ignored.  Otherwise each circle is resampled with bilinear
    interpolation in strip coordinates.
    """
    grid, vals = _values(U)
    if center is None or np.hypot(*center) == 0.0:
        return grid.r, np.abs(vals).max(axis=1)
    cx, cy = center
    radii = grid.r if radii is None else np.asarray(radii, dtype=float)
    n_samples = grid.n_theta if n_samples is None else n_samples
    t = np.arange(n_samples) * TWO_PI / n_samples
    px = cx + radii[:, None] * np.cos(t)[None, :]
    py = cy + radii[:, None] * np.sin(t)[None, :]
    rr = np.hypot(px, py)
    ok = (rr <= 1.0) & (rr >= grid.r_min)
    M = np.full(len(radii), np.nan)
    pad = np.pad(np.abs(vals), ((0, 0), (0, 1)), mode="wrap")
    for a in range(len(radii)):
        if not ok[a].all():
            continue
        th, yy = from_cartesian(px[a], py[a])
        coords = np.vstack([yy / grid.dy, th / grid.d_theta])
        M[a] = ndimage.map_coordinates(pad, coords, order=1, mode="nearest").max()
    return radii, M


def vanishing_order(U: Field, center=None, window=DEFAULT_WINDOW, center_tol: float | None = None,
                    noise_rel: float = 1e-12) -> OrderFit:
    """Slope of ``log M(r)`` against ``log r`` over ``y`` in ``window``.

    ``center`` is the located singular point in Cartesian coordinates.  If it
    lies within ``center_tol`` (default three cells of the innermost row) of
    the origin, grid rows are used; otherwise circles about ``center`` are
    resampled.  Rows with ``M`` below ``noise_rel * max|U|`` are dropped from
    the window, which is then reported as shrunk.
    """
    grid, vals = _values(U)
    resampled = False
    if center is not None:
        tol = 3 * grid.r_min * max(grid.d_theta, grid.dy) if center_tol is None else center_tol
        resampled = bool(np.hypot(*center) > tol)
    r, M = circle_maxima(U, center if resampled else None)
    y = -np.log(r)
    sel = (y >= window[0]) & (y <= window[1]) & np.isfinite(M)
    floor = noise_rel * np.abs(vals).max()
    good = sel & (M > floor)
    shrunk = bool(good.sum() < sel.sum())
    if good.sum() < 3:
        raise FitError(f"fewer than 3 usable circles in window {window}")
    used = (float(y[good].min()), float(y[good].max()))
    slope, icpt, rms, _ = _linfit(y[good], np.log(M[good]))
    return OrderFit(-slope, icpt, rms, used if shrunk else tuple(window), shrunk, resampled,
                    int(good.sum()))


@dataclass
class AngleCheck:
    y_row: float
    crossings: np.ndarray  # sorted, reduced to [0, 2pi)
    gaps: np.ndarray
    max_deviation: float  # radians, vs 2pi/h
    complete: bool


def equal_angle_check(curves, y_row: float, h: int) -> AngleCheck:
    """Angles where the curves cross depth ``y_row`` and their gaps around the circle."""
    cross = [c.crossing(y_row) for c in curves]
    cross = np.sort(np.mod([c for c in cross if c is not None], TWO_PI))
    if len(cross) < 2:
        return AngleCheck(y_row, cross, np.empty(0), np.inf, False)
    gaps = np.diff(np.concatenate([cross, [cross[0] + TWO_PI]]))
    complete = len(cross) >= h
    dev = float(np.abs(gaps - TWO_PI / h).max()) if complete else np.inf
    return AngleCheck(y_row, cross, gaps, dev, complete)


@dataclass
class AmplitudeProfile:
    a_min: float
    a_max: float
    window: tuple

    @property
    def ratio(self) -> float:
        return self.a_max / self.a_min if self.a_min > 0 else np.inf


def amplitude_profile(U: Field, nu: float, center=None, window=DEFAULT_WINDOW) -> AmplitudeProfile:
    """Range of the compensated circle maxima ``M(r) / r^nu`` over ``window``."""
    r, M = circle_maxima(U, center)
    y = -np.log(r)
    sel = (y >= window[0]) & (y <= window[1]) & np.isfinite(M)
    if not sel.any():
        raise FitError(f"no circles in window {window}")
    comp = M[sel] / r[sel] ** nu
    return AmplitudeProfile(float(comp.min()), float(comp.max()), tuple(window))


def expansion_field(grid: StripGrid, h: int, alpha: float, nu: float, amplitude=None) -> Field:
    """Sample ``A(theta) r^nu cos(h theta / 2 - alpha log r)`` on the strip.

    ``amplitude`` is an optional callable of ``theta``.  The sample is taken on
    ``theta`` in ``[0, 2pi)``, so for odd ``h`` or ``alpha != 0`` it has a seam.
    """
    th, yy = grid.mesh()
    vals = np.exp(-nu * yy) * np.cos(0.5 * h * th + alpha * yy)
    if amplitude is not None:
        vals = vals * amplitude(th)
    return Field(grid, vals, role="signed")


@dataclass
class SyntheticCurve:
    pair: tuple
    theta: np.ndarray
    y: np.ndarray

    def crossing(self, y0):
        return float(np.interp(y0, self.y, self.theta)) if self.y[0] <= y0 <= self.y[-1] else None


def expansion_zero_curves(grid: StripGrid, h: int, alpha: float) -> list[SyntheticCurve]:
    """Exact zero curves ``theta = (pi + 2 pi m - 2 alpha y) / h`` sampled on grid rows."""
    y = grid.y
    return [SyntheticCurve((m, (m + 1) % h), (np.pi + TWO_PI * m - 2 * alpha * y) / h, y.copy())
            for m in range(h)]
