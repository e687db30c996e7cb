"""Boundary traces on the unit circle.

Species ``i`` (0-based here, counterclockwise) owns the arc between two
consecutive zeros of ``|cos(h t / 2)|``, centred at ``t = 2 pi i / h``:

    [2 pi i / h - pi / h, 2 pi i / h + pi / h)

so every trace vanishes at both ends of its arc and the sum of the traces is
the continuous, 2pi-periodic profile ``|cos(h t / 2)|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import TWO_PI, StripGrid


class TraceError(ValueError):
    """Invalid trace specification."""


class DegenerateTraceError(TraceError):
    """A zero of the total trace is degenerate (violates non-degeneracy)."""

    def __init__(self, message, locations):
        super().__init__(message)
        self.locations = list(locations)


def cos_profile(h: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: np.abs(np.cos(0.5 * h * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class TraceSpec:
    h: int
    profile: Callable[[np.ndarray], np.ndarray]
    name: str = "cos"

    @property
    def arc_starts(self) -> np.ndarray:
        return TWO_PI * np.arange(self.h) / self.h - np.pi / self.h

    @property
    def zeros(self) -> np.ndarray:
        """Sector boundaries in ``[0, 2pi)``."""
        return np.sort(np.mod(self.arc_starts, TWO_PI))

    def owner(self, theta) -> np.ndarray:
        """Index of the species owning each angle."""
        t = np.mod(np.asarray(theta, dtype=float) + np.pi / self.h, TWO_PI)
        return np.minimum((t * self.h / TWO_PI).astype(int), self.h - 1)

    def evaluate(self, theta, k: int | None = None) -> np.ndarray:
        """Trace values, shape ``(k, len(theta))``; species ``>= h`` get zero."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        k = self.h if k is None else k
        if k < self.h:
            raise TraceError(f"{self.h} traces cannot be assigned to {k} species")
        phi = np.asarray(self.profile(theta), dtype=float)
        own = self.owner(theta)
        out = np.zeros((k, theta.size))
        for i in range(self.h):
            out[i] = np.where(own == i, phi, 0.0)
        return out

    def sample(self, grid: StripGrid, k: int | None = None) -> np.ndarray:
        """Traces on the ``y = 0`` grid row by pointwise evaluation."""
        return self.evaluate(grid.theta, k)


def make_sector_traces(h: int) -> TraceSpec:
    if h < 3:
        raise TraceError(f"a multiple point needs h >= 3 species, got {h}")
    return TraceSpec(int(h), cos_profile(h))


def traces_from_table(h: int, theta, values) -> TraceSpec:
    """Trace spec with a custom profile given as a periodic ``(theta, value)`` table."""
    if h < 3:
        raise TraceError(f"a multiple point needs h >= 3 species, got {h}")
    theta = np.asarray(theta, dtype=float)
    values = np.asarray(values, dtype=float)
    if theta.shape != values.shape or theta.ndim != 1 or theta.size < 2:
        raise TraceError("profile table needs matching 1-d theta and value columns")
    if np.any(values < 0):
        raise TraceError("trace profile must be nonnegative")
    order = np.argsort(np.mod(theta, TWO_PI))
    th, val = np.mod(theta, TWO_PI)[order], values[order]
    return TraceSpec(int(h), lambda t: np.interp(np.mod(t, TWO_PI), th, val, period=TWO_PI), "table")


def read_profile_csv(path, h: int) -> TraceSpec:
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if data.shape[1] != 2:
        raise TraceError(f"{path}: expected two columns (theta, value)")
    return traces_from_table(h, data[:, 0], data[:, 1])


@dataclass
class NondegeneracyReport:
    zeros: np.ndarray
    slopes: np.ndarray
    min_slope: float


def validate_nondegeneracy(spec: TraceSpec, samples: int = 4096, c_min: float = 1e-2,
                           levels: int = 6) -> NondegeneracyReport:
    """Check that every zero of the total trace has a linear lower bound.

    Zeros are the sector boundaries plus any sample where the total trace
    vanishes.  At each zero the one-sided difference quotients
    ``phi(t0 +- s) / s`` are evaluated for ``s = eta / 4^m``, ``m = 0..levels-1``
    with ``eta = 2 pi / samples``; the smallest is the local slope.  Shrinking
    steps are what separate a linear zero from a higher-order one.

    Raises
    ------
    DegenerateTraceError
        If some slope is below ``c_min``; ``locations`` lists the offenders.
    """
    eta = TWO_PI / samples
    t = np.arange(samples) * eta
    total = lambda s: spec.evaluate(s).sum(axis=0)
    phi = total(t)
    scale = max(float(phi.max()), 1e-300)
    extra = t[phi <= 1e-12 * scale]
    # sampled zeros already covered by an exact sector boundary are dropped
    dist = np.abs(np.mod(extra[:, None] - spec.zeros[None, :] + np.pi, TWO_PI) - np.pi)
    zeros = np.sort(np.concatenate([spec.zeros, extra[(dist > 0.5 * eta).all(axis=1)]]))
    base = total(zeros)
    slopes = np.full(zeros.shape, np.inf)
    for m in range(levels):
        step = eta / 4.0**m
        q = (np.minimum(total(zeros + step), total(zeros - step)) - base) / step
        slopes = np.minimum(slopes, q)
    bad = zeros[slopes < c_min]
    if bad.size:
        raise DegenerateTraceError(
            f"degenerate zero(s) of the trace at theta = {np.round(bad[:5], 6).tolist()}", bad
        )
    return NondegeneracyReport(zeros, slopes, float(slopes.min()) if slopes.size else np.inf)


def count_nodal_arcs(spec: TraceSpec, samples: int = 4096) -> int:
    """Number of maximal arcs of the circle on which the total trace is positive."""
    t = np.union1d(np.arange(samples) * TWO_PI / samples, spec.zeros)
    phi = spec.evaluate(t).sum(axis=0)
    pos = phi > 1e-12 * max(float(phi.max()), 1e-300)
    if pos.all():
        return 1
    return int(np.count_nonzero(pos & ~np.roll(pos, 1)))
