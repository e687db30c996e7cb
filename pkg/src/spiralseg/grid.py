"""Log-polar discretization of the unit disk.

The disk minus the origin is parametrized by strip coordinates (theta, y) with
``r = exp(-y)``.  Node ``(j, i)`` of a :class:`StripGrid` sits at
``theta_i = i * d_theta`` and ``y_j = j * dy``; arrays are stored with shape
``(n_y, n_theta)`` so that row ``j`` is the circle of radius ``exp(-y_j)``.
Row 0 is the unit circle, row ``n_y - 1`` the inner truncation circle.

Because the map is conformal, ``Delta_disk = exp(2y) * Delta_strip``, so the
disk equation ``-Delta u = f`` becomes ``-(u_tt + u_yy) = exp(-2y) f`` on the
strip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

FIELD_ROLES = ("species", "signed", "potential")


class GridError(ValueError):
    """Invalid grid parameters or mismatched field shapes."""


@dataclass(frozen=True)
class StripGrid:
    n_theta: int
    n_y: int
    y_max: float

    def __post_init__(self):
        if self.n_theta < 16 or self.n_theta % 2:
            raise GridError(f"n_theta must be even and >= 16, got {self.n_theta}")
        if self.n_y < 2:
            raise GridError(f"n_y must be >= 2, got {self.n_y}")
        if not self.y_max > 0:
            raise GridError(f"y_max must be positive, got {self.y_max}")

    @property
    def d_theta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def dy(self) -> float:
        return self.y_max / (self.n_y - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_y, self.n_theta)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.d_theta

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n_y) * self.dy

    @property
    def r(self) -> np.ndarray:
        return np.exp(-self.y)

    @property
    def r_min(self) -> float:
        return float(np.exp(-self.y_max))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(theta, y)`` node coordinates, each of shape ``(n_y, n_theta)``."""
        th, yy = np.meshgrid(self.theta, self.y)
        return th, yy

    def cartesian_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        th, yy = self.mesh()
        return to_cartesian(th, yy)

    def area_weights(self) -> np.ndarray:
        """Disk area element ``r^2 dtheta dy`` per node (trapezoid in y)."""
        w = np.exp(-2.0 * self.y) * self.d_theta * self.dy
        w[[0, -1]] *= 0.5
        return np.broadcast_to(w[:, None], self.shape).copy()

    def row_index(self, y: float) -> int:
        """Nearest grid row to depth ``y``."""
        return int(np.clip(np.rint(y / self.dy), 0, self.n_y - 1))


@dataclass
class Field:
    """Sampled scalar function on a strip grid.

    ``role`` is one of ``"species"`` (a nonnegative density), ``"signed"``
    (e.g. the weighted sum of densities) or ``"potential"``.
    """

    grid: StripGrid
    values: np.ndarray
    role: str = "species"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if self.role not in FIELD_ROLES:
            raise GridError(f"unknown field role {self.role!r}")
        if self.role == "species" and self.values.min() < 0:
            raise GridError("species density field has negative values")


def build_grid(n_theta: int = 512, n_y: int = 512, y_max: float = 8.0) -> StripGrid:
    return StripGrid(int(n_theta), int(n_y), float(y_max))


def to_cartesian(theta, y):
    """Map strip coordinates to the punctured disk: ``(e^-y cos t, e^-y sin t)``."""
    r = np.exp(-np.asarray(y, dtype=float))
    return r * np.cos(theta), r * np.sin(theta)


def from_cartesian(px, py):
    """Inverse of :func:`to_cartesian` with ``theta`` in ``[0, 2pi)``.

    Raises
    ------
    GridError
        If any point is the origin or lies outside the closed unit disk.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    r = np.hypot(px, py)
    if np.any(r == 0):
        raise GridError("the origin has no strip coordinates (log singularity)")
    if np.any(r > 1.0 + 1e-12):
        raise GridError("point outside the closed unit disk")
    theta = np.mod(np.arctan2(py, px), TWO_PI)
    # mod can round 2pi - tiny up to exactly 2pi
    theta = np.where(theta >= TWO_PI, 0.0, theta)
    y = np.maximum(-np.log(r), 0.0)
    if theta.ndim == 0:
        return float(theta), float(y)
    return theta, y


def disk_laplacian_rhs_factor(grid: StripGrid) -> Field:
    """Per-node factor ``exp(-2y)`` relating disk sources to strip sources."""
    fac = np.exp(-2.0 * grid.y)
    return Field(grid, np.broadcast_to(fac[:, None], grid.shape).copy(), role="potential")


def strip_laplacian(values: np.ndarray, grid: StripGrid) -> np.ndarray:
    """Five-point ``u_tt + u_yy`` at interior rows, shape ``(n_y - 2, n_theta)``.

    The theta direction wraps periodically; rows 0 and ``n_y - 1`` are
    boundary rows and carry no equation.
    """
    u = np.asarray(values, dtype=float)
    if u.shape[-2:] != grid.shape:
        raise GridError(f"array shape {u.shape} does not match grid {grid.shape}")
    mid = u[..., 1:-1, :]
    u_tt = (np.roll(mid, 1, axis=-1) - 2.0 * mid + np.roll(mid, -1, axis=-1)) / grid.d_theta**2
    u_yy = (u[..., 2:, :] - 2.0 * mid + u[..., :-2, :]) / grid.dy**2
    return u_tt + u_yy


def disk_laplacian(values: np.ndarray, grid: StripGrid) -> np.ndarray:
    """Discrete disk Laplacian ``exp(2y) * Delta_strip`` at interior rows."""
    return np.exp(2.0 * grid.y[1:-1])[:, None] * strip_laplacian(values, grid)
