"""Diagnostics for (approximately) segregated states.

Covers pairwise overlap, the hat operator, pointwise sign checks of the
differential inequalities defining segregated states, a discrete multiplicity
map, extraction of the interfaces between adjacent species and location of
points where three or more species meet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .grid import TWO_PI, Field, StripGrid, disk_laplacian, to_cartesian
from .solver import CompetitionMatrix


@dataclass
class OverlapMetrics:
    sup: float  # max_{i<j} ||u_i u_j||_inf
    l2: float  # max_{i<j} ||u_i u_j||_L2(disk)
    pair_sup: tuple
    pair_l2: tuple


def overlap_metrics(state, normalize: bool = True) -> OverlapMetrics:
    """Largest pairwise product of densities, sup- and L2-norm over the disk.

    With ``normalize`` the products are divided by the square of the largest
    boundary value, so results do not depend on the trace scale.
    """
    u, grid = state.u, state.grid
    k = u.shape[0]
    scale = float(u[:, 0].max()) ** 2 if normalize else 1.0
    scale = scale if scale > 0 else 1.0
    wts = grid.area_weights()
    best_sup, best_l2 = (0.0, None), (0.0, None)
    for i in range(k):
        for j in range(i + 1, k):
            prod = u[i] * u[j]
            s = float(np.abs(prod).max()) / scale
            l2 = float(np.sqrt((prod**2 * wts).sum())) / scale
            if best_sup[1] is None or s > best_sup[0]:
                best_sup = (s, (i, j))
            if best_l2[1] is None or l2 > best_l2[0]:
                best_l2 = (l2, (i, j))
    return OverlapMetrics(best_sup[0], best_l2[0], best_sup[1], best_l2[1])


def hat_field(state, i: int, A: CompetitionMatrix) -> Field:
    """``u_i - sum_{j != i} (a_ij / a_ji) u_j`` (0-based ``i``)."""
    u = state.u
    out = u[i].copy()
    for j in range(u.shape[0]):
        if j != i:
            out -= A.ratio(i, j) * u[j]
    return Field(state.grid, out, role="signed")


@dataclass
class SignDefects:
    sub: np.ndarray  # per species: max (-Delta u_i)_+
    super: np.ndarray  # per species: max (-Delta hat u_i)_-
    excluded: int  # number of interior nodes left out


def sign_defects(state, A: CompetitionMatrix, exclude=None, y_range=None) -> SignDefects:
    """Pointwise violations of ``-Delta u_i <= 0`` and ``-Delta hat u_i >= 0``.

    The disk Laplacian ``exp(2y) Delta_strip`` is used.  ``exclude`` is an
    optional boolean mask over grid nodes (e.g. a neighbourhood of the
    singular point); ``y_range`` optionally restricts rows.
    """
    grid = state.grid
    k = state.u.shape[0]
    mask = np.ones((grid.n_y - 2, grid.n_theta), dtype=bool)
    if exclude is not None:
        mask &= ~np.asarray(exclude, dtype=bool)[1:-1]
    if y_range is not None:
        yy = grid.y[1:-1]
        mask &= ((yy >= y_range[0]) & (yy <= y_range[1]))[:, None]
    sub = np.zeros(k)
    sup = np.zeros(k)
    lap_u = disk_laplacian(state.u, grid)
    for i in range(k):
        hat = hat_field(state, i, A).values
        lap_hat = disk_laplacian(hat, grid)
        sub[i] = np.max(np.maximum(-lap_u[i], 0.0)[mask], initial=0.0)
        sup[i] = np.max(np.maximum(lap_hat, 0.0)[mask], initial=0.0)
    return SignDefects(sub, sup, int(mask.size - mask.sum()))


@dataclass
class MultiplicityMap:
    grid: StripGrid
    m: np.ndarray  # int, (n_y, n_theta)
    present: np.ndarray  # bool, (k, n_y, n_theta)
    delta: float
    rho: int
    scale: str = "row"


def _disk_footprint(rho: int) -> np.ndarray:
    r = np.arange(-rho, rho + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= rho * rho


def multiplicity_map(state, delta: float | None = None, rho: int = 3,
                     rel_delta: float = 1e-3, scale: str = "row") -> MultiplicityMap:
    """Count species exceeding a presence threshold within ``rho`` cells of each node.

    With ``scale="row"`` (default) the threshold on each row is ``rel_delta``
    times the largest density on that circle, so presence does not depend on
    how fast the densities vanish towards the centre.  With ``scale="global"``
    the threshold is ``delta`` or, if omitted, ``rel_delta`` times the global
    maximum.  Distances are in grid cells of the strip; theta wraps.
    """
    if rho < 2:
        raise ValueError("probe radius must be at least 2 cells")
    if scale not in ("row", "global"):
        raise ValueError(f"unknown threshold scale {scale!r}")
    u = state.u
    if scale == "global":
        if delta is None:
            delta = rel_delta * float(u.max())
        thresh = np.full((u.shape[1], 1), float(delta))
    else:
        delta = rel_delta if delta is None else delta
        thresh = float(delta) * u.max(axis=(0, 2))[:, None]
    if not delta > 0:
        raise ValueError("presence threshold must be positive")
    rho = int(rho)
    fp = _disk_footprint(rho)
    present = np.empty(u.shape, dtype=bool)
    for i in range(u.shape[0]):
        # scipy takes per-axis modes only for separable footprints: wrap theta by hand
        padded = np.pad(u[i] - thresh, ((0, 0), (rho, rho)), mode="wrap")
        mx = ndimage.maximum_filter(padded, footprint=fp, mode="nearest")
        present[i] = mx[:, rho:-rho] > 0.0
    return MultiplicityMap(state.grid, present.sum(axis=0), present, float(delta), rho, scale)


@dataclass
class NodalCurve:
    """Interface between species ``pair`` as a polyline in ``(theta, y)``.

    ``theta`` is unwrapped (continuous, not reduced mod 2pi); points are
    ordered from the boundary circle inward.
    """

    pair: tuple
    theta: np.ndarray
    y: np.ndarray
    partial: bool = False
    fragments: list = field(default_factory=list)

    @property
    def r(self) -> np.ndarray:
        return np.exp(-self.y)

    def cartesian(self):
        return to_cartesian(self.theta, self.y)

    def __len__(self):
        return len(self.y)

    def crossing(self, y0: float) -> float | None:
        """Unwrapped angle where the polyline first crosses depth ``y0``."""
        y, th = self.y, self.theta
        for a in range(len(y) - 1):
            if (y[a] - y0) * (y[a + 1] - y0) <= 0 and y[a] != y[a + 1]:
                t = (y0 - y[a]) / (y[a + 1] - y[a])
                return float(th[a] + t * (th[a + 1] - th[a]))
        hit = np.flatnonzero(y == y0)
        return float(th[hit[0]]) if hit.size else None


def adjacent_pairs(k: int) -> list[tuple[int, int]]:
    """Counterclockwise neighbours ``(i, i+1 mod k)``."""
    return [(i, (i + 1) % k) for i in range(k)]


def pair_signed_field(state, A: CompetitionMatrix, i: int, j: int) -> np.ndarray:
    """``a_ji u_i - a_ij u_j``: harmonic across a clean ``i``/``j`` interface."""
    return A.a[j, i] * state.u[i] - A.a[i, j] * state.u[j]


def _unwrap(theta: np.ndarray) -> np.ndarray:
    if theta.size == 0:
        return theta
    return theta[0] + np.concatenate([[0.0], np.cumsum(
        np.mod(np.diff(theta) + np.pi, TWO_PI) - np.pi)])


def _periodic_contours(vals: np.ndarray, mask, grid: StripGrid, seam_sign: float = 1.0):
    """Zero-contour pieces of a field on the strip, continued across the seam.

    The field is padded with one period on each side, multiplied by
    ``seam_sign`` (``-1`` for fields that flip sign under ``theta -> theta +
    2pi``).  A piece is kept once, by where its shallowest point falls.
    Returns ``(theta, y)`` arrays ordered from the boundary circle inward.
    """
    n = grid.n_theta
    padded = np.concatenate([seam_sign * vals[:, -n:], vals, seam_sign * vals[:, :n]], axis=1)
    pmask = None if mask is None else np.concatenate([mask, mask, mask], axis=1)
    out = []
    for p in measure.find_contours(padded, 0.0, mask=pmask):
        if len(p) < 2:
            continue
        col = p[:, 1] - n
        top = np.argmin(p[:, 0])
        if not (0 <= col[top] < n):
            continue
        if p[0, 0] > p[-1, 0]:
            p, col = p[::-1], col[::-1]
        out.append((col * grid.d_theta, p[:, 0] * grid.dy))
    out.sort(key=lambda f: f[1].min())
    return out


def _chain(pair, frags, grid: StripGrid, max_gap: float) -> NodalCurve:
    if not frags:
        return NodalCurve(pair, np.empty(0), np.empty(0), True, [])
    chain = [frags[0]]
    partial = False
    for th, yy in frags[1:]:
        pth, pyy = chain[-1]
        dth = np.mod(th[0] - pth[-1] + np.pi, TWO_PI) - np.pi
        if np.hypot(dth / grid.d_theta, (yy[0] - pyy[-1]) / grid.dy) > max_gap:
            partial = True
        chain.append((th, yy))
    theta = _unwrap(np.concatenate([c[0] for c in chain]))
    y = np.concatenate([c[1] for c in chain])
    return NodalCurve(pair, theta, y, partial, frags if partial else [])


def extract_nodal_curves(state, A: CompetitionMatrix, delta: float | None = None,
                         rho: int = 3, mmap: MultiplicityMap | None = None,
                         max_gap: float = 2.0) -> list[NodalCurve]:
    """Zero contours of the pair fields, restricted to two-phase cells.

    For each adjacent pair, marching squares runs on ``a_ji u_i - a_ij u_j``
    masked to nodes where exactly species ``i`` and ``j`` are present.
    Pieces are chained from the boundary circle inward; if consecutive pieces
    are more than ``max_gap`` cells apart the curve is flagged ``partial`` and
    all pieces are kept in ``fragments``.
    """
    if mmap is None:
        mmap = multiplicity_map(state, delta, rho)
    curves = []
    for i, j in adjacent_pairs(state.k):
        if state.k == 2 and i > j:
            continue
        sfield = pair_signed_field(state, A, i, j)
        pair_mask = (mmap.m == 2) & mmap.present[i] & mmap.present[j]
        frags = _periodic_contours(sfield, pair_mask, state.grid) if pair_mask.any() else []
        curves.append(_chain((i, j), frags, state.grid, max_gap))
    return curves


def zero_curves(U: Field, seam_sign: float = 1.0, min_length: int = 2) -> list[NodalCurve]:
    """Zero set of one signed field as separate unwrapped curves (``pair=(m,)``)."""
    grid = U.grid
    frags = _periodic_contours(U.values, None, grid, seam_sign)
    return [NodalCurve((m,), _unwrap(th), yy) for m, (th, yy) in
            enumerate(f for f in frags if len(f[1]) >= min_length)]


@dataclass
class Cluster:
    nodes: np.ndarray  # (n, 2) array of (row, col)
    centroid_xy: tuple
    centroid_strip: tuple  # (theta, y); y is inf at the origin
    extent: float
    min_gap_rows: int  # rows between the cluster and the inner truncation circle
    origin_distance: float


@dataclass
class SingularReport:
    clusters: list

    @property
    def found(self) -> bool:
        return bool(self.clusters)

    @property
    def unique(self) -> bool:
        return len(self.clusters) == 1


def _periodic_label(mask: np.ndarray):
    lab, nlab = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if nlab == 0:
        return lab, 0
    parent = list(range(nlab + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    left, right = lab[:, 0], lab[:, -1]
    for r in range(lab.shape[0]):
        for dr in (-1, 0, 1):
            rr = r + dr
            if 0 <= rr < lab.shape[0] and left[r] and right[rr]:
                a, b = find(left[r]), find(right[rr])
                if a != b:
                    parent[max(a, b)] = min(a, b)
    roots = np.array([find(a) for a in range(nlab + 1)])
    uniq = {r: n for n, r in enumerate(sorted(set(roots[1:])), start=1)}
    remap = np.array([0] + [uniq[r] for r in roots[1:]])
    return remap[lab], len(uniq)


def locate_singular_point(mmap: MultiplicityMap) -> SingularReport:
    """Connected clusters of nodes with multiplicity at least 3.

    Centroids are area-weighted in Cartesian coordinates; ``extent`` is the
    largest Cartesian distance between two cluster nodes.
    """
    grid = mmap.grid
    lab, n = _periodic_label(mmap.m >= 3)
    px, py = grid.cartesian_mesh()
    wts = grid.area_weights()
    clusters = []
    for c in range(1, n + 1):
        rows, cols = np.nonzero(lab == c)
        w = wts[rows, cols]
        if w.sum() == 0:
            w = np.ones_like(w)
        cx = float((px[rows, cols] * w).sum() / w.sum())
        cy = float((py[rows, cols] * w).sum() / w.sum())
        rc = np.hypot(cx, cy)
        strip = (float(np.mod(np.arctan2(cy, cx), TWO_PI)), float(-np.log(rc)) if rc > 0 else np.inf)
        pts = np.column_stack([px[rows, cols], py[rows, cols]])
        if len(pts) > 2000:
            from scipy.spatial import ConvexHull, QhullError

            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:  # degenerate (collinear) cluster: keep all points
                pass
        diff = pts[:, None, :] - pts[None, :, :]
        extent = float(np.sqrt((diff**2).sum(-1)).max()) if len(pts) > 1 else 0.0
        clusters.append(Cluster(np.column_stack([rows, cols]), (cx, cy), strip, extent,
                                int(grid.n_y - 1 - rows.max()), float(rc)))
    clusters.sort(key=lambda cl: -len(cl.nodes))
    return SingularReport(clusters)


def cluster_neighbourhood(grid: StripGrid, cluster: Cluster, margin_cells: int = 3) -> np.ndarray:
    """Boolean node mask: Cartesian disk around the cluster centroid covering the
    cluster plus ``margin_cells`` cells at the cluster's outer radius."""
    px, py = grid.cartesian_mesh()
    cx, cy = cluster.centroid_xy
    rows, cols = cluster.nodes[:, 0], cluster.nodes[:, 1]
    dist = np.hypot(px[rows, cols] - cx, py[rows, cols] - cy).max()
    r_out = np.exp(-grid.y[rows.min()])
    radius = dist + margin_cells * r_out * max(grid.d_theta, grid.dy)
    return np.hypot(px - cx, py - cy) <= radius
