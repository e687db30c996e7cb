"""File formats: field CSV, checkpoints, PGM rasters and analysis tables.

Field CSV layout::

    n_theta,n_y,y_max,role
    512,512,8,species
    <n_theta comma-separated values>     # row y = 0
    ...                                  # n_y rows in total

All floats are written with 17 significant digits so files round-trip
bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .grid import FIELD_ROLES, Field, StripGrid, from_cartesian

FLOAT_FMT = "%.17g"
MANIFEST = "manifest.json"


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path, self.line = str(path), line


def write_field_csv(field: Field, path) -> None:
    g = field.grid
    with open(path, "w", newline="") as fh:
        fh.write("n_theta,n_y,y_max,role\n")
        fh.write(f"{g.n_theta},{g.n_y},{FLOAT_FMT % g.y_max},{field.role}\n")
        np.savetxt(fh, field.values, fmt=FLOAT_FMT, delimiter=",")


def read_field_csv(path) -> Field:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        try:
            head = next(rows)
            meta = next(rows)
        except StopIteration:
            raise FormatError(path, 1, "missing header") from None
        if [h.strip() for h in head[:3]] != ["n_theta", "n_y", "y_max"]:
            raise FormatError(path, 1, f"expected header n_theta,n_y,y_max, got {','.join(head)}")
        try:
            n_theta, n_y, y_max = int(meta[0]), int(meta[1]), float(meta[2])
        except (ValueError, IndexError):
            raise FormatError(path, 2, f"bad grid description {','.join(meta)}") from None
        role = meta[3].strip() if len(meta) > 3 else "species"
        if role not in FIELD_ROLES:
            raise FormatError(path, 2, f"unknown role {role!r}")
        try:
            grid = StripGrid(n_theta, n_y, y_max)
        except ValueError as exc:
            raise FormatError(path, 2, str(exc)) from None
        vals = np.empty(grid.shape)
        j = -1
        for j, row in enumerate(rows):
            line = j + 3
            if j >= n_y:
                raise FormatError(path, line, f"more than {n_y} value rows")
            if len(row) != n_theta:
                raise FormatError(path, line, f"expected {n_theta} values, got {len(row)}")
            try:
                vals[j] = [float(x) for x in row]
            except ValueError:
                raise FormatError(path, line, "non-numeric value") from None
            if not np.all(np.isfinite(vals[j])):
                raise FormatError(path, line, "non-finite value")
        if j + 1 != n_y:
            raise FormatError(path, j + 4, f"expected {n_y} value rows, got {j + 1}")
    try:
        return Field(grid, vals, role=role)
    except ValueError as exc:
        bad = np.flatnonzero((vals < 0).any(axis=1))
        raise FormatError(path, 3 + (int(bad[0]) if bad.size else 0), str(exc)) from None


def save_checkpoint(state, directory, extra: dict | None = None) -> Path:
    """One Field CSV per species plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(state.k):
        name = f"species_{i + 1}.csv"
        write_field_csv(state.field(i), d / name)
        files.append(name)
    manifest = {
        "k": state.k,
        "beta": state.beta,
        "iterations": state.iterations,
        "converged": state.converged,
        "defect": None if state.residual is None else [float(x) for x in state.residual],
        "files": files,
        **(extra or {}),
    }
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return d


def load_checkpoint(directory):
    """Read a checkpoint; returns ``(SystemState, manifest dict)``."""
    from .solver import SystemState

    d = Path(directory)
    mpath = d / MANIFEST
    if not mpath.exists():
        raise FormatError(mpath, 0, "checkpoint manifest not found")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(mpath, exc.lineno, exc.msg) from None
    for key in ("k", "beta", "files"):
        if key not in manifest:
            raise FormatError(mpath, 1, f"manifest lacks {key!r}")
    fields = [read_field_csv(d / f) for f in manifest["files"]]
    if len(fields) != manifest["k"]:
        raise FormatError(mpath, 1, f"manifest lists {len(fields)} files for k={manifest['k']}")
    grid = fields[0].grid
    for f, name in zip(fields, manifest["files"]):
        if f.grid != grid:
            raise FormatError(d / name, 2, "grid differs from the first species file")
    u = np.stack([f.values for f in fields])
    defect = manifest.get("defect")
    state = SystemState(grid, u, float(manifest["beta"]),
                        None if defect is None else np.asarray(defect),
                        int(manifest.get("iterations", 0)), bool(manifest.get("converged", False)))
    return state, manifest


def _to_gray(vals: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    lo = float(vals.min()) if lo is None else lo
    hi = float(vals.max()) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    return np.clip(np.round(255.0 * (vals - lo) / span), 0, 255).astype(np.uint8)


def disk_view(values: np.ndarray, grid: StripGrid, size: int = 512, fill: float = 0.0) -> np.ndarray:
    """Resample a strip field onto a ``size x size`` Cartesian raster of the disk."""
    c = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    px, py = np.meshgrid(c, -c)
    rr = np.hypot(px, py)
    inside = (rr <= 1.0) & (rr >= grid.r_min)
    out = np.full((size, size), fill, dtype=float)
    th, yy = from_cartesian(px[inside], py[inside])
    pad = np.pad(values, ((0, 0), (0, 1)), mode="wrap")
    out[inside] = ndimage.map_coordinates(pad, [yy / grid.dy, th / grid.d_theta], order=1,
                                          mode="nearest")
    return out


def species_bands(u: np.ndarray) -> np.ndarray:
    """Gray-band encoding of the dominant species: band ``i`` spans
    ``[i, i+1) * 256 / k`` and brightness within it follows the density."""
    k = u.shape[0]
    dom = np.argmax(u, axis=0)
    top = np.take_along_axis(u, dom[None], axis=0)[0]
    frac = top / top.max() if top.max() > 0 else top
    return (dom + 0.999 * frac) * (256.0 / k)


def write_pgm(values: np.ndarray, path, lo=None, hi=None) -> None:
    """8-bit binary PGM, min-max scaled unless ``lo``/``hi`` are given."""
    Image.fromarray(_to_gray(np.asarray(values, dtype=float), lo, hi)).save(path, format="PPM")


def write_species_pgm(state, path, view: str = "strip", size: int = 512) -> None:
    vals = species_bands(state.u)
    if view == "disk":
        vals = disk_view(vals, state.grid, size)
    write_pgm(vals, path, 0.0, 255.0)


def read_pgm(path) -> np.ndarray:
    return np.asarray(Image.open(path))


def write_table(path, header, rows) -> None:
    """CSV with full-precision floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([FLOAT_FMT % x if isinstance(x, (float, np.floating)) else x for x in row])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_curve_csv(curve, path) -> None:
    px, py = curve.cartesian()
    write_table(path, ["theta_unwrapped", "y", "r", "px", "py"],
                zip(curve.theta, curve.y, curve.r, px, py))


def write_fourier_csv(table, path) -> None:
    rows = ((y, int(k), table.W[a, b].real, table.W[a, b].imag)
            for a, y in enumerate(table.y) for b, k in enumerate(table.ks))
    write_table(path, ["y", "k", "re_W", "im_W"], rows)


def write_constants_csv(constants, path) -> None:
    write_table(path, ["name", "value"], ((n, float(v)) for n, v in constants.as_rows()))
