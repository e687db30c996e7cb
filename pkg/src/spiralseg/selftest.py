"""Fast synthetic checks of the whole toolchain (no nonlinear solve).

Each check returns ``(name, passed, detail)``.  The constants check compares
against :data:`CONSTANTS_TABLE`; passing a modified table exercises the
failure path.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np

from .grid import Field, StripGrid, build_grid, from_cartesian, strip_laplacian, to_cartesian
from .io import read_field_csv, write_field_csv
from .segregation import zero_curves
from .solver import CompetitionMatrix
from .spectral import alpha_of_matrix, fourier_rows, lambda_of, nice_bad_split, synth_harmonic
from .spiral import equal_angle_check, expansion_field, fit_spiral, vanishing_order
from .traces import count_nodal_arcs, make_sector_traces, validate_nondegeneracy

# (lambda, alpha) in closed form for the three showcase matrices
CONSTANTS_TABLE = {
    "symmetric": (1.0, 0.0),
    "cyclic:4": (64.0, 3.0 * np.log(4.0) / (2.0 * np.pi)),
    "cyclic:10": (1000.0, 3.0 * np.log(10.0) / (2.0 * np.pi)),
}


def check_constants(table=None, rtol: float = 1e-12):
    table = CONSTANTS_TABLE if table is None else table
    worst = 0.0
    for preset, (lam, alpha) in table.items():
        A = CompetitionMatrix.parse(preset, 3)
        worst = max(worst, abs(lambda_of(A) - lam) / lam)
        got = alpha_of_matrix(A)
        worst = max(worst, abs(got - alpha) / abs(alpha) if alpha else abs(got))
    return "constants", worst <= rtol, f"max relative error {worst:.2e}"


def check_coordinate_roundtrip():
    rng = np.random.default_rng(0)
    r = rng.uniform(1e-6, 1.0, 1000)
    t = rng.uniform(0, 2 * np.pi, 1000)
    px, py = r * np.cos(t), r * np.sin(t)
    th, y = from_cartesian(px, py)
    qx, qy = to_cartesian(th, y)
    err = float(max(np.abs(qx - px).max(), np.abs(qy - py).max()))
    return "coordinate roundtrip", err <= 1e-12, f"max error {err:.2e}"


def check_harmonic_residual():
    errs = []
    for n in (64, 128):
        g = StripGrid(n, n, 2.0)
        th, yy = g.mesh()
        v = np.exp(-2 * yy) * np.cos(2 * th + 0.3)
        errs.append(np.abs(strip_laplacian(v, g)).max())
    order = float(np.log2(errs[0] / errs[1]))
    return "strip Laplacian order", order >= 1.8, f"observed order {order:.3f}"


def check_fourier_roundtrip(grid):
    f = synth_harmonic(grid, 0.5, [(3, 1.0, 0.0), (5, 0.0, 0.3)])
    t = fourier_rows(f, grid, 0.5, lifted=True)
    err = max(abs(t.coeffs[3][0] - 1.0), abs(t.coeffs[3][1]), abs(t.coeffs[5][0]),
              abs(t.coeffs[5][1] - 0.3))
    split = nice_bad_split(t)
    ok = err <= 1e-8 and split.e_bad <= 1e-12 and split.k_bar == 3
    return "Fourier roundtrip", ok, f"coefficient error {err:.1e}, E_bad {split.e_bad:.1e}"


def check_spiral_fit():
    y = np.linspace(0, 6, 200)

    class Curve:
        pair = (0, 1)

    c = Curve()
    c.y, c.theta = y, -0.44125 * y + 1.0
    f = fit_spiral(c, 3, (1.0, 5.0))
    err = abs(f.alpha - 0.661875)
    return "spiral fit", err <= 1e-12 and f.residual_rms <= 1e-12, f"alpha error {err:.1e}"


def check_expansion_pipeline(grid):
    alpha = 3.0 * np.log(4.0) / (2.0 * np.pi)
    nu = 1.5 + 2.0 * alpha**2 / 3.0
    U = expansion_field(grid, 3, alpha, nu)
    curves = zero_curves(U, seam_sign=-1.0)
    fits = [fit_spiral(c, 3) for c in curves]
    a_err = max(abs(f.alpha - alpha) / alpha for f in fits)
    o = vanishing_order(U)
    n_err = abs(o.nu - nu) / nu
    ang = equal_angle_check(curves, 2.0, 3)
    ok = len(curves) == 3 and a_err <= 0.01 and n_err <= 0.01 and ang.max_deviation <= 1e-3
    return "expansion pipeline", ok, f"alpha rel err {a_err:.1e}, nu rel err {n_err:.1e}"


def check_traces():
    spec = make_sector_traces(3)
    rep = validate_nondegeneracy(spec)
    arcs = count_nodal_arcs(spec)
    return "trace non-degeneracy", arcs == 3 and rep.min_slope > 1.0, \
        f"{arcs} arcs, min slope {rep.min_slope:.3f}"


def check_field_csv():
    g = StripGrid(16, 4, 1.5)
    vals = np.random.default_rng(1).random(g.shape)
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "f.csv"
        write_field_csv(Field(g, vals), p)
        back = read_field_csv(p)
    ok = back.grid == g and np.array_equal(back.values, vals)
    return "field CSV roundtrip", ok, "bit-exact" if ok else "mismatch"


def run_all(constants_table=None, grid=None):
    grid = build_grid() if grid is None else grid
    checks = [
        lambda: check_constants(constants_table),
        check_coordinate_roundtrip,
        check_harmonic_residual,
        lambda: check_fourier_roundtrip(grid),
        check_spiral_fit,
        lambda: check_expansion_pipeline(grid),
        check_traces,
        check_field_csv,
    ]
    results = []
    for chk in checks:
        t0 = time.perf_counter()
        try:
            name, ok, detail = chk()
        except Exception as exc:  # a crashing check is a failing check
            name, ok, detail = getattr(chk, "__name__", "check"), False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), f"{detail} ({time.perf_counter() - t0:.2f}s)"))
    return results
