"""Analysis of a solved state: segregation diagnostics, spiral and order fits.

:func:`analyze_state` produces a set of tables (lists of row dicts, exactly
as they are written to CSV) and :func:`evaluate_checks` derives every
pass/fail flag from those tables alone, so flags can be recomputed from an
output directory with :func:`recheck`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .segregation import (cluster_neighbourhood, extract_nodal_curves, locate_singular_point,
                          multiplicity_map, overlap_metrics, sign_defects)
from .spectral import SpectralConstants, build_U
from .spiral import (FitError, alphas_agree, amplitude_profile, equal_angle_check, fit_spiral,
                     vanishing_order)

# acceptance thresholds
ALPHA_ZERO_TOL = 0.05
ALPHA_REL_TOL = 0.20
NU_REL_TOL = 0.10
ANGLE_TOL_DEG = 5.0
OVERLAP_SLACK = 0.05
OVERLAP_FINAL = 1e-4
SIGN_TOL = 1e-6
REFIT_REL_TOL = 0.05
ORIGIN_CELLS = 3

TABLES = ("constants", "fits", "order", "overlap", "sign_defects", "singular", "angles")


@dataclass
class AnalysisReport:
    name: str
    tables: dict
    checks: dict  # name -> (passed, detail)
    entries: list = field(default_factory=list)  # {"name", "value", "op", "window"}
    curves: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def summary_lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, (ok, detail) in self.checks.items()]


def _fit_rows(curves, h, window, label, nu=np.nan, amp=(np.nan, np.nan)):
    rows = []
    for c in curves:
        base = dict(label=label, pair=f"{c.pair[0] + 1}-{c.pair[1] + 1}", partial=int(c.partial),
                    window_lo=window[0], window_hi=window[1], nu_fit=nu, A_min=amp[0], A_max=amp[1])
        try:
            f = fit_spiral(c, h, window)
        except FitError:
            rows.append(dict(base, alpha_fit=np.nan, alpha_se=np.nan, slope=np.nan,
                             intercept=np.nan, residual_rms=np.nan, n_points=0, non_monotone=0))
            continue
        rows.append(dict(base, alpha_fit=f.alpha, alpha_se=f.alpha_se, slope=f.slope,
                         intercept=f.intercept, residual_rms=f.residual_rms, n_points=f.n_points,
                         non_monotone=int(f.non_monotone)))
    return rows


def _order_row(U, center, window, label):
    try:
        o = vanishing_order(U, center, window)
    except FitError:
        return dict(label=label, nu_fit=np.nan, residual=np.nan, window_lo=window[0],
                    window_hi=window[1], shrunk=1, resampled=0, n_rows=0)
    return dict(label=label, nu_fit=o.nu, residual=o.residual, window_lo=o.window[0],
                window_hi=o.window[1], shrunk=int(o.shrunk), resampled=int(o.resampled),
                n_rows=o.n_rows)


def _fits_for(state, A, cfg, delta, window, label, U, center):
    mm = multiplicity_map(state, delta, cfg.rho, scale=cfg.threshold_scale)
    curves = extract_nodal_curves(state, A, mmap=mm)
    order = _order_row(U, center, window, label)
    amp = (np.nan, np.nan)
    if np.isfinite(order["nu_fit"]):
        try:
            ap = amplitude_profile(U, order["nu_fit"], center if order["resampled"] else None, window)
            amp = (ap.a_min, ap.a_max)
        except FitError:
            pass
    return mm, curves, _fit_rows(curves, cfg.h, window, label, order["nu_fit"], amp), order


def analyze_state(state, cfg, trajectory=None) -> AnalysisReport:
    """Run the segregation and spiral diagnostics on ``state``."""
    A = cfg.competition()
    grid = state.grid
    const = SpectralConstants.from_matrix(A, cfg.h)
    U = build_U(state, const.weights)

    mm = multiplicity_map(state, cfg.delta, cfg.rho, scale=cfg.threshold_scale)
    sing = locate_singular_point(mm)
    center = sing.clusters[0].centroid_xy if sing.found else None
    origin_tol = ORIGIN_CELLS * grid.r_min * max(grid.d_theta, grid.dy)

    _, curves, fits, order = _fits_for(state, A, cfg, cfg.delta, cfg.fit_window, "main", U, center)
    _, _, refits, reorder = _fits_for(state, A, cfg, cfg.delta, cfg.refit_window, "refit", U, center)
    _, _, dfits, dorder = _fits_for(state, A, cfg, 2 * cfg.delta, cfg.fit_window, "delta2", U, center)

    exclude = cluster_neighbourhood(grid, sing.clusters[0]) if sing.found else None
    sd = sign_defects(state, A, exclude=exclude)
    scale = float(state.u[:, 0].max()) or 1.0

    lo, hi = cfg.fit_window
    angle_rows = []
    for y_row in (lo, 0.5 * (lo + hi), hi):
        ac = equal_angle_check(curves, y_row, cfg.h)
        for g_i, gap in enumerate(ac.gaps):
            angle_rows.append(dict(y_row=y_row, gap_index=g_i, gap=gap,
                                   deviation=abs(gap - 2 * np.pi / cfg.h), complete=int(ac.complete)))
        if not ac.gaps.size:
            angle_rows.append(dict(y_row=y_row, gap_index=-1, gap=np.nan, deviation=np.nan, complete=0))

    traj = trajectory if trajectory else [state]
    overlap_rows = []
    for st in traj:
        om = overlap_metrics(st)
        overlap_rows.append(dict(beta=st.beta, sup=om.sup, l2=om.l2))

    tables = {
        "constants": [dict(name=n, value=float(v)) for n, v in const.as_rows()]
        + [dict(name="origin_tol", value=origin_tol)],
        "fits": fits + refits + dfits,
        "order": [order, reorder, dorder],
        "overlap": overlap_rows,
        "sign_defects": [dict(species=i + 1, sub=sd.sub[i] / scale, super=sd.super[i] / scale,
                              excluded=sd.excluded) for i in range(state.k)],
        "singular": [dict(cluster=n + 1, theta=cl.centroid_strip[0], y=cl.centroid_strip[1],
                          px=cl.centroid_xy[0], py=cl.centroid_xy[1], extent=cl.extent,
                          n_nodes=len(cl.nodes), origin_distance=cl.origin_distance)
                     for n, cl in enumerate(sing.clusters)],
        "angles": angle_rows,
    }
    tables = {k: [_stringify(r) for r in v] for k, v in tables.items()}
    entries = _entries(tables, cfg)
    return AnalysisReport(cfg.name, tables, evaluate_checks(tables), entries, curves)


def _stringify(row: dict) -> dict:
    return {k: (io.FLOAT_FMT % v if isinstance(v, (float, np.floating)) else str(v)) for k, v in row.items()}


_PRODUCERS = {
    "fits": "fit_spiral", "order": "vanishing_order", "overlap": "overlap_metrics",
    "sign_defects": "sign_defects", "singular": "locate_singular_point",
    "angles": "equal_angle_check", "constants": "SpectralConstants.from_matrix",
}


def _entries(tables, cfg):
    out = []
    for tname, rows in tables.items():
        for r in rows:
            window = [float(r["window_lo"]), float(r["window_hi"])] if "window_lo" in r else None
            if window is None and tname == "angles":
                window = [float(r["y_row"]), float(r["y_row"])]
            for key, val in r.items():
                try:
                    num = float(val)
                except ValueError:
                    continue
                tag = ":".join(str(r[k]) for k in ("label", "pair", "name", "species", "beta", "cluster") if k in r)
                out.append(dict(table=tname, row=str(tag), name=key, value=num,
                                op=_PRODUCERS[tname], window=window))
    return out


def _f(rows, key):
    return np.array([float(r[key]) for r in rows])


def _alpha_ok(alpha, alpha_th):
    if not np.all(np.isfinite(alpha)) or alpha.size == 0:
        return False
    if alpha_th == 0.0:
        return bool(np.all(np.abs(alpha) <= ALPHA_ZERO_TOL))
    return bool(np.all(np.abs(alpha - alpha_th) <= ALPHA_REL_TOL * abs(alpha_th))
                and np.all(np.sign(alpha) == np.sign(alpha_th)))


def _stable(a, b, theory):
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))) or a.size != b.size or a.size == 0:
        return False
    if theory == 0.0:
        return bool(np.all(np.abs(a - b) <= ALPHA_ZERO_TOL))
    return bool(np.all(np.abs(a - b) <= REFIT_REL_TOL * np.abs(a)))


def evaluate_checks(tables: dict) -> dict:
    """Pass/fail flags computed only from the exported tables."""
    const = {r["name"]: float(r["value"]) for r in tables["constants"]}
    h, alpha_th, nu_th = int(const["h"]), const["alpha"], const["nu"]
    by = lambda label: [r for r in tables["fits"] if r["label"] == label]
    main, refit, d2 = by("main"), by("refit"), by("delta2")
    orders = {r["label"]: float(r["nu_fit"]) for r in tables["order"]}
    alpha = _f(main, "alpha_fit")
    checks = {}

    n_ok = sum(1 for r in main if int(r["n_points"]) > 0)
    checks["nodal_curves"] = (n_ok == h, f"{n_ok} fitted curves, expected {h}")
    checks["alpha"] = (_alpha_ok(alpha, alpha_th),
                       f"alpha_fit {np.round(alpha, 4).tolist()} vs theory {alpha_th:.6f}")

    agree = bool(np.all(np.isfinite(alpha))) and alphas_agree(alpha, _f(main, "alpha_se"))
    checks["alpha_agreement"] = (agree, f"spread {np.ptp(alpha) if alpha.size else np.nan:.4g}")
    nu = orders.get("main", np.nan)
    checks["nu"] = (bool(abs(nu - nu_th) <= NU_REL_TOL * nu_th),
                    f"nu_fit {nu:.4f} vs theory {nu_th:.6f}")

    sing = tables["singular"]
    checks["singular_unique"] = (len(sing) == 1, f"{len(sing)} cluster(s) with m >= 3")
    if sing:
        dist = float(sing[0]["origin_distance"])
        checks["singular_centered"] = (dist <= const["origin_tol"],
                                       f"centroid {dist:.3g} from origin, tolerance {const['origin_tol']:.3g}")
    else:
        checks["singular_centered"] = (False, "no cluster")

    ang = tables["angles"]
    dev = _f(ang, "deviation")
    complete = all(int(r["complete"]) for r in ang)
    max_dev = float(np.degrees(np.nanmax(dev))) if dev.size and np.isfinite(dev).any() else np.inf
    checks["equal_angles"] = (complete and max_dev <= ANGLE_TOL_DEG, f"max deviation {max_dev:.3f} deg")

    ov = _f(tables["overlap"], "sup")
    mono = bool(np.all(ov[1:] <= (1 + OVERLAP_SLACK) * ov[:-1]))
    checks["overlap_trend"] = (mono and ov.size > 0 and ov[-1] <= OVERLAP_FINAL,
                               f"final {ov[-1] if ov.size else np.nan:.3g}, non-increasing={mono}")

    sd = tables["sign_defects"]
    worst = max(float(r[k]) for r in sd for k in ("sub", "super"))
    checks["sign_defects"] = (worst <= SIGN_TOL, f"max {worst:.3g} away from the singular cluster")

    re_alpha = _f(refit, "alpha_fit")
    nu_re = orders.get("refit", np.nan)
    checks["refit_stable"] = (_stable(alpha, re_alpha, alpha_th)
                              and abs(nu_re - nu) <= REFIT_REL_TOL * nu,
                              f"alpha {np.round(re_alpha, 4).tolist()}, nu {nu_re:.4f} on refit window")
    d_alpha = _f(d2, "alpha_fit")
    nu_d = orders.get("delta2", np.nan)
    checks["delta_insensitive"] = (_stable(alpha, d_alpha, alpha_th)
                                   and abs(nu_d - nu) <= REFIT_REL_TOL * nu,
                                   f"alpha {np.round(d_alpha, 4).tolist()} with doubled delta")
    return {k: (bool(ok), det) for k, (ok, det) in checks.items()}


def write_report(report: AnalysisReport, out_dir, state=None) -> Path:
    """Write all tables, curves, rasters and ``report.json`` into ``out_dir``."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, rows in report.tables.items():
        header = list(rows[0].keys()) if rows else ["empty"]
        io.write_table(d / f"{name}.csv", header, ([r[k] for k in header] for r in rows))
    for c in report.curves:
        io.write_curve_csv(c, d / f"curve_{c.pair[0] + 1}-{c.pair[1] + 1}.csv")
    if state is not None:
        io.write_species_pgm(state, d / "species_strip.pgm")
        io.write_species_pgm(state, d / "species_disk.pgm", view="disk")
        mm = multiplicity_map(state)
        io.write_pgm(mm.m, d / "multiplicity.pgm", 0.0, float(state.k))
    io.write_table(d / "checks.csv", ["check", "passed", "detail"],
                   ((n, int(ok), det) for n, (ok, det) in report.checks.items()))
    (d / "report.json").write_text(json.dumps(
        dict(name=report.name, passed=report.passed,
             checks={n: dict(passed=ok, detail=det) for n, (ok, det) in report.checks.items()},
             entries=report.entries), indent=1))
    return d


def recheck(out_dir) -> dict:
    """Recompute the pass/fail flags from the CSVs in ``out_dir``."""
    d = Path(out_dir)
    tables = {}
    for name in TABLES:
        rows = io.read_table(d / f"{name}.csv")
        tables[name] = [r for r in rows if "empty" not in r]
    return evaluate_checks(tables)
