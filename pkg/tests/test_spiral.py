from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiralseg.grid import Field, build_grid
from spiralseg.segregation import zero_curves
from spiralseg.spectral import build_U, predicted_nu, weights_U
from spiralseg.spiral import (DEFAULT_WINDOW, FitError, alphas_agree, amplitude_profile,
                              circle_maxima, equal_angle_check, expansion_field,
                              expansion_zero_curves, fit_spiral, vanishing_order)

ALPHA_B = 3 * np.log(4.0) / (2 * np.pi)


def curve(theta, y, pair=(0, 1)):
    return SimpleNamespace(pair=pair, theta=np.asarray(theta, float), y=np.asarray(y, float))


# -- spiral fits -----------------------------------------------------------------

def test_exact_spiral_sample():
    y = np.linspace(0, 8, 400)
    f = fit_spiral(curve(-0.44125 * y + 1.0, y), 3)
    assert f.alpha == pytest.approx(1.5 * 0.44125, abs=1e-12)
    assert f.slope == pytest.approx(-0.44125, abs=1e-12)
    assert f.intercept == pytest.approx(1.0, abs=1e-12)
    assert f.residual_rms < 1e-12 and not f.non_monotone
    assert f.window == DEFAULT_WINDOW and f.n_points >= 10


def test_radial_line_has_zero_alpha():
    y = np.linspace(0, 8, 100)
    assert fit_spiral(curve(np.full_like(y, 2.0), y), 3).alpha == pytest.approx(0.0, abs=1e-14)


def test_clockwise_sign_convention():
    # theta decreasing with depth (clockwise as r shrinks) gives alpha > 0
    y = np.linspace(0, 8, 100)
    assert fit_spiral(curve(1.0 - 0.3 * y, y), 3).alpha > 0
    assert fit_spiral(curve(1.0 + 0.3 * y, y), 3).alpha < 0


def test_twist_matches_log4_over_pi():
    assert abs(2 * ALPHA_B / 3 - np.log(4.0) / np.pi) < 1e-7


@settings(max_examples=100, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-10.0, 10.0), st.integers(3, 8))
def test_noiseless_fit_is_exact(slope, icpt, h):
    y = np.linspace(0.0, 6.0, 120)
    f = fit_spiral(curve(slope * y + icpt, y), h, (1.0, 5.0))
    assert abs(f.slope - slope) <= 1e-12 and f.residual_rms <= 1e-11
    assert f.alpha == pytest.approx(-0.5 * h * slope, abs=1e-11)


def test_non_monotone_curve_is_binned_and_flagged():
    y = np.linspace(0, 6, 300)
    y = np.concatenate([y[:150], y[140:150][::-1], y[150:]])  # short backtrack
    f = fit_spiral(curve(-0.4 * y, y), 3, (1.0, 5.0))
    assert f.non_monotone
    assert f.slope == pytest.approx(-0.4, rel=1e-9)


def test_too_few_points():
    y = np.linspace(0, 8, 12)
    with pytest.raises(FitError):
        fit_spiral(curve(y, y), 3, (1.0, 3.0))


def test_alpha_agreement():
    assert alphas_agree([0.66, 0.661, 0.659], [0.001, 0.001, 0.001])
    assert not alphas_agree([0.66, 0.70], [0.001, 0.001])
    assert alphas_agree([0.66, 0.70], [0.01, 0.01])


# -- vanishing order -----------------------------------------------------------------

@pytest.mark.parametrize("nu, alpha", [(1.5, 0.0), (1.792, 0.6619)])
def test_order_of_synthetic_expansion(nu, alpha):
    g = build_grid(512, 512, 8.0)
    o = vanishing_order(expansion_field(g, 3, alpha, nu))
    assert o.nu == pytest.approx(nu, abs=0.01)
    assert not o.shrunk and not o.resampled and o.window == DEFAULT_WINDOW


def test_default_window_inside_truncation():
    g = build_grid()
    lo, hi = DEFAULT_WINDOW
    assert lo >= 1.0 and hi <= g.y_max - 1.0


def test_order_converges_as_window_deepens():
    g = build_grid(256, 513, 8.0)
    nu = predicted_nu(3, ALPHA_B)
    _, yy = g.mesh()
    # o(r^nu) remainder: main term times (1 + r^{1/2} / 2)
    vals = expansion_field(g, 3, ALPHA_B, nu).values * (1.0 + 0.5 * np.exp(-0.5 * yy))
    U = Field(g, vals, role="signed")
    errs = [abs(vanishing_order(U, window=w).nu - nu) for w in ((0.5, 1.5), (2.0, 3.0), (4.0, 5.0))]
    assert errs[0] > errs[1] > errs[2]


def test_order_window_shrinks_at_noise_floor():
    g = build_grid(64, 257, 8.0)
    vals = expansion_field(g, 3, 0.0, 1.5).values
    vals[g.y > 2.5] = 0.0
    o = vanishing_order(Field(g, vals, role="signed"), window=(1.0, 3.0))
    assert o.shrunk and o.window[1] <= 2.5
    assert o.nu == pytest.approx(1.5, abs=0.01)


def test_off_centre_resampling():
    g = build_grid(512, 512, 8.0)
    c = (0.01, -0.005)
    th, yy = g.mesh()
    px, py = np.exp(-yy) * np.cos(th), np.exp(-yy) * np.sin(th)
    rho = np.hypot(px - c[0], py - c[1])
    phi = np.arctan2(py - c[1], px - c[0])
    U = Field(g, rho**2 * np.cos(2 * phi), role="signed")
    o = vanishing_order(U, center=c, window=(0.5, 2.5))
    assert o.resampled and o.nu == pytest.approx(2.0, abs=0.02)
    assert not vanishing_order(U, center=(0.0, 0.0)).resampled


def test_circle_maxima_rows():
    g = build_grid(64, 33, 4.0)
    r, M = circle_maxima(expansion_field(g, 3, 0.0, 1.5))
    assert np.allclose(M, r**1.5, rtol=1e-3)


# -- equal angles and amplitude ---------------------------------------------------------

def test_equal_angles_exact_rays():
    g = build_grid(64, 33, 4.0)
    chk = equal_angle_check(expansion_zero_curves(g, 3, 0.0), 2.0, 3)
    assert chk.complete and chk.max_deviation == pytest.approx(0.0, abs=1e-14)
    assert chk.crossings == pytest.approx([np.pi / 3, np.pi, 5 * np.pi / 3])


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.0, 4.0))
def test_equal_angles_any_common_slope(alpha, y_row):
    g = build_grid(64, 33, 4.0)
    chk = equal_angle_check(expansion_zero_curves(g, 3, alpha), y_row, 3)
    assert chk.complete and chk.max_deviation < 1e-12


def test_equal_angles_incomplete():
    g = build_grid(64, 33, 4.0)
    chk = equal_angle_check(expansion_zero_curves(g, 3, 0.0)[:2], 2.0, 3)
    assert not chk.complete and chk.max_deviation == np.inf


def test_pipeline_on_sampled_expansion():
    g = build_grid(512, 512, 8.0)
    nu = predicted_nu(3, ALPHA_B)
    curves = zero_curves(expansion_field(g, 3, ALPHA_B, nu), seam_sign=-1.0)
    assert len(curves) == 3
    for c in curves:
        assert fit_spiral(c, 3).alpha == pytest.approx(ALPHA_B, rel=1e-4)
    assert equal_angle_check(curves, 2.0, 3).max_deviation < 1e-3


def test_amplitude_constant():
    g = build_grid(256, 257, 8.0)
    prof = amplitude_profile(expansion_field(g, 3, ALPHA_B, 1.8), 1.8)
    assert prof.a_min == pytest.approx(1.0, abs=0.01) and prof.a_max == pytest.approx(1.0, abs=0.01)


def test_amplitude_winding_bound():
    g = build_grid(256, 257, 8.0)
    U = expansion_field(g, 3, ALPHA_B, 1.8, amplitude=lambda th: np.exp(ALPHA_B * th))
    assert amplitude_profile(U, 1.8).ratio <= np.exp(2 * np.pi * ALPHA_B)


def test_amplitude_requires_window():
    g = build_grid(64, 33, 4.0)
    with pytest.raises(FitError):
        amplitude_profile(expansion_field(g, 3, 0.0, 1.5), 1.5, window=(5.0, 6.0))


def test_simulated_amplitude_bounded(fig1b_run):
    A = fig1b_run.cfg.competition()
    U = build_U(fig1b_run.state, weights_U(A))
    nu = vanishing_order(U).nu
    ratio = amplitude_profile(U, nu).ratio
    assert np.isfinite(ratio) and ratio <= 2 * np.exp(2 * np.pi * ALPHA_B)
