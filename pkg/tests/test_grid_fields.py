import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerlab import (ChannelGrid, GridError, NormError, NormReport,
                      ScalarField, diff, make_grid, norm_X, quotient,
                      weighted_l2)


def test_make_grid_rejects_regime_violation():
    with pytest.raises(GridError):
        make_grid(1.0, 1.0, 64)
    with pytest.raises(GridError):
        make_grid(0.5, 0.6, 64)


def test_make_grid_rejects_coarse_resolution():
    with pytest.raises(GridError):
        make_grid(1.0, 0.01, 8)


def test_make_grid_layer_spacing():
    g = make_grid(1.0, 0.01, 64)
    assert np.diff(g.x)[-1] <= 0.005          # outlet layer, target eps/2
    g2 = make_grid(0.5, 0.0025, 64)
    assert np.diff(g2.y)[0] <= 0.025          # wall layer, target sqrt(eps)/2
    assert g.x[0] == -1.0 and g.x[-1] == 0.0
    assert g.y[0] == -1.0 and g.y[-1] == 1.0
    assert g.nx <= 8 * 64 and g.ny <= 8 * 64


def test_polynomial_exactness():
    g = make_grid(1.0, 0.01, 48)
    X, Y = g.meshgrid()
    d = diff(ScalarField(g, Y**2), "y", 1)
    assert np.abs(d.values - 2 * Y).max() < 1e-10
    d3 = diff(ScalarField(g, X**3), "x", 3)
    assert np.abs(d3.values - 6.0).max() < 1e-7


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.integers(1, 3))
def test_polynomial_exactness_property(coeffs, order):
    g = make_grid(1.0, 0.01, 32)
    X, _ = g.meshgrid()
    poly = sum(c * X**k for k, c in enumerate(coeffs, start=1))
    d = diff(ScalarField(g, poly), "x", order)
    exact = np.zeros_like(X)
    for k, c in enumerate(coeffs, start=1):
        if k >= order:
            fac = np.prod(np.arange(k, k - order, -1).astype(float))
            exact += c * fac * X ** (k - order)
    scale = max(np.abs(exact).max(), 1.0)
    assert np.abs(d.values - exact).max() < 1e-7 * scale


def test_diff_convergence_on_sine():
    # oracle: analytic second derivative; error drops ~4x per doubling
    errs = []
    for res in (32, 64):
        g = make_grid(1.0, 0.01, res)
        _, Y = g.meshgrid()
        d = diff(ScalarField(g, np.sin(Y)), "y", 2)
        errs.append(np.abs(d.values + np.sin(Y)).max())
    assert errs[1] < errs[0]
    assert errs[0] / errs[1] > 2.5


def test_diff_rejects_bad_order(approx_k0):
    g = make_grid(1.0, 0.01, 32)
    f = ScalarField(g, np.ones(g.shape))
    with pytest.raises(GridError):
        diff(f, "x", 5)


def test_weighted_l2_area():
    g = make_grid(1.0, 0.01, 32)
    f = ScalarField(g, np.ones(g.shape))
    assert weighted_l2(f) == pytest.approx(np.sqrt(2.0), abs=1e-12)
    z = ScalarField(g, np.zeros(g.shape))
    assert weighted_l2(z) == 0.0


def test_weighted_l2_analytic_integral():
    # oracle: int over (-1,0)x(-1,1) of X^2 = 2/3; fine uniform grid for the
    # trapezoid rule to reach the 1e-6 tolerance
    g = ChannelGrid(1.0, 0.01, np.linspace(-1, 0, 1501), np.linspace(-1, 1, 41))
    X, _ = g.meshgrid()
    val = weighted_l2(ScalarField(g, X))
    assert val == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-6)


def test_weighted_l2_rejects_negative_weight():
    g = make_grid(1.0, 0.01, 32)
    f = ScalarField(g, np.ones(g.shape))
    w = ScalarField(g, -np.ones(g.shape))
    with pytest.raises(GridError):
        weighted_l2(f, w)


def test_quadrature_positivity():
    g = make_grid(1.0, 0.01, 32)
    rng = np.random.default_rng(0)
    f = ScalarField(g, rng.standard_normal(g.shape))
    assert weighted_l2(f) > 0


def _clamped_bump(g):
    X, Y = g.meshgrid()
    L = g.L
    return ScalarField(g, (X * (X + L)) ** 2 * (1 - Y**2) ** 2, label="bump")


def test_norm_x_zero_and_identity():
    g = make_grid(1.0, 0.01, 32)
    ua = ScalarField(g, np.broadcast_to(1 - g.meshgrid()[1] ** 2, g.shape).copy())
    z = ScalarField(g, np.zeros(g.shape))
    rep = norm_X(z, ua, 0.01)
    assert rep.x_norm == 0.0
    r2 = NormReport(l2_grad=1.0, l2_hess=0.0, weighted_hess_q=0.0,
                    l2_third=0.0, eps=0.01)
    assert r2.x_norm == 1.0


def test_norm_x_eps_weight_scaling():
    # oracle: the third-derivative weight scales exactly like eps^3; the
    # same smooth bump on the two grids gives a 64 +- 1% ratio
    reps = {}
    for eps in (0.01, 0.0025):
        g = make_grid(1.0, eps, 48)
        phi = _clamped_bump(g)
        ua = ScalarField(g, np.broadcast_to(1 - g.meshgrid()[1] ** 2, g.shape).copy())
        reps[eps] = norm_X(phi, ua, eps)
    ratio = (reps[0.01].eps**3 * reps[0.01].l2_third) / \
        (reps[0.0025].eps**3 * reps[0.0025].l2_third)
    assert ratio == pytest.approx(64.0, rel=0.01)


def test_norm_x_rejects_negative_weight_and_bad_bc():
    g = make_grid(1.0, 0.01, 32)
    phi = _clamped_bump(g)
    bad = ScalarField(g, -np.ones(g.shape))
    with pytest.raises(NormError):
        norm_X(phi, bad, 0.01)
    X, Y = g.meshgrid()
    ua = ScalarField(g, np.broadcast_to(1 - Y**2, g.shape).copy())
    with pytest.raises(NormError):
        norm_X(ScalarField(g, np.ones(g.shape)), ua, 0.01)


def test_quotient_exact_factorization():
    g = make_grid(1.0, 0.01, 48)
    X, Y = g.meshgrid()
    ua = ScalarField(g, (1 - Y**2) * (2 + 0.1 * X))
    q1 = quotient(ScalarField(g, ua.values.copy()), ua)
    assert np.abs(q1.values - 1.0).max() < 1e-8
    phi = ScalarField(g, ua.values * np.sin(X))
    q2 = quotient(phi, ua)
    assert np.abs(q2.values - np.sin(X)).max() < 1e-8


def test_quotient_rejects_interior_zero():
    g = make_grid(1.0, 0.01, 32)
    _, Y = g.meshgrid()
    ua = ScalarField(g, np.abs(Y) + 0.0)   # vanishes along Y=0
    with pytest.raises(NormError):
        quotient(ScalarField(g, np.ones(g.shape)), ua)


def test_quotient_bounded_under_refinement():
    # oracle: wall regularization keeps the quotient bounded when the grid
    # is doubled (no blow-up at the degenerate rows)
    sups = []
    for res in (24, 48):
        g = make_grid(1.0, 0.01, res)
        X, Y = g.meshgrid()
        ua = ScalarField(g, (1 - Y**2) * (1.5 + 0.2 * np.cos(X)))
        rng = np.random.default_rng(7)
        c = rng.standard_normal(3)
        phi = ScalarField(g, (X * (X + 1)) ** 2 * (1 - Y**2) ** 2
                          * (c[0] + c[1] * X + c[2] * Y))
        sups.append(np.abs(quotient(phi, ua).values).max())
    assert sups[1] < 2.0 * sups[0] + 1e-12
