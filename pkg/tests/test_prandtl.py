import numpy as np
import pytest

from layerlab import LayerError, LayerGrid, SimilarityLayer, solve_prandtl0, solve_prandtl_i
from layerlab.prandtl import blasius_inflow


@pytest.fixture(scope="module")
def layer_setup(blasius):
    grid = LayerGrid(1.0, n_x=201, n_y=241, y_max=14.0)
    W = lambda x: np.ones_like(np.asarray(x, float))
    lay = solve_prandtl0(-1, W, blasius_inflow(blasius, 1.0, 1.0), L=1.0, grid=grid)
    return grid, lay


def test_marching_identity_at_inflow(blasius, layer_setup):
    grid, lay = layer_setup
    inflow = blasius_inflow(blasius, 1.0, 1.0)(grid.y)
    assert np.abs(lay.u[0] - inflow).max() < 1e-10


def test_march_matches_similarity_continuation(blasius, layer_setup):
    # oracle: the exact Blasius similarity continuation of the inflow
    grid, lay = layer_setup
    ana = SimilarityLayer(blasius, W=1.0, s0=1.0, L=1.0)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    assert np.abs(lay.u - ana.u_partial(X, Y)).max() < 5e-5


def test_half_step_oracle(blasius, layer_setup):
    # oracle: re-solve at half the streamwise step; downstream concavity
    grid, lay = layer_setup
    fine = LayerGrid(1.0, n_x=401, n_y=241, y_max=14.0)
    W = lambda x: np.ones_like(np.asarray(x, float))
    lay2 = solve_prandtl0(-1, W, blasius_inflow(blasius, 1.0, 1.0), L=1.0, grid=fine)
    gap = np.abs(lay2.u[::2] - lay.u).max()
    assert gap < 2e-5
    # concavity via the transport identity (low-derivative evaluation)
    u = lay2.u
    ux = lay2.u_table(1, 0)
    uy = lay2.u_table(0, 1)
    vh = lay2.v_hat_table(0, 0)
    uyy = (1.0 + u) * ux + vh * uy
    assert uyy.max() < 1e-6


def test_wall_matching_violation_rejected(layer_setup):
    grid, _ = layer_setup
    bad = lambda y: np.exp(-y)              # u(0) = +1, wall needs -1
    with pytest.raises(LayerError):
        solve_prandtl0(-1, lambda x: np.ones_like(np.asarray(x, float)),
                       bad, L=1.0, grid=grid)


def test_separation_detected(blasius, layer_setup):
    grid, _ = layer_setup
    # strong adverse pressure gradient forces the total velocity to zero
    with pytest.raises(LayerError, match="separation"):
        solve_prandtl0(-1, lambda x: np.ones_like(np.asarray(x, float)),
                       blasius_inflow(blasius, 1.0, 1.0),
                       pressure_gradient=lambda x: 3.0, L=1.0, grid=grid)


def test_monotonicity_and_divergence(layer_setup):
    _, lay = layer_setup
    m0, y0 = lay.monotonicity()
    assert m0 > 0 and y0 > 0
    assert lay.divergence_defect() < 1e-8


def test_tail_invariant(layer_setup):
    _, lay = layer_setup
    sup = np.abs(lay.u).max()
    assert np.abs(lay.u[:, -1]).max() <= 1e-6 * sup


def test_linear_layer_zero_and_linearity(layer_setup):
    grid, lay = layer_setup
    zero = solve_prandtl_i(1, -1, lay, None,
                           lambda x: np.zeros_like(np.asarray(x, float)),
                           inflow=lambda y: np.zeros_like(y), grid=grid)
    assert np.abs(zero.u).max() == 0.0

    f = lambda x, y: np.exp(-np.asarray(y) ** 2) * np.cos(np.asarray(x)) \
        * np.ones(np.broadcast_shapes(np.shape(x), np.shape(y)))
    g1 = lambda x: 0.1 * np.sin(np.pi * np.asarray(x, float)) ** 2
    a = solve_prandtl_i(1, -1, lay, f, g1, grid=grid)
    b = solve_prandtl_i(1, -1, lay, lambda x, y: 2 * f(x, y),
                        lambda x: 2 * g1(x), grid=grid)
    assert np.abs(b.u - 2 * a.u).max() < 1e-10 * np.abs(a.u).max()


def test_linear_layer_manufactured_solution(layer_setup):
    # oracle: manufactured decaying field; residual of the march shrinks
    # with the step sizes
    grid, lay = layer_setup
    rate = 1.2

    def u_star(x, y):
        return np.sin(np.asarray(x)) * np.exp(-rate * np.asarray(y)) \
            * np.ones(np.broadcast_shapes(np.shape(x), np.shape(y)))

    ub = lay.u_table(0, 0)
    ubx = lay.u_table(1, 0)
    uby = lay.u_table(0, 1)
    vb = lay.v_hat_table(0, 0)
    from scipy.interpolate import RectBivariateSpline
    interp = {k: RectBivariateSpline(grid.x, grid.y, t, kx=3, ky=3)
              for k, t in (("ub", ub), ("ubx", ubx), ("uby", uby), ("vb", vb))}

    def forcing(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape).ravel()
        yb = np.broadcast_to(y, shape).ravel()
        us = np.sin(xb) * np.exp(-rate * yb)
        usx = np.cos(xb) * np.exp(-rate * yb)
        usy = -rate * us
        usyy = rate**2 * us
        # v_hat* = -int_0^y u*_x = -cos(x)(1 - e^{-rate y})/rate
        vh = -np.cos(xb) * (1.0 - np.exp(-rate * yb)) / rate
        B = {k: s(xb, yb, grid=False) for k, s in interp.items()}
        val = ((1.0 + B["ub"]) * usx + us * B["ubx"] + B["uby"] * vh
               + B["vb"] * usy - usyy)
        return val.reshape(shape)

    wall = lambda x: u_star(x, 0.0)
    sol = solve_prandtl_i(1, -1, lay, forcing, wall,
                          inflow=lambda y: u_star(-1.0, y), grid=grid)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    err = np.abs(sol.u - u_star(X, Y)).max()
    assert err < 5e-5


def test_background_monotonicity_guard(layer_setup):
    grid, lay = layer_setup
    broken = type(lay)(lay.side, 0, grid, -np.abs(lay.u), lay.wall_trace)
    with pytest.raises(LayerError):
        solve_prandtl_i(1, -1, broken, None,
                        lambda x: np.zeros_like(np.asarray(x, float)), grid=grid)


def test_nondecaying_forcing_rejected(layer_setup):
    grid, lay = layer_setup
    bad = lambda x, y: np.ones(np.broadcast_shapes(np.shape(x), np.shape(y)))
    with pytest.raises(LayerError, match="decay"):
        solve_prandtl_i(1, -1, lay, bad,
                        lambda x: np.zeros_like(np.asarray(x, float)), grid=grid)
