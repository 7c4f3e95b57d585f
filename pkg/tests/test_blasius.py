import numpy as np
import pytest

from layerlab import SimilarityLayer, solve_blasius
from layerlab.blasius import BlasiusError


def rk4_shoot(a, eta_max=12.0, n=6000):
    """Independent coarse Runge-Kutta integration of the layer ODE."""
    h = eta_max / n
    f, fp, fpp = 0.0, 0.0, a

    def rhs(s):
        return np.array([s[1], s[2], -0.5 * s[0] * s[2]])

    s = np.array([f, fp, fpp])
    for _ in range(n):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return s[1] - 1.0


def test_wall_shear_against_independent_oracle(blasius):
    # oracle: bisection on the hand-rolled RK4 integrator
    lo, hi = 0.2, 0.5
    flo = rk4_shoot(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = rk4_shoot(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    oracle = 0.5 * (lo + hi)
    assert blasius.fpp0 == pytest.approx(oracle, abs=5e-6)
    assert blasius.fpp0 == pytest.approx(0.332057, abs=1e-4)


def test_far_field_and_concavity(blasius):
    assert blasius.deriv(np.array([14.0]), 1)[0] == pytest.approx(1.0, abs=1e-9)
    eta = np.linspace(0, 14, 2000)
    assert np.all(blasius.deriv(eta, 2) >= -1e-12)


def test_tolerance_validation():
    with pytest.raises(BlasiusError):
        solve_blasius(1e-3)
    with pytest.raises(BlasiusError):
        solve_blasius(1e-13)


def test_bracket_failure():
    with pytest.raises(BlasiusError):
        solve_blasius(1e-10, bracket=(2.0, 3.0))


def test_similarity_layer_solves_the_layer_equation(blasius):
    for W in (1.0, 2.0):
        lay = SimilarityLayer(blasius, W=W, s0=2.0, L=1.0)
        x = np.linspace(-1, 0, 7)[None, :]
        y = np.linspace(0.1, 8, 9)[:, None]
        res = ((W + lay.u_partial(x, y)) * lay.u_partial(x, y, 1, 0)
               + lay.v_partial(x, y, normalization="wall") * lay.u_partial(x, y, 0, 1)
               - lay.u_partial(x, y, 0, 2))
        assert np.abs(res).max() < 1e-13


def test_similarity_layer_derivative_algebra(blasius):
    lay = SimilarityLayer(blasius, W=1.5, s0=2.0, L=1.0)
    x = np.linspace(-0.9, -0.1, 5)[None, :]
    y = np.linspace(0.2, 6, 7)[:, None]
    h = 1e-6
    for (a, b) in ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2)):
        if a:
            fd = (lay.u_partial(x + h, y, a - 1, b)
                  - lay.u_partial(x - h, y, a - 1, b)) / (2 * h)
        else:
            fd = (lay.u_partial(x, y + h, a, b - 1)
                  - lay.u_partial(x, y - h, a, b - 1)) / (2 * h)
        exact = lay.u_partial(x, y, a, b)
        assert np.abs(fd - exact).max() < 1e-6 * max(1.0, np.abs(exact).max())


def test_displacement_trace(blasius):
    lay = SimilarityLayer(blasius, W=1.0, s0=1.0, L=1.0)
    tr = lay.wall_v_trace(np.array([0.0]))[0]
    assert tr == pytest.approx(-blasius.beta / (2 * np.sqrt(2.0)), abs=1e-9)


def test_eta99(blasius):
    eta99 = blasius.eta_at(0.99)
    assert blasius.deriv(np.array([eta99]), 1)[0] == pytest.approx(0.99, abs=1e-5)
