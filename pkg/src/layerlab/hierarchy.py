"""Alternating wall-layer / Euler-corrector construction.

Level 0 balances the background slip at the walls; each Euler corrector
cancels the vertical wall trace left by the previous layer; each higher
layer cancels the tangential trace of its corrector and absorbs the
collected lower-order momentum defects through explicit forcing terms.
Desk-scale truncations up to two half-orders carry exact forcing
derivations (including the auxiliary layer pressure that the vertical
momentum balance generates); deeper truncations are out of scope.

Sign conventions: each wall is handled in half-plane variables
(x, y) = (X, (1 - s Y) / sqrt(eps)) for wall side s in {-1, +1}; vertical
quantities flip by sigma_y = -s when mapped to the channel.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RectBivariateSpline, make_interp_spline

from .calculus import CutoffFunction, smoothstep_c4
from .blasius import SimilarityLayer, solve_blasius
from .euler import EulerError, solve_linearized_euler
from .prandtl import (LayerError, LayerGrid, PrandtlLayer, blasius_inflow,
                      exponential_bump_inflow, solve_prandtl0, solve_prandtl_i)

MAX_HALF_ORDERS = 15
SUPPORTED_HALF_ORDERS = 2


class HierarchyError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# flow components: everything exposes partials of (u, v) to total order 3
# ---------------------------------------------------------------------------

class BackgroundComponent:
    def __init__(self, flow):
        self.flow = flow

    def partial(self, comp, a, b, X, Y):
        fn = self.flow.u if comp == "u" else self.flow.v
        return fn(X, Y, a, b)


class CorrectorComponent:
    def __init__(self, corrector, weight):
        self.corrector = corrector
        self.weight = float(weight)

    def partial(self, comp, a, b, X, Y):
        return self.weight * self.corrector.eval(comp, a, b, X, Y)


class WallLayerComponent:
    """Cut-off wall layer: u gets w_u * chi * u_layer, v gets
    sigma_y * w_v * chi * v_layer (channel normalization of the layer)."""

    def __init__(self, layer, eps, weight_u, weight_v, chi):
        self.layer = layer
        self.eps = float(eps)
        self.w_u = float(weight_u)
        self.w_v = float(weight_v)
        self.chi = chi
        self.s = layer.side
        self.sigma = -layer.side

    def _zeta(self, Y):
        return 1.0 - self.s * np.asarray(Y, dtype=float)

    def partial(self, comp, a, b, X, Y):
        zeta = self._zeta(Y)
        yl = zeta / np.sqrt(self.eps)
        x = np.asarray(X, dtype=float)
        kind = "u" if comp == "u" else ("v_hat" if self.layer.final else "v_dec")
        w = self.w_u if comp == "u" else self.w_v * self.sigma
        out = 0.0
        from math import comb
        for j in range(b + 1):
            chi_j = self.chi(zeta) if j == 0 else self.chi.derivative(zeta, j)
            F = self.layer.eval(kind, a, b - j, x, yl)
            out = out + comb(b, j) * chi_j * self.eps ** (-(b - j) / 2.0) * F
        return w * (-self.s) ** b * out


class CompensatorComponent:
    """Divergence closure of the cut-off: u gets
    -w_v * chi'(zeta) * int_0^X v_layer dx'."""

    def __init__(self, layer, eps, weight_v, chi):
        self.layer = layer
        self.eps = float(eps)
        self.w_v = float(weight_v)
        self.chi = chi
        self.s = layer.side

    @property
    def _vkind(self):
        return "v_hat" if self.layer.final else "v_dec"

    def partial(self, comp, a, b, X, Y):
        if comp != "u":
            return np.zeros(np.broadcast_shapes(np.shape(X), np.shape(Y)))
        zeta = 1.0 - self.s * np.asarray(Y, dtype=float)
        yl = zeta / np.sqrt(self.eps)
        x = np.asarray(X, dtype=float)
        from math import comb
        out = 0.0
        for j in range(b + 1):
            chi_j = self.chi.derivative(zeta, j + 1)
            if a == 0:
                G = self._int_v(x, yl, b - j)
            else:
                G = self.layer.eval(self._vkind, a - 1, b - j, x, yl)
            out = out + comb(b, j) * chi_j * self.eps ** (-(b - j) / 2.0) * G
        return -self.w_v * (-self.s) ** b * out

    def _int_v(self, x, y, by):
        if self.layer.analytic is not None:
            norm = "wall" if self.layer.final else "decay"
            return self.layer.analytic.int_v_from_zero(x, y, by, normalization=norm)
        # modest fixed quadrature; only sampled deep in the cut-off zone
        n = 21
        xs = np.linspace(0.0, 1.0, n)
        Xb, Yb = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        ts = Xb[..., None] * xs
        vals = self.layer.eval(self._vkind, 0, by, ts, Yb[..., None])
        w = np.full(n, 1.0)
        w[0] = w[-1] = 0.5
        return (vals * w).sum(axis=-1) * (Xb / (n - 1))


class CompositeFlow:
    """Sum of components with a common partial-derivative interface."""

    def __init__(self, components):
        self.components = list(components)

    def partial(self, comp, a, b, X, Y):
        out = np.zeros(np.broadcast_shapes(np.shape(X), np.shape(Y)))
        for c in self.components:
            out = out + c.partial(comp, a, b, X, Y)
        return out

    def curl_residual(self, X, Y, eps):
        """u d/dX(u_Y - v_X) + v d/dY(u_Y - v_X) - eps Lap(u_Y - v_X)."""
        p = lambda c, a, b: self.partial(c, a, b, X, Y)
        om = lambda a, b: p("u", a, b + 1) - p("v", a + 1, b)
        return (p("u", 0, 0) * om(1, 0) + p("v", 0, 0) * om(0, 1)
                - eps * (om(2, 0) + om(0, 2)))

    def divergence(self, X, Y):
        return self.partial("u", 1, 0, X, Y) + self.partial("v", 0, 1, X, Y)


# ---------------------------------------------------------------------------
# per-side trace bundles of corrector partials (half-plane sign mapping)
# ---------------------------------------------------------------------------

class _SideTraces:
    def __init__(self, corrector, side):
        self.corr = corrector
        self.s = side
        self.sigma = -side

    def u(self, x, a=0, b=0):
        """sigma^b-mapped trace of the corrector's u partial at the wall."""
        x = np.asarray(x, dtype=float)
        return self.sigma ** b * self.corr.eval("u", a, b, x, np.full_like(x, float(self.s)))


def _side_profile(Y, lo, hi):
    """Gentlest corner-compatible side data: linear between the wall values.

    Any steeper blend (e.g. a plateau vanishing mid-channel) imprints
    corner adjustment zones on the corrector whose gradients cascade into
    the higher layers; the linear profile keeps every corrector field at
    the scale of the wall data itself.
    """
    Y = np.asarray(Y, dtype=float)
    return lo * 0.5 * (1.0 - Y) + hi * 0.5 * (1.0 + Y)


# ---------------------------------------------------------------------------
# hierarchy assembly
# ---------------------------------------------------------------------------

class CorrectorHierarchy:
    """Half-order ladder of Euler correctors and wall layers.

    ``evaluator`` exposes the assembled correction (u_p, v_p) plus the
    background, i.e. the full profile pair (u_a, v_a), through
    ``partial(comp, a, b, X, Y)``.
    """

    def __init__(self, flow, eps, K_a, layers, correctors, chi, L,
                 pressures=None, meta=None):
        self.flow = flow
        self.eps = float(eps)
        self.K_a = int(K_a)
        self.layers = layers          # {side: [PrandtlLayer, ...]}
        self.correctors = correctors  # [EulerCorrector at half-order i >= 1]
        self.chi = chi
        self.L = float(L)
        self.pressures = pressures or {}
        self.meta = dict(meta or {})
        self.evaluator = self._build_evaluator()
        self.correction = self._build_evaluator(include_background=False)

    def _build_evaluator(self, include_background=True):
        comps = []
        if include_background:
            comps.append(BackgroundComponent(self.flow))
        sq = np.sqrt(self.eps)
        for i, corr in enumerate(self.correctors, start=1):
            comps.append(CorrectorComponent(corr, sq**i))
        for side in (-1, 1):
            for i, layer in enumerate(self.layers[side]):
                comps.append(WallLayerComponent(layer, self.eps, sq**i,
                                                sq ** (i + 1), self.chi))
                comps.append(CompensatorComponent(layer, self.eps,
                                                  sq ** (i + 1), self.chi))
        return CompositeFlow(comps)

    # -- diagnostics ---------------------------------------------------------
    def wall_trace_sup(self, n=201):
        """(sup |u_a|, sup |v_a|) over both walls."""
        xs = np.linspace(-self.L, 0.0, n)
        wu = wv = 0.0
        for s in (-1, 1):
            tr = self.evaluator.partial("u", 0, 0, xs, np.full_like(xs, float(s)))
            wu = max(wu, float(np.abs(tr).max()))
            vtr = self.evaluator.partial("v", 0, 0, xs, np.full_like(xs, float(s)))
            wv = max(wv, float(np.abs(vtr).max()))
        return wu, wv

    def wall_shear_signs(self, n=201):
        xs = np.linspace(-self.L, 0.0, n)
        lo = self.evaluator.partial("u", 0, 1, xs, np.full_like(xs, -1.0))
        hi = self.evaluator.partial("u", 0, 1, xs, np.full_like(xs, 1.0))
        return float(lo.min()), float(hi.max())

    def residual_sup(self, grid):
        X, Y = grid.meshgrid()
        E = self.evaluator.curl_residual(X, Y, self.eps)
        return float(np.abs(E).max())

    def transport_defect_sup(self, n=151):
        """sup of the zeroth-layer transport relation in channel variables.

        (u_e0 + u_p0) d/dX u_p0 + v_p0 d/dY u_p0 - eps d2/dY2 u_p0, which the
        construction keeps at O(sqrt(eps)) through the wall-trace Taylor gap.
        """
        out = 0.0
        sq = np.sqrt(self.eps)
        for s in (-1, 1):
            lay = self.layers[s][0]
            xs = np.linspace(-self.L, 0.0, n)
            ys = np.linspace(0.0, lay.grid.y_max, n)
            x, y = np.meshgrid(xs, ys, indexing="ij")
            Y = s * (1.0 - sq * y)
            ue = self.flow.u(x, Y)
            u = lay.eval("u", 0, 0, x, y)
            ux = lay.eval("u", 1, 0, x, y)
            uy = lay.eval("u", 0, 1, x, y)
            uyy = lay.eval("u", 0, 2, x, y)
            vch = lay.eval("v_hat" if lay.final else "v_dec", 0, 0, x, y)
            rel = (ue + u) * ux + vch * uy - uyy
            out = max(out, float(np.abs(rel).max()))
        return out

    def momentum_residual(self, X, Y):
        """(M_u, M_v): momentum defects of the profile pair, with the
        corrector pressure gradients and the auxiliary layer pressure."""
        ev = self.evaluator
        p = lambda c, a, b: ev.partial(c, a, b, X, Y)
        u, v = p("u", 0, 0), p("v", 0, 0)
        pX, pY = self._pressure_gradient(X, Y)
        Mu = (u * p("u", 1, 0) + v * p("u", 0, 1) + pX
              - self.eps * (p("u", 2, 0) + p("u", 0, 2)))
        Mv = (u * p("v", 1, 0) + v * p("v", 0, 1) + pY
              - self.eps * (p("v", 2, 0) + p("v", 0, 2)))
        return Mu, Mv

    def _pressure_gradient(self, X, Y):
        fl = self.flow
        # background Euler pressure gradient
        pX = -(fl.u(X, Y) * fl.u(X, Y, 1, 0) + fl.v(X, Y) * fl.u(X, Y, 0, 1))
        pY = -(fl.u(X, Y) * fl.v(X, Y, 1, 0) + fl.v(X, Y) * fl.v(X, Y, 0, 1))
        sq = np.sqrt(self.eps)
        for i, corr in enumerate(self.correctors, start=1):
            forcing = getattr(corr, "momentum_forcing", None)
            gx, gy = corr.pressure_gradient(X, Y, forcing=forcing)
            pX = pX + sq**i * gx
            pY = pY + sq**i * gy
        for s, tab in self.pressures.items():
            zeta = 1.0 - s * np.asarray(Y, dtype=float)
            yl = zeta / sq
            chi = self.chi(zeta)
            dchi = self.chi.derivative(zeta, 1)
            pX = pX + self.eps * chi * tab.eval_x(X, yl)
            pY = pY + (-s) * (self.eps * dchi * tab.eval(X, yl)
                              + self.eps / sq * chi * tab.eval_y(X, yl))
        return pX, pY


class _LayerPressure:
    """Auxiliary layer pressure absorbing the vertical momentum defect of
    the zeroth layer: p(x, y) = int_y^inf r_v dy'."""

    def __init__(self, grid, table):
        self.grid = grid
        self.table = table
        self._spl = RectBivariateSpline(grid.x, grid.y, table, kx=3, ky=3)
        Dx = grid.dmat(0, 1, width=5)
        self._splx = RectBivariateSpline(grid.x, grid.y, Dx @ table, kx=3, ky=3)
        Dy = grid.dmat(1, 1, width=5)
        self._sply = RectBivariateSpline(grid.x, grid.y, (Dy @ table.T).T, kx=3, ky=3)

    def _ev(self, spl, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape).ravel()
        yb = np.clip(np.broadcast_to(y, shape).ravel(), 0.0, self.grid.y_max)
        out = spl(xb, yb, grid=False)
        out[np.broadcast_to(y, shape).ravel() > self.grid.y_max] = 0.0
        return out.reshape(shape)

    def eval(self, x, y):
        return self._ev(self._spl, x, y)

    def eval_x(self, x, y):
        return self._ev(self._splx, x, y)

    def eval_y(self, x, y):
        return self._ev(self._sply, x, y)


def _layer_pressure(layer0, traces1):
    """Vertical-momentum defect integral for one wall."""
    g = layer0.grid
    X, Yl = np.meshgrid(g.x, g.y, indexing="ij")
    W = layer0.wall_trace(g.x)[:, None]
    u0 = layer0.u_table(0, 0)
    vdx = layer0.v_decay_table(1, 0)
    vh = layer0.v_hat_table(0, 0)
    vhy = layer0.v_hat_table(0, 1)
    vyy = layer0.v_decay_table(0, 2)
    # F1_x trace = d/dx of (-v_trace); half-plane mapped
    f1x = -layer0.wall_v_trace(g.x, dx=1)[:, None]
    r_v = (W + u0) * vdx + u0 * f1x + vh * vhy - vyy
    spl = make_interp_spline(g.y, r_v.T, k=5)
    anti = spl.antiderivative()(g.y).T
    table = anti[:, -1][:, None] - anti  # int_y^ymax
    return _LayerPressure(g, table)


def _forcing_level1(flow, layer0, tr1, side, L):
    """Forcing of the first linearized layer (half-plane variables)."""
    sigma = -side

    def theta1(x):
        return sigma * flow.u(np.asarray(x, float), np.full_like(np.asarray(x, float), float(side)), 0, 1)

    def f1(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape)
        yb = np.broadcast_to(y, shape)
        u0 = layer0.eval("u", 0, 0, xb, yb)
        u0x = layer0.eval("u", 1, 0, xb, yb)
        u0y = layer0.eval("u", 0, 1, xb, yb)
        v0 = layer0.eval("v_dec", 0, 0, xb, yb)
        A1 = tr1.u(xb, 0, 0)
        A1x = tr1.u(xb, 1, 0)
        th1 = theta1(xb)
        # F1_y trace = -A1x by incompressibility
        return -(u0 * A1x + (yb * th1 + A1) * u0x
                 + yb * (-A1x) * u0y + th1 * v0)

    return f1


def _forcing_level2(flow, layer0, layer1, tr1, tr2, pressure, side, L):
    """Forcing of the second linearized layer (half-plane variables)."""
    sigma = -side

    def trace_prof(x, dy):
        x = np.asarray(x, dtype=float)
        return sigma**dy * flow.u(x, np.full_like(x, float(side)), 0, dy)

    def f2(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape)
        yb = np.broadcast_to(y, shape)
        u0 = layer0.eval("u", 0, 0, xb, yb)
        u0x = layer0.eval("u", 1, 0, xb, yb)
        u0xx = layer0.eval("u", 2, 0, xb, yb)
        u0y = layer0.eval("u", 0, 1, xb, yb)
        v0 = layer0.eval("v_dec", 0, 0, xb, yb)
        u1 = layer1.eval("u", 0, 0, xb, yb)
        u1x = layer1.eval("u", 1, 0, xb, yb)
        u1y = layer1.eval("u", 0, 1, xb, yb)
        v1 = layer1.eval("v_dec", 0, 0, xb, yb)
        v1h = layer1.eval("v_hat", 0, 0, xb, yb)
        A1 = tr1.u(xb, 0, 0)
        A1x = tr1.u(xb, 1, 0)
        A1y = tr1.u(xb, 0, 1)
        A1xy = tr1.u(xb, 1, 1)
        A2 = tr2.u(xb, 0, 0)
        A2x = tr2.u(xb, 1, 0)
        th1 = trace_prof(xb, 1)
        th2 = trace_prof(xb, 2)
        p2x = pressure.eval_x(xb, yb)
        # F1y = -A1x, F1yy = -A1xy, F2y = -A2x (incompressibility, mapped)
        return -(yb * u0 * A1xy + u0 * A2x
                 + (yb * th1 + A1 + u1) * u1x + u1 * A1x
                 + (0.5 * yb**2 * th2 + yb * A1y + A2) * u0x
                 + (-0.5 * yb**2 * A1xy - yb * A2x) * u0y
                 + th1 * v1 + v1h * u1y + yb * (-A1x) * u1y
                 + yb * th2 * v0 + v0 * A1y
                 - u0xx + p2x)

    return f2


def _euler2_curl(flow, corr1):
    """Curl of the second corrector's forcing (quadratic self-interaction
    of the first corrector plus the background viscous defect)."""

    def g(X, Y):
        E = lambda a, b: corr1.eval("u", a, b, X, Y)
        F = lambda a, b: corr1.eval("v", a, b, X, Y)
        # f1 = Lap u0 - E F... curl = d/dX f2 - d/dY f1
        dX_f2 = (flow.v(X, Y, 3, 0) + flow.v(X, Y, 1, 2)
                 - E(1, 0) * F(1, 0) - E(0, 0) * F(2, 0)
                 - F(1, 0) * F(0, 1) - F(0, 0) * F(1, 1))
        dY_f1 = (flow.u(X, Y, 2, 1) + flow.u(X, Y, 0, 3)
                 - E(0, 1) * E(1, 0) - E(0, 0) * E(1, 1)
                 - F(0, 1) * E(0, 1) - F(0, 0) * E(0, 2))
        return dX_f2 - dY_f1

    return g


def _euler2_momentum_forcing(flow, corr1):
    f1 = lambda X, Y: (flow.u(X, Y, 2, 0) + flow.u(X, Y, 0, 2)
                       - corr1.eval("u", 0, 0, X, Y) * corr1.eval("u", 1, 0, X, Y)
                       - corr1.eval("v", 0, 0, X, Y) * corr1.eval("u", 0, 1, X, Y))
    f2 = lambda X, Y: (flow.v(X, Y, 2, 0) + flow.v(X, Y, 0, 2)
                       - corr1.eval("u", 0, 0, X, Y) * corr1.eval("v", 1, 0, X, Y)
                       - corr1.eval("v", 0, 0, X, Y) * corr1.eval("v", 0, 1, X, Y))
    return f1, f2


def assemble_hierarchy(flow, K_a, eps, *, L, inflow="blasius", s0=1.0,
                       decay_rate=1.0, chi=None, layer_grid=None,
                       euler_nx=129, euler_ny=129, analytic_layer0="auto",
                       blasius_tol=1e-10):
    """Build the corrector ladder up to half-order ``K_a``.

    ``inflow`` selects the zeroth-layer inflow generator ("blasius" with
    virtual station ``s0``, or "exponential-bump"), or may be a callable
    y -> profile.  For shear backgrounds with Blasius inflow the zeroth
    layer is represented by the exact similarity family.
    """
    if not 0 <= K_a <= MAX_HALF_ORDERS:
        raise HierarchyError(f"K_a must lie in [0, {MAX_HALF_ORDERS}]")
    if K_a > SUPPORTED_HALF_ORDERS:
        raise HierarchyError(
            f"desk-scale forcing derivations cover K_a <= {SUPPORTED_HALF_ORDERS}; "
            f"got K_a={K_a}")
    chi = chi or CutoffFunction(inner=1.0, outer=1.5)
    if layer_grid is None:
        # the eta-range of the Blasius family widens with the virtual
        # station; keep the far field below the 1e-6 tail requirement
        y_max = max(14.0, np.ceil(9.0 * np.sqrt(s0 + L)))
        layer_grid = LayerGrid(L, n_y=int(22 * y_max), y_max=y_max)
    meta = {"inflow": inflow if isinstance(inflow, str) else "custom", "s0": s0}

    profile = None
    layers = {-1: [], 1: []}
    for side in (-1, 1):
        Ws = float(flow.u(np.array([-L / 2]), np.array([float(side)]))[0])
        wall_varies = flow.kind != "shear"
        wall_trace = (lambda x, s=side: flow.u(np.asarray(x, float),
                                               np.full_like(np.asarray(x, float), float(s))))
        use_analytic = (analytic_layer0 is True
                        or (analytic_layer0 == "auto" and inflow == "blasius"
                            and not wall_varies))
        if use_analytic:
            if profile is None:
                profile = solve_blasius(blasius_tol)
            sim = SimilarityLayer(profile, W=Ws, s0=s0, L=L)
            u_tab = sim.u_partial(*np.meshgrid(layer_grid.x, layer_grid.y, indexing="ij"))
            lay = PrandtlLayer(side, 0, layer_grid, u_tab, wall_trace,
                               final=(K_a == 0), analytic=sim,
                               decay_rate=decay_rate)
            m0, y0 = sim.monotonicity()
            lay.meta.update(m0=m0, y0=y0)
        else:
            if inflow == "blasius":
                if profile is None:
                    profile = solve_blasius(blasius_tol)
                gen = blasius_inflow(profile, Ws, s0)
            elif inflow == "exponential-bump":
                gen = exponential_bump_inflow(Ws, decay_rate)
            elif callable(inflow):
                gen = inflow
            else:
                raise HierarchyError(f"unknown inflow generator {inflow!r}")
            lay = solve_prandtl0(side, wall_trace, gen, L=L, grid=layer_grid)
            lay.final = (K_a == 0)
        layers[side].append(lay)

    # upstream pad: corner adjustment zones of the corrector solves and the
    # layer run-up transients live on [-L-pad, -L), outside the window
    pad = 0.4 * min(L, 0.8 * s0)

    correctors = []
    traces = {}
    pressures = {}
    for i in range(1, K_a + 1):
        walls = {}
        for side in (-1, 1):
            sigma = -side
            prev = layers[side][i - 1]
            walls[side] = (lambda x, p=prev, sg=sigma:
                           -sg * p.wall_v_trace(np.asarray(x, float)))
        def side_data(edge_x, wl=walls):
            def fn(Y):
                lo = wl[-1](np.array([edge_x]))[0]
                hi = wl[1](np.array([edge_x]))[0]
                return _side_profile(Y, lo, hi)
            return fn

        curl = None
        if i == 2:
            curl = _euler2_curl(flow, correctors[0])
        try:
            corr = solve_linearized_euler(
                flow, L,
                v_bottom=walls[-1], v_top=walls[1],
                v_inflow=side_data(-L - pad), v_outflow=side_data(0.0),
                u_inflow=None, curl_forcing=curl,
                nx=euler_nx, ny=euler_ny, x_lo=-L - pad)
        except EulerError as exc:
            raise HierarchyError(f"half-order {i}: Euler corrector failed: {exc}") from exc
        if i == 2:
            corr.momentum_forcing = _euler2_momentum_forcing(flow, correctors[0])
        correctors.append(corr)
        traces[i] = {s: _SideTraces(corr, s) for s in (-1, 1)}

        for side in (-1, 1):
            tr = traces[i][side]
            if i == 1:
                forcing = _forcing_level1(flow, layers[side][0], tr, side, L)
            else:
                pressures[side] = _layer_pressure(layers[side][0], traces[1][side])
                forcing = _forcing_level2(flow, layers[side][0], layers[side][1],
                                          traces[1][side], tr, pressures[side],
                                          side, L)
            wall_data = (lambda x, t=tr: -t.u(np.asarray(x, float), 0, 0))
            try:
                lay = solve_prandtl_i(i, side, layers[side][0], forcing,
                                      wall_data, final=(i == K_a),
                                      grid=layer_grid, run_up=pad)
            except LayerError as exc:
                raise HierarchyError(f"half-order {i}, side {side}: {exc}") from exc
            layers[side].append(lay)

    hier = CorrectorHierarchy(flow, eps, K_a, layers, correctors, chi, L,
                              pressures=pressures, meta=meta)
    wu, wv = hier.wall_trace_sup()
    # cancelled traces pass through two interpolants (layer stations and
    # corrector grid); once the traces carry outflow-corner structure
    # (half-orders >= 2) the inter-node gap sits at resampling level
    u_tol = 1e-8 if K_a <= 1 else 1e-5
    v_tol = 1e-8 if K_a <= 1 else 2e-4
    if wu > u_tol:
        raise HierarchyError(f"assembled profile violates no-slip: u trace {wu:.3e}")
    if wv > v_tol:
        raise HierarchyError(f"assembled profile violates no-penetration: "
                             f"v trace {wv:.3e} > {v_tol:.0e}")
    meta["wall_trace_u"] = wu
    meta["wall_trace_v"] = wv
    hier.meta.update(meta)
    lo, hi = hier.wall_shear_signs()
    if not (lo > 0 and hi < 0):
        raise HierarchyError(
            f"wall shear signs wrong: dY u_a = {lo:.3e} at Y=-1, {hi:.3e} at Y=+1")
    return hier
