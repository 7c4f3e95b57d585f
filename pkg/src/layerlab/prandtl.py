"""Wall-layer (Prandtl) solvers: the nonlinear zeroth layer and the
linearized higher layers, marched implicitly in x on a graded layer grid.

Layer coordinates: x in [-L, 0] (stations), y in [0, y_max] with y the
wall distance divided by sqrt(eps).  The vertical component is recovered
from incompressibility; both normalizations (decaying at infinity /
vanishing at the wall) are available.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import solve_banded

from .calculus import cumulative_integral, derivative_matrix, fd_weights


class LayerError(RuntimeError):
    pass


class LayerGrid:
    """Uniform x stations on [-L, 0], sinh-graded y in [0, y_max]."""

    def __init__(self, L, n_x=241, n_y=301, y_max=14.0, grading=2.4):
        self.L = float(L)
        self.y_max = float(y_max)
        self.x = np.linspace(-L, 0.0, n_x)
        t = np.linspace(0.0, 1.0, n_y)
        self.y = y_max * np.sinh(grading * t) / np.sinh(grading)
        self.y[0] = 0.0
        self._ops = {}

    @property
    def dx(self):
        return self.x[1] - self.x[0]

    def dmat(self, axis, order, width=None):
        key = (axis, order, width)
        if key not in self._ops:
            nodes = self.x if axis == 0 else self.y
            self._ops[key] = derivative_matrix(nodes, order, width=width)
        return self._ops[key]


def _second_derivative_bands(y):
    """3-point nonuniform second-derivative coefficients (lower, diag, upper)."""
    n = y.size
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    hm = np.diff(y)
    for j in range(1, n - 1):
        a, b = hm[j - 1], hm[j]
        lo[j] = 2.0 / (a * (a + b))
        di[j] = -2.0 / (a * b)
        up[j] = 2.0 / (b * (a + b))
    return lo, di, up


def _first_derivative_bands(y):
    n = y.size
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    hm = np.diff(y)
    for j in range(1, n - 1):
        a, b = hm[j - 1], hm[j]
        lo[j] = -b / (a * (a + b))
        di[j] = (b - a) / (a * b)
        up[j] = a / (b * (a + b))
    return lo, di, up


class PrandtlLayer:
    """One wall-layer field with derivative access.

    ``side`` is -1 (wall Y = -1) or +1 (wall Y = +1); ``index`` is the
    position in the corrector ladder.  ``u`` holds the tangential layer
    perturbation on (x stations) x (y nodes).  ``analytic`` may carry a
    SimilarityLayer that then supplies exact partial derivatives.
    """

    def __init__(self, side, index, grid, u, wall_trace, final=False,
                 analytic=None, decay_rate=1.0, meta=None):
        self.side = int(side)
        self.index = int(index)
        self.grid = grid
        self.u = np.asarray(u, dtype=float)
        self.wall_trace = wall_trace   # callable W(x): background u at the wall
        self.final = bool(final)
        self.analytic = analytic
        self.decay_rate = float(decay_rate)
        self.meta = dict(meta or {})
        self._tables = {}
        self._splines = {}
        self._check_tail()

    # -- invariant checks ---------------------------------------------------
    def _check_tail(self):
        sup = np.abs(self.u).max()
        tail = np.abs(self.u[:, -1]).max()
        if sup > 0 and tail > 1e-6 * sup:
            raise LayerError(
                f"layer {self.index} tail {tail:.2e} exceeds 1e-6 of sup {sup:.2e}; "
                "increase y_max")

    def divergence_defect(self):
        """sup |d/dy v_hat + u_x| on the layer grid (interpolation level)."""
        from scipy.interpolate import make_interp_spline
        ux = self.u_table(1, 0)
        vh = self.v_hat_table()
        dv = make_interp_spline(self.grid.y, vh.T, k=5).derivative()(self.grid.y).T
        return float(np.abs(dv + ux).max())

    def monotonicity(self):
        """(m0, y0): lower bound of d(u_total)/dy on the near-wall strip."""
        if self.analytic is not None:
            return self.analytic.monotonicity()
        Dy = self.grid.dmat(1, 1, width=6)
        uy = (Dy @ self.u.T).T
        W = self.wall_trace(self.grid.x)
        mask = self.grid.y <= 3.0
        m0 = float(uy[:, mask].min())
        return m0, 3.0

    # -- tables & evaluation --------------------------------------------------
    def u_table(self, a=0, b=0):
        key = ("u", a, b)
        if key in self._tables:
            return self._tables[key]
        if self.analytic is not None:
            X, Y = np.meshgrid(self.grid.x, self.grid.y, indexing="ij")
            out = self.analytic.u_partial(X, Y, a, b)
        else:
            out = self.u
            if b:
                out = (self.grid.dmat(1, b, width=b + 4) @ out.T).T
            if a:
                out = self.grid.dmat(0, a, width=a + 4) @ out
        self._tables[key] = out
        return out

    def v_hat_table(self, a=0, b=0):
        """Wall-normalized vertical component v_hat = -int_0^y u_x."""
        key = ("v_hat", a, b)
        if key in self._tables:
            return self._tables[key]
        if self.analytic is not None:
            X, Y = np.meshgrid(self.grid.x, self.grid.y, indexing="ij")
            out = self.analytic.v_partial(X, Y, a, b, normalization="wall")
        elif b > 0:
            out = -self.u_table(a + 1, b - 1)
        else:
            # exact antiderivative of the quintic spline of -u_x along y,
            # so the discrete divergence defect is at interpolation level
            from scipy.interpolate import make_interp_spline
            ux = self.u_table(1, 0)
            spl = make_interp_spline(self.grid.y, ux.T, k=5)
            base = -spl.antiderivative()(self.grid.y).T
            if a:
                base = self.grid.dmat(0, a, width=a + 4) @ base
            out = base
        self._tables[key] = out
        return out

    def v_decay_table(self, a=0, b=0):
        """Decay-normalized vertical component (0 at infinity)."""
        key = ("v_dec", a, b)
        if key in self._tables:
            return self._tables[key]
        if self.analytic is not None:
            X, Y = np.meshgrid(self.grid.x, self.grid.y, indexing="ij")
            out = self.analytic.v_partial(X, Y, a, b, normalization="decay")
        else:
            out = self.v_hat_table(a, b)
            if b == 0:
                out = out - self.v_hat_table(a, 0)[:, -1][:, None]
        self._tables[key] = out
        return out

    def v_table(self, a=0, b=0):
        """Vertical component in the channel-assembly normalization."""
        if self.final:
            return self.v_hat_table(a, b)
        return self.v_decay_table(a, b)

    def wall_v_trace(self, x, dx=0):
        """Decay-normalized v at the wall (the trace the next corrector cancels).

        Evaluated through the same spline as the assembled field so the
        cancellation against the next corrector is exact to roundoff.
        """
        if self.analytic is not None:
            return self.analytic.wall_v_trace(np.asarray(x, dtype=float), dx)
        x = np.asarray(x, dtype=float)
        return self.eval("v_dec", dx, 0, x, np.zeros_like(x))

    def _spline(self, kind, a, b):
        key = (kind, a, b)
        if key not in self._splines:
            table = {"u": self.u_table, "v_hat": self.v_hat_table,
                     "v_dec": self.v_decay_table}[kind](a, b)
            self._splines[key] = RectBivariateSpline(
                self.grid.x, self.grid.y, table, kx=3, ky=3)
        return self._splines[key]

    def eval(self, kind, a, b, x, y):
        """Evaluate a partial at arbitrary (x, y).

        Beyond y_max, decaying quantities vanish; the wall-normalized
        vertical component instead keeps its constant displacement tail
        (the cut-off is what removes it from the channel fields).
        """
        if self.analytic is not None:
            if kind == "u":
                return self.analytic.u_partial(x, y, a, b)
            norm = "wall" if kind == "v_hat" else "decay"
            return self.analytic.v_partial(x, y, a, b, normalization=norm)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        # x clamped into the station range (upstream queries during run-up
        # see frozen inflow-station values rather than spline extrapolation)
        xb = np.clip(np.broadcast_to(x, shape).ravel(), self.grid.x[0], self.grid.x[-1])
        yb = np.broadcast_to(y, shape).ravel()
        inside = yb <= self.grid.y_max
        out = np.zeros(xb.size)
        out[inside] = self._spline(kind, a, b)(xb[inside], yb[inside], grid=False)
        if kind == "v_hat" and b == 0 and not np.all(inside):
            tail = self._spline(kind, a, 0)(xb[~inside],
                                            np.full(int((~inside).sum()), self.grid.y_max),
                                            grid=False)
            out[~inside] = tail
        return out.reshape(shape)


RANNACHER_STEPS = 8


def _march(grid, *, init, wall_bc, coefs, forcing=None,
           theta=0.5, tol=1e-12, max_inner=60, label="layer"):
    """Generic implicit x-march of one layer equation.

    Solves  C(x, y, u) u_x + A(x, y) u + B(x, y) u_y + v_hat * uy_weight
            - u_yy = rhs  station by station, where the incompressibility
    integral v_hat = -int_0^y u_x couples nonlocally and is handled by
    inner fixed-point iterations.  ``coefs`` supplies the per-station
    coefficient arrays; see the callers for the two concrete layouts.
    """
    x, y = grid.x, grid.y
    n_x, n_y = x.size, y.size
    dx = grid.dx
    lo1, di1, up1 = _first_derivative_bands(y)
    lo2, di2, up2 = _second_derivative_bands(y)

    u = np.empty((n_x, n_y))
    u[0] = init
    for k in range(n_x - 1):
        # backward-Euler startup damps the Crank-Nicolson ringing the
        # near-wall stiffness would otherwise imprint on the first stations
        th = 1.0 if k < RANNACHER_STEPS else theta
        xm = (1.0 - th) * x[k] + th * x[k + 1]
        new = u[k].copy()
        new[0] = wall_bc(x[k + 1])
        old = u[k]
        for it in range(max_inner):
            umid = (1.0 - th) * old + th * new
            ux = (new - old) / dx
            v_hat = -cumulative_integral(ux, y)
            C, A, B, rhs = coefs(xm, umid, v_hat)
            if np.any(C[1:] <= 0.0):
                raise LayerError(
                    f"{label}: marching breakdown (separation, total velocity <= 0) "
                    f"at x = {x[k + 1]:.6g}")
            if forcing is not None:
                rhs = rhs + forcing(xm, y)
            # assemble tridiagonal system for `new`
            # C*(new-old)/dx + th*(A*new + Btot*new_y - new_yy) = rhs - (1-th)*L old
            Btot = B + v_hat
            ab = np.zeros((3, n_y))
            ab[0, 1:] = th * (Btot[:-1] * up1[:-1] - up2[:-1])     # upper diag
            ab[1, :] = C / dx + th * (A + Btot * di1 - di2)
            ab[2, :-1] = th * (Btot[1:] * lo1[1:] - lo2[1:])       # lower diag
            b = rhs + C * old / dx
            Lold = A * old + Btot * ((lo1 * np.roll(old, 1) + di1 * old
                                      + up1 * np.roll(old, -1)))
            Lold = Lold - (lo2 * np.roll(old, 1) + di2 * old + up2 * np.roll(old, -1))
            b = b - (1.0 - th) * Lold
            # boundary rows: wall Dirichlet and far-field zero
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            b[0] = wall_bc(x[k + 1])
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
            b[-1] = 0.0
            prev = new
            new = solve_banded((1, 1), ab, b)
            if np.abs(new - prev).max() <= tol * max(1.0, np.abs(new).max()):
                break
        else:
            raise LayerError(f"{label}: inner iteration stalled at x = {x[k + 1]:.6g}")
        u[k + 1] = new
    return u


def solve_prandtl0(side, wall_trace, inflow, pressure_gradient=None, *,
                   L=1.0, grid=None, decay_rate=1.0, theta=0.5, tol=1e-12):
    """Nonlinear zeroth wall layer by implicit marching.

    Parameters
    ----------
    side : -1 or +1
        Which wall the layer corrects.
    wall_trace : callable
        Background Euler u at the wall as a function of x (positive).
    inflow : callable or array
        Layer profile at x = -L; must equal -wall_trace(-L) at y = 0,
        keep wall_trace + inflow > 0 for y > 0, and decay at the rate
        ``decay_rate``.
    pressure_gradient : callable, optional
        Streamwise layer pressure gradient (zero for shear backgrounds).

    Raises LayerError on separation (total velocity reaching 0), on
    incompatible inflow data, or on an undecayed tail.
    """
    grid = grid or LayerGrid(L)
    y = grid.y
    u0 = inflow(y) if callable(inflow) else np.asarray(inflow, dtype=float)
    W_in = wall_trace(np.array([-L]))[0] if callable(wall_trace) else float(wall_trace)
    Wfun = wall_trace if callable(wall_trace) else (lambda x: np.full_like(np.asarray(x, float), wall_trace))
    if abs(u0[0] + W_in) > 1e-10:
        raise LayerError(
            f"inflow does not match the wall: u(0) = {u0[0]:.6g}, need {-W_in:.6g}")
    if np.any(W_in + u0[1:] <= 0):
        raise LayerError("inflow violates positivity of the total velocity")
    sup = np.abs(u0).max()
    if sup > 0 and abs(u0[-1]) > max(1e-6 * sup, np.exp(-decay_rate * grid.y_max)):
        raise LayerError("inflow tail not decayed at y_max; enlarge y_max")

    pg = pressure_gradient or (lambda x: 0.0)

    def coefs(xm, umid, v_hat):
        W = float(Wfun(np.array([xm]))[0])
        C = W + umid
        A = np.zeros_like(umid)
        B = np.zeros_like(umid)      # v_hat enters through the shared term
        rhs = np.full_like(umid, -float(pg(xm)))
        return C, A, B, rhs

    u = _march(grid, init=u0, wall_bc=lambda xx: -float(Wfun(np.array([xx]))[0]),
               coefs=coefs, theta=theta, tol=tol, label="prandtl0")
    layer = PrandtlLayer(side, 0, grid, u, Wfun, final=False,
                         decay_rate=decay_rate)
    m0, y0 = layer.monotonicity()
    layer.meta.update(m0=m0, y0=y0)
    return layer


def solve_prandtl_i(index, side, background, forcing, wall_data, inflow=None, *,
                    final=False, grid=None, theta=0.5, tol=1e-12,
                    pressure_gradient=None, run_up=1.0):
    """Linearized wall layer at ladder position ``index`` >= 1.

    ``background`` is the zeroth layer (PrandtlLayer) it is linearized
    around; ``forcing`` is f(x, y) produced by the lower orders;
    ``wall_data`` gives u at y = 0 (cancelling the Euler corrector trace);
    ``inflow`` is the profile at x = -L.  For the last retained layer pass
    ``final=True``: the vertical component is then normalized to vanish at
    the wall instead of at infinity.

    When no inflow is given, the march starts from rest a distance
    ``run_up`` upstream of the channel with frozen inflow-station data, so
    the profile entering the physical window is settled and compatible at
    the degenerate corner; the arrival profile is the effective inflow
    datum.  An explicit ``inflow`` is honored verbatim (no run-up).
    """
    grid = grid or background.grid
    y = grid.y
    m0, _ = background.monotonicity()
    if m0 <= 0:
        raise LayerError("background layer loses wall monotonicity; cannot linearize")
    if forcing is not None:
        ftail = np.abs(np.asarray(forcing(grid.x, np.array([grid.y_max])))).max()
        fsup = np.abs(np.asarray(forcing(grid.x[:, None], y[None, :]))).max()
        if fsup > 0 and ftail > 2e-4 * fsup:
            raise LayerError("layer forcing does not decay in y")

    if inflow is None:
        n_pre = int(round(run_up / grid.dx))
        x_start = grid.x[0] - n_pre * grid.dx
        g_start = float(wall_data(np.array([x_start]))[0])
        u0 = g_start * np.exp(-0.5 * y**2)
    else:
        u0 = inflow(y) if callable(inflow) else np.asarray(inflow, dtype=float)
        n_pre = 0
        x_start = grid.x[0]
    if abs(u0[0] - wall_data(np.array([x_start]))[0]) > 1e-8:
        raise LayerError("layer inflow incompatible with wall data at the corner")

    Wfun = background.wall_trace
    ub = background.u_table(0, 0)
    ubx = background.u_table(1, 0)
    uby = background.u_table(0, 1)
    vb = background.v_hat_table(0, 0)
    xs = grid.x

    def station_interp(table, xm):
        xm = min(max(xm, xs[0]), xs[-1])
        k = np.searchsorted(xs, xm) - 1
        k = min(max(k, 0), xs.size - 2)
        t = (xm - xs[k]) / (xs[k + 1] - xs[k])
        return (1 - t) * table[k] + t * table[k + 1]

    pg = pressure_gradient or (lambda xm, yy: np.zeros_like(yy))

    def coefs(xm, umid, v_hat):
        # background-layer coefficients are frozen upstream of the window;
        # everything there is run-up transient that gets discarded
        W = float(Wfun(np.array([max(xm, -grid.L)]))[0])
        C = W + station_interp(ub, xm)
        A = station_interp(ubx, xm)
        B = station_interp(vb, xm)
        uby_m = station_interp(uby, xm)
        rhs = -uby_m * v_hat - np.asarray(pg(max(xm, -grid.L), y))
        return C, A, B, rhs

    # v_hat of the *unknown* enters algebraically (through rhs above), so the
    # coupling is folded into the inner iterations by rebuilding rhs.
    x_march = np.concatenate([grid.x[0] - grid.dx * np.arange(n_pre, 0, -1), grid.x])
    n_x, n_y = x_march.size, y.size
    dx = grid.dx
    lo1, di1, up1 = _first_derivative_bands(y)
    lo2, di2, up2 = _second_derivative_bands(y)
    u = np.empty((n_x, n_y))
    u[0] = u0

    def wall_at(xx):
        return float(wall_data(np.array([xx]))[0])

    def forcing_at(xm):
        if forcing is None:
            return 0.0
        return np.asarray(forcing(xm, y))

    for k in range(n_x - 1):
        th = 1.0 if k < RANNACHER_STEPS else theta
        xm = (1.0 - th) * x_march[k] + th * x_march[k + 1]
        old = u[k]
        new = old.copy()
        for it in range(60):
            umid = (1.0 - th) * old + th * new
            ux = (new - old) / dx
            v_hat = -cumulative_integral(ux, y)
            C, A, B, rhs = coefs(xm, umid, v_hat)
            rhs = rhs + forcing_at(xm)
            ab = np.zeros((3, n_y))
            ab[0, 1:] = th * (B[:-1] * up1[:-1] - up2[:-1])
            ab[1, :] = C / dx + th * (A + B * di1 - di2)
            ab[2, :-1] = th * (B[1:] * lo1[1:] - lo2[1:])
            Lold = (A * old + B * (lo1 * np.roll(old, 1) + di1 * old + up1 * np.roll(old, -1))
                    - (lo2 * np.roll(old, 1) + di2 * old + up2 * np.roll(old, -1)))
            b = rhs + C * old / dx - (1.0 - th) * Lold
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            b[0] = wall_at(x_march[k + 1])
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
            b[-1] = 0.0
            prev = new
            new = solve_banded((1, 1), ab, b)
            if np.abs(new - prev).max() <= tol * max(1.0, np.abs(new).max()):
                break
        else:
            raise LayerError(f"layer {index}: inner iteration stalled at x={x_march[k+1]:.6g}")
        u[k + 1] = new
    return PrandtlLayer(side, index, grid, u[n_pre:], Wfun, final=final,
                        decay_rate=background.decay_rate)


def blasius_inflow(profile, W, s0):
    """Inflow generator: scaled Blasius profile at virtual station s0."""
    def gen(y):
        eta = np.asarray(y, dtype=float) * np.sqrt(W / s0)
        return W * (profile.deriv(eta, 1) - 1.0)
    return gen


def exponential_bump_inflow(W, rate=1.0):
    """Simple decaying inflow -W exp(-rate y) (weaker corner compatibility)."""
    def gen(y):
        return -W * np.exp(-rate * np.asarray(y, dtype=float))
    return gen
