"""Blasius self-similar wall layer.

Shooting solution of f''' + f f''/2 = 0, f(0) = f'(0) = 0, f'(inf) = 1,
plus an exact similarity-layer representation whose partial derivatives
of any order follow from the ODE recursion.  Seeding wall layers with
this family gives machine-accurate layer fields for residual studies.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline

from .calculus import cumulative_integral


class BlasiusError(RuntimeError):
    pass


def _rhs(eta, state):
    f, fp, fpp = state
    return [fp, fpp, -0.5 * f * fpp]


class BlasiusProfile:
    """Tabulated Blasius solution with derivatives of any order <= 6.

    Derivatives above the stored (f, f', f'') follow from the ODE:
    f''' = -f f''/2 and its differentiated forms.  Beyond the table the
    asymptotics f = eta - beta, f' = 1, f'' = 0 are exact to roundoff.
    """

    def __init__(self, eta, f, fp, fpp, fpp0):
        self.eta_max = float(eta[-1])
        self.fpp0 = float(fpp0)
        self._spl = {
            0: make_interp_spline(eta, f, k=5),
            1: make_interp_spline(eta, fp, k=5),
            2: make_interp_spline(eta, fpp, k=5),
        }
        self.beta = float(eta[-1] - f[-1])  # displacement constant lim(eta - f)

    def deriv(self, eta, k=0):
        eta = np.asarray(eta, dtype=float)
        inside = eta < self.eta_max
        ec = np.clip(eta, 0.0, self.eta_max)
        if k <= 2:
            out = self._spl[k](ec)
        else:
            f = [self._spl[m](ec) for m in range(3)]
            # ODE recursion: each extra derivative differentiates the product
            f.append(-0.5 * f[0] * f[2])                                  # f'''
            f.append(-0.5 * (f[1] * f[2] + f[0] * f[3]))                  # f''''
            f.append(-0.5 * (f[2] ** 2 + 2 * f[1] * f[3] + f[0] * f[4]))  # f'''''
            f.append(-0.5 * (3 * f[2] * f[3] + 3 * f[1] * f[4] + f[0] * f[5]))
            if k >= len(f):
                raise BlasiusError("Blasius derivatives implemented to order 6")
            out = f[k]
        if k == 0:
            tail = eta - self.beta
        elif k == 1:
            tail = np.ones_like(eta)
        else:
            tail = np.zeros_like(eta)
        return np.where(inside, out, tail)

    def __call__(self, eta):
        return self.deriv(eta, 0)

    def eta_at(self, fp_target):
        """Smallest eta with f'(eta) = fp_target (e.g. the 99% thickness)."""
        grid = np.linspace(0.0, self.eta_max, 4001)
        vals = self.deriv(grid, 1)
        idx = np.searchsorted(vals, fp_target)
        if idx == 0 or idx >= grid.size:
            raise BlasiusError(f"f' never reaches {fp_target}")
        a, b = grid[idx - 1], grid[idx]
        fa, fb = vals[idx - 1], vals[idx]
        return a + (fp_target - fa) * (b - a) / (fb - fa)


def solve_blasius(tolerance=1e-10, eta_max=14.0, bracket=(0.2, 0.5)):
    """Shooting solution of the Blasius problem.

    Bisects on the wall shear f''(0) until f'(eta_max) -> 1 within
    ``tolerance``.  Raises BlasiusError if the bracket does not straddle
    the target.
    """
    if not 1e-12 < tolerance < 1e-4:
        raise BlasiusError("tolerance must lie in (1e-12, 1e-4)")

    def shoot(a):
        sol = solve_ivp(_rhs, (0.0, eta_max), [0.0, 0.0, a],
                        rtol=1e-12, atol=1e-13, dense_output=False,
                        method="DOP853")
        return sol.y[1, -1] - 1.0

    lo, hi = bracket
    flo, fhi = shoot(lo), shoot(hi)
    if flo * fhi > 0:
        raise BlasiusError(f"shooting bracket {bracket} does not straddle f'(inf)=1")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = shoot(mid)
        if flo * fm <= 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
        if hi - lo < 0.25 * tolerance:
            break
    a = 0.5 * (lo + hi)
    eta = np.linspace(0.0, eta_max, 4001)
    sol = solve_ivp(_rhs, (0.0, eta_max), [0.0, 0.0, a], t_eval=eta,
                    rtol=1e-12, atol=1e-13, method="DOP853")
    if not sol.success:
        raise BlasiusError(sol.message)
    f, fp, fpp = sol.y
    if np.any(fpp < -1e-12):
        raise BlasiusError("computed profile lost concavity")
    return BlasiusProfile(eta, f, fp, fpp, fpp0=a)


# ---------------------------------------------------------------------------
# Exact similarity layer: term algebra for partial derivatives
# ---------------------------------------------------------------------------
#
# Every quantity of the layer is a finite sum of terms
#     coef * f^(m)(eta) * eta^p * s^(q2/2),     eta = y * sqrt(W / s),
# with s(x) = s0 + (x + L) the virtual downstream coordinate.  The class
# below differentiates such sums exactly:
#     d/dx: eta_x = -eta/(2s),  s_x = 1
#     d/dy: eta_y = sqrt(W) * s^(-1/2)

class _TermSum:
    __slots__ = ("terms",)

    def __init__(self, terms):
        # term = (coef, m, p, q2); m = None encodes f^(m) == 1
        self.terms = list(terms)

    def dx(self):
        out = []
        for c, m, p, q2 in self.terms:
            if m is not None:
                out.append((-0.5 * c, m + 1, p + 1, q2 - 2))
            if p != 0 or q2 != 0:
                out.append((c * (0.5 * q2 - 0.5 * p), m, p, q2 - 2))
        return _TermSum(out)

    def dy(self, sqrtW):
        out = []
        for c, m, p, q2 in self.terms:
            if m is not None:
                out.append((c * sqrtW, m + 1, p, q2 - 1))
            if p != 0:
                out.append((c * p * sqrtW, m, p - 1, q2 - 1))
        return _TermSum(out)

    def eval(self, profile, eta, s):
        total = np.zeros(np.broadcast_shapes(np.shape(eta), np.shape(s)))
        for c, m, p, q2 in self.terms:
            base = profile.deriv(eta, m) if m is not None else 1.0
            total = total + c * base * eta**p * s**(0.5 * q2)
        return total


class SimilarityLayer:
    """Exact Blasius-family wall layer for a constant wall trace W > 0.

    ``u`` is the layer perturbation W(f'(eta) - 1); ``v`` is the
    decay-normalized vertical component (tends to 0 as y -> inf, nonzero
    at the wall); ``v_hat = v - v(x, 0)`` is the wall-normalized one.
    x runs over [-L, 0]; the similarity station is s = s0 + x + L.
    """

    def __init__(self, profile, W=1.0, s0=1.0, L=1.0):
        if W <= 0:
            raise BlasiusError("wall trace W must be positive")
        self.profile = profile
        self.W = float(W)
        self.s0 = float(s0)
        self.L = float(L)
        self._cache = {}
        sqW = np.sqrt(self.W)
        # u = W f' - W ; v_tot = (sqW/2)(eta f' - f) s^{-1/2}
        self._seeds = {
            "u": _TermSum([(self.W, 1, 0, 0)]),
            "u_const": -self.W,
            "v_hat": _TermSum([(0.5 * sqW, 1, 1, -1), (-0.5 * sqW, 0, 0, -1)]),
            # v = v_hat - v_hat(x, inf): subtract the displacement tail
            "v_tail": _TermSum([(-0.5 * sqW * profile.beta, None, 0, -1)]),
        }

    def _terms(self, name, a, b):
        key = (name, a, b)
        if key not in self._cache:
            if b > 0:
                t = self._terms(name, a, b - 1)
                self._cache[key] = t.dy(np.sqrt(self.W))
            elif a > 0:
                t = self._terms(name, a - 1, 0)
                self._cache[key] = t.dx()
            else:
                self._cache[key] = self._seeds[name]
        return self._cache[key]

    def s_of(self, x):
        return self.s0 + (np.asarray(x, dtype=float) + self.L)

    def eta_of(self, x, y):
        return np.asarray(y, dtype=float) * np.sqrt(self.W / self.s_of(x))

    def u_partial(self, x, y, a=0, b=0):
        s = self.s_of(x)
        eta = np.asarray(y, dtype=float) * np.sqrt(self.W / s)
        out = self._terms("u", a, b).eval(self.profile, eta, s)
        if a == 0 and b == 0:
            out = out + self._seeds["u_const"]
        return out

    def v_partial(self, x, y, a=0, b=0, normalization="decay"):
        """Partials of the vertical layer component.

        normalization="decay": v -> 0 as y -> inf (nonzero wall trace);
        "wall": v(x, 0) = 0 (the physical no-penetration normalization).
        """
        s = self.s_of(x)
        eta = np.asarray(y, dtype=float) * np.sqrt(self.W / s)
        out = self._terms("v_hat", a, b).eval(self.profile, eta, s)
        if normalization == "decay":
            if b == 0:
                out = out + self._terms("v_tail", a, 0).eval(self.profile, eta, s)
        elif normalization != "wall":
            raise BlasiusError(f"unknown normalization {normalization!r}")
        return out

    def wall_v_trace(self, x, dx=0):
        """d^dx/dx^dx of the decay-normalized v at y = 0."""
        s = self.s_of(x)
        return self._terms("v_tail", dx, 0).eval(self.profile, np.zeros_like(s), s)

    def int_v_from_zero(self, x, y, b=0, normalization="decay"):
        """Tables of int_0^x v(x', y) dx', y-derivative b.

        Closed form: the x-antiderivative of c * s^{q2/2} terms is
        c * s^{q2/2 + 1}/(q2/2 + 1) except the f-dependent parts, which are
        integrated numerically; only needed under the cut-off transition
        where everything is exponentially small, so a modest fixed
        quadrature suffices.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n = 33
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        xs = np.linspace(0.0, 1.0, n)
        X, Yb = np.broadcast_arrays(x, y)
        ts = X[..., None] * xs  # straight-line quadrature nodes 0 -> x
        vals = self.v_partial(ts, Yb[..., None], 0, b, normalization=normalization)
        w = np.full(n, 1.0)
        w[0] = w[-1] = 0.5
        out = (vals * w).sum(axis=-1) * (X / (n - 1))
        return out

    def monotonicity(self, n=201):
        """(m0, y0): positive lower bound of d(u_total)/dy near the wall."""
        xs = np.linspace(-self.L, 0.0, 41)
        ys = np.linspace(0.0, 3.0, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        uy = self.u_partial(X, Y, 0, 1)
        y0 = 3.0
        m0 = float(uy.min())
        return m0, y0
