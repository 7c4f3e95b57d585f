"""Discrete calculus on nonuniform 1D node sets.

Finite-difference weights (Fornberg), sparse derivative operators,
trapezoidal/Simpson quadrature, cumulative integrals, and the smooth
cut-off / bump functions used throughout the construction.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


def fd_weights(nodes, x0, order):
    """Finite-difference weights for the ``order``-th derivative at ``x0``.

    Fornberg's algorithm on arbitrary distinct nodes.  Weights are exact
    for polynomials of degree <= len(nodes) - 1.

    Parameters
    ----------
    nodes : array_like
        Stencil abscissae, distinct but not necessarily sorted.
    x0 : float
        Evaluation point.
    order : int
        Derivative order (0 returns interpolation weights).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if order >= n:
        raise ValueError(f"need at least {order + 1} nodes for derivative order {order}")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_matrix(x, order, width=None):
    """Sparse derivative operator on the 1D node set ``x``.

    Uses a moving stencil of ``width`` nodes (default ``order + 3``,
    clamped to the grid), one-sided near the ends.  With p stencil nodes
    the operator is exact on polynomials of degree <= p - 1, hence at
    least 2nd-order accurate on smooth data.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < order + 2:
        raise ValueError(f"grid with {n} nodes cannot support derivative order {order}")
    p = min(n, (order + 3) if width is None else width)
    rows, cols, vals = [], [], []
    for i in range(n):
        lo = min(max(i - p // 2, 0), n - p)
        idx = np.arange(lo, lo + p)
        w = fd_weights(x[idx], x[i], order)
        rows.extend([i] * p)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def trapezoid_weights(x):
    """Quadrature weights of the composite trapezoidal rule on nodes ``x``."""
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def cumulative_integral(y, x, axis=0, initial=0.0):
    """Cumulative integral of samples ``y`` over nodes ``x`` along ``axis``.

    Piecewise-quadratic (Simpson-type) rule on the nonuniform grid via
    scipy's cumulative_simpson; falls back to trapezoid for < 3 nodes.
    """
    from scipy.integrate import cumulative_simpson, cumulative_trapezoid

    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        out = cumulative_trapezoid(y, x, axis=axis, initial=0.0)
    else:
        out = cumulative_simpson(y, x=x, axis=axis, initial=0.0)
    return out + initial


def geometric_band(start, stop, d0, d_max, ratio=1.15):
    """Nodes from ``start`` to ``stop`` with spacing growing geometrically.

    The first cell has width ``d0``; cells grow by ``ratio`` until they
    reach ``d_max``, then stay uniform.  Endpoints are hit exactly.
    """
    length = stop - start
    if length <= 0:
        raise ValueError("empty band")
    steps = []
    d = d0
    total = 0.0
    while total < length:
        steps.append(min(d, length - total))
        total += steps[-1]
        d = min(d * ratio, d_max)
    steps = np.array(steps)
    # rescale the last cells slightly so the band closes exactly
    steps *= length / steps.sum()
    return start + np.concatenate([[0.0], np.cumsum(steps)])


def smoothstep_c4(t):
    """C^4 monotone transition: 0 for t<=0, 1 for t>=1 (9th-degree polynomial)."""
    t = np.clip(t, 0.0, 1.0)
    # integral-normalized (1-s^2)^4 profile; all derivatives to order 4 vanish at ends
    return t**5 * (126.0 - 420.0 * t + 540.0 * t**2 - 315.0 * t**3 + 70.0 * t**4)


class CutoffFunction:
    """Smooth plateau cut-off: 1 on [0, inner], 0 beyond outer, C^4 in between.

    Used both for the wall-layer cut-off (argument Y+1 or 1-Y) and for the
    streamwise cut-off chi(-X/L) of the outlet profile.
    """

    def __init__(self, inner=1.0, outer=1.5):
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.inner = float(inner)
        self.outer = float(outer)

    def _t(self, z):
        return (np.asarray(z, dtype=float) - self.inner) / (self.outer - self.inner)

    def __call__(self, z):
        return 1.0 - smoothstep_c4(self._t(z))

    def derivative(self, z, k=1):
        """k-th derivative, computed from the polynomial transition."""
        if k == 0:
            return self(z)
        t = np.atleast_1d(self._t(z))
        scale = (self.outer - self.inner) ** (-k)
        coeffs = (126.0, -420.0, 540.0, -315.0, 70.0)
        powers = (5, 6, 7, 8, 9)
        val = np.zeros_like(t)
        inside = (t > 0.0) & (t < 1.0)
        ti = t[inside]
        acc = np.zeros_like(ti)
        for c, p in zip(coeffs, powers):
            if p - k >= 0:
                fac = float(np.prod(np.arange(p, p - k, -1)))
                acc += c * fac * ti ** (p - k)
        val[inside] = -acc * scale
        if np.isscalar(z) or np.ndim(z) == 0:
            return float(val[0])
        return val.reshape(np.shape(z))


class BumpFunction:
    """Compactly supported smooth bump h(y) on (center-width, center+width).

    kind="cosine-bump": amplitude * cos^6(pi t / 2), C^5 at the support edge.
    kind="smooth-bump": amplitude * exp(1 - 1/(1-t^2)), C^infinity.
    """

    def __init__(self, amplitude=0.04, center=0.0, width=0.5, kind="cosine-bump"):
        if kind not in ("cosine-bump", "smooth-bump"):
            raise ValueError(f"unknown bump kind {kind!r}")
        self.amplitude = float(amplitude)
        self.center = float(center)
        self.width = float(width)
        self.kind = kind

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)

    @property
    def sup_norm(self):
        return abs(self.amplitude)

    def __call__(self, y):
        t = (np.asarray(y, dtype=float) - self.center) / self.width
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        if self.kind == "cosine-bump":
            out[inside] = np.cos(0.5 * np.pi * t[inside]) ** 6
        else:
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return self.amplitude * out

    def derivative(self, y, k=1):
        """k-th derivative by nested analytic differentiation (k <= 4)."""
        if k == 0:
            return self(y)
        t = (np.asarray(y, dtype=float) - self.center) / self.width
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        if self.kind == "cosine-bump":
            # d^k/dt^k cos^6(pi t/2) via complex exponential expansion:
            # cos^6 u = (20 + 30 cos 2u + 12 cos 4u + 2 cos 6u) / 64, u = pi t / 2
            u = 0.5 * np.pi * ti
            acc = np.zeros_like(ti)
            for amp, m in ((30.0, 2), (12.0, 4), (2.0, 6)):
                phase = u * m + 0.5 * np.pi * k
                acc += amp * (0.5 * np.pi * m) ** k * np.cos(phase)
            out[inside] = acc / 64.0
        else:
            # derivatives of exp(1 - 1/(1-t^2)) via stepwise FD-free recursion
            # use exact autodiff through g(t) = 1 - 1/(1-t^2)
            vals = _mollifier_derivs(ti, k)
            out[inside] = vals
        return self.amplitude * out / self.width**k


def _mollifier_derivs(t, k):
    """k-th t-derivative of exp(1 - 1/(1-t^2)) for |t|<1, k <= 4."""
    s = 1.0 - t**2
    g = 1.0 - 1.0 / s
    # derivatives of g
    g1 = -2.0 * t / s**2
    g2 = -(2.0 * s + 8.0 * t**2) / s**3
    g3 = -(24.0 * t * s + 48.0 * t**3) / s**4
    g4 = -(24.0 * s**2 + 288.0 * t**2 * s + 384.0 * t**4) / s**5
    e = np.exp(g)
    if k == 1:
        return e * g1
    if k == 2:
        return e * (g2 + g1**2)
    if k == 3:
        return e * (g3 + 3.0 * g1 * g2 + g1**3)
    if k == 4:
        return e * (g4 + 4.0 * g1 * g3 + 3.0 * g2**2 + 6.0 * g1**2 * g2 + g1**4)
    raise ValueError("mollifier derivatives implemented for k <= 4")


def loglog_slope(eps, values):
    """Least-squares slope of log(values) vs log(eps) with a confidence half-width.

    Returns (slope, half_width).  Points with nonpositive values are dropped.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (values > 0) & (eps > 0)
    if mask.sum() < 2:
        return float("nan"), float("inf")
    lx, ly = np.log(eps[mask]), np.log(values[mask])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    n = lx.size
    if n > 2 and res.size:
        sigma2 = res[0] / (n - 2)
        sxx = np.sum((lx - lx.mean()) ** 2)
        half = 2.0 * np.sqrt(sigma2 / sxx)
    else:
        half = 0.0
    return float(coef[0]), float(half)
