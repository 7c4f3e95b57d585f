"""Graded channel meshes and scalar fields on them.

The channel is (-L, 0) x (-1, 1).  Meshes are tensor products of 1D node
sets graded to resolve the O(eps) streamwise layer at X = 0 and the
O(sqrt(eps)) wall layers at Y = +-1.
"""

from __future__ import annotations

import numpy as np

from .calculus import derivative_matrix, geometric_band, trapezoid_weights


class GridError(ValueError):
    pass


class ChannelGrid:
    """Tensor-product mesh of the channel (-L, 0) x (-1, 1).

    Attributes
    ----------
    L, eps : float
        Channel length and viscosity; both fixed at construction.
    x, y : ndarray
        Strictly increasing node coordinates with exact endpoints
        -L, 0 and -1, 1.
    """

    def __init__(self, L, eps, x, y, resolution=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (np.all(np.diff(x) > 0) and np.all(np.diff(y) > 0)):
            raise GridError("node arrays must be strictly increasing")
        if not (x[0] == -L and x[-1] == 0.0 and y[0] == -1.0 and y[-1] == 1.0):
            raise GridError("grid endpoints must be exactly -L, 0 and -1, 1")
        self.L = float(L)
        self.eps = float(eps)
        self.x = x
        self.y = y
        self.resolution = resolution
        self.x.setflags(write=False)
        self.y.setflags(write=False)
        self._ops = {}

    @property
    def nx(self):
        return self.x.size

    @property
    def ny(self):
        return self.y.size

    @property
    def shape(self):
        return (self.nx, self.ny)

    def meshgrid(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def diff_matrix(self, axis, order):
        """Cached sparse derivative operator along 'x' (axis 0) or 'y' (axis 1)."""
        key = (axis, order)
        if key not in self._ops:
            nodes = self.x if axis in (0, "x", "X") else self.y
            self._ops[key] = derivative_matrix(nodes, order)
        return self._ops[key]

    def quad_weights(self):
        """Tensor trapezoidal quadrature weights, shape (nx, ny)."""
        return np.outer(trapezoid_weights(self.x), trapezoid_weights(self.y))

    def refined(self, factor=2):
        """Grid with every cell split ``factor`` times (for refinement studies)."""
        def split(nodes):
            out = [nodes[0]]
            for a, b in zip(nodes[:-1], nodes[1:]):
                out.extend(a + (b - a) * np.arange(1, factor + 1) / factor)
            return np.array(out)

        return ChannelGrid(self.L, self.eps, split(self.x), split(self.y),
                           resolution=self.resolution)

    def __repr__(self):
        return (f"ChannelGrid(L={self.L}, eps={self.eps}, "
                f"nx={self.nx}, ny={self.ny})")


def make_grid(L, eps, resolution=64):
    """Graded channel mesh resolving both small scales.

    Target spacings: ~eps/4 within 10*eps of the outlet X=0, ~sqrt(eps)/4
    within 10*sqrt(eps) of the walls (scaled by 64/resolution), geometric
    coarsening in between.  Node count stays below 8*resolution per
    direction.

    Raises
    ------
    GridError
        If eps >= L (outside the small-viscosity regime), eps is not in
        (0, 1), resolution < 16, or a layer region would contain fewer
        than 4 nodes.
    """
    if L <= 0:
        raise GridError("channel length must be positive")
    if not 0 < eps < 1:
        raise GridError("viscosity must lie in (0, 1)")
    if eps >= L:
        raise GridError(f"regime violation: eps={eps} must be << L={L}")
    if resolution < 16:
        raise GridError("resolution must be at least 16 per direction")

    scale = 64.0 / resolution
    d_fine_x = 0.25 * eps * scale
    d_fine_y = 0.25 * np.sqrt(eps) * scale
    d_coarse_x = 4.0 * L / resolution
    d_coarse_y = 8.0 / resolution

    def dedup(nodes, tol):
        nodes = np.sort(nodes)
        keep = [nodes[0]]
        for v in nodes[1:]:
            if v - keep[-1] > tol:
                keep.append(v)
        return np.array(keep)

    x_band = min(10.0 * eps, 0.5 * L)
    if x_band / d_fine_x < 4:
        raise GridError("fewer than 4 nodes in the outlet layer; "
                        "increase resolution or decrease eps")
    fine_x = np.linspace(-x_band, 0.0, int(round(x_band / d_fine_x)) + 1)
    coarse_x = -geometric_band(x_band, L, d_fine_x, d_coarse_x)[::-1]
    x = dedup(np.concatenate([coarse_x, fine_x]), 0.2 * d_fine_x)
    x[0], x[-1] = -L, 0.0

    y_band = min(10.0 * np.sqrt(eps), 0.45)
    if y_band / d_fine_y < 4:
        raise GridError("fewer than 4 nodes in a wall layer; "
                        "increase resolution or decrease eps")
    fine_lo = np.linspace(-1.0, -1.0 + y_band, int(round(y_band / d_fine_y)) + 1)
    mid = geometric_band(-1.0 + y_band, 0.0, d_fine_y, d_coarse_y)
    lower = dedup(np.concatenate([fine_lo, mid]), 0.2 * d_fine_y)
    y = dedup(np.concatenate([lower, -lower[::-1]]), 0.2 * d_fine_y)
    y[0], y[-1] = -1.0, 1.0

    grid = ChannelGrid(L, eps, x, y, resolution=resolution)
    if grid.nx > 8 * resolution or grid.ny > 8 * resolution:
        raise GridError("grading produced more than 8x resolution nodes")
    return grid


class ScalarField:
    """Values of one scalar quantity on a ChannelGrid (immutable)."""

    def __init__(self, grid, values, label=""):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise GridError(f"value shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError(f"field {label!r} contains non-finite values")
        self.grid = grid
        self.values = values
        self.label = label
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, grid, fn, label=""):
        X, Y = grid.meshgrid()
        return cls(grid, fn(X, Y), label=label)

    def __repr__(self):
        return f"ScalarField({self.label!r}, shape={self.values.shape})"


def same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and not (
            np.array_equal(f.grid.x, g.x) and np.array_equal(f.grid.y, g.y)
        ):
            raise GridError("fields live on different grids")
    return g


def diff(f, axis, order=1):
    """Finite-difference derivative of a field along 'x'/'X' (0) or 'y'/'Y' (1).

    At least 2nd-order accurate on smooth fields; exact on polynomials of
    degree <= order + 2.  One-sided stencils at the boundary.
    """
    if order < 1 or order > 4:
        raise GridError("derivative order must be between 1 and 4")
    g = f.grid
    D = g.diff_matrix(axis, order)
    if axis in (0, "x", "X"):
        out = D @ f.values
    else:
        out = (D @ f.values.T).T
    return ScalarField(g, out, label=f"d{order}{axis}({f.label})")


def weighted_l2(f, w=1.0):
    """sqrt of the tensor-trapezoid quadrature of w * f^2.

    ``w`` may be a ScalarField or a nonnegative scalar.
    """
    if isinstance(w, ScalarField):
        same_grid(f, w)
        wv = w.values
    else:
        wv = float(w)
        if wv < 0:
            raise GridError("quadrature weight must be nonnegative")
    if isinstance(w, ScalarField) and np.any(w.values < 0):
        raise GridError("quadrature weight must be nonnegative")
    q = f.grid.quad_weights()
    return float(np.sqrt(np.sum(q * wv * f.values**2)))
