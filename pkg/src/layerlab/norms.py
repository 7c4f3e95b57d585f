"""Weighted norms of remainder candidates, including the eps-weighted
combination that controls the remainder, and the quotient transform
q = phi / u_a with its wall regularization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, ScalarField, diff, same_grid, weighted_l2


class NormError(ValueError):
    pass


@dataclass(frozen=True)
class NormReport:
    """Constituents of the eps-weighted solution norm.

    x_norm = l2_grad + sqrt(eps) * l2_hess + sqrt(eps) * weighted_hess_q
             + eps**3 * l2_third
    """

    l2_grad: float
    l2_hess: float
    weighted_hess_q: float
    l2_third: float
    eps: float

    @property
    def x_norm(self):
        return (self.l2_grad
                + np.sqrt(self.eps) * self.l2_hess
                + np.sqrt(self.eps) * self.weighted_hess_q
                + self.eps**3 * self.l2_third)

    def as_lines(self):
        keys = ("l2_grad", "l2_hess", "weighted_hess_q", "l2_third", "eps")
        lines = [f"{k}={getattr(self, k):.17g}" for k in keys]
        lines.append(f"x_norm={self.x_norm:.17g}")
        return lines


def quotient(phi, u_a):
    """Quotient q = phi / u_a, regularized at the walls.

    In the interior q is the plain ratio; on the wall rows, where both phi
    and u_a vanish linearly, q is the one-sided limit phi_Y / u_aY.

    Raises
    ------
    NormError
        If u_a vanishes or changes sign away from the walls.
    """
    g = same_grid(phi, u_a)
    ua = u_a.values
    if np.any(ua[:, 1:-1] <= 0):
        raise NormError("u_a must be positive in the interior")
    q = np.empty_like(phi.values)
    q[:, 1:-1] = phi.values[:, 1:-1] / ua[:, 1:-1]
    phi_y = diff(phi, "y", 1).values
    ua_y = diff(u_a, "y", 1).values
    for j in (0, -1):
        denom = ua_y[:, j]
        if np.any(np.abs(denom) < 1e-14):
            raise NormError("u_a must vanish linearly at the walls (nonzero dY u_a)")
        q[:, j] = phi_y[:, j] / denom
    return ScalarField(g, q, label=f"quotient({phi.label})")


def gradient_norm(phi):
    px = diff(phi, "x", 1)
    py = diff(phi, "y", 1)
    q = phi.grid.quad_weights()
    return float(np.sqrt(np.sum(q * (px.values**2 + py.values**2))))


def hessian_norm(phi, weight=None):
    pxx = diff(diff(phi, "x", 1), "x", 1).values
    pxy = diff(diff(phi, "x", 1), "y", 1).values
    pyy = diff(diff(phi, "y", 1), "y", 1).values
    q = phi.grid.quad_weights()
    w = 1.0 if weight is None else weight.values
    return float(np.sqrt(np.sum(q * w * (pxx**2 + 2 * pxy**2 + pyy**2))))


def third_norm(phi):
    px = diff(phi, "x", 1)
    py = diff(phi, "y", 1)
    pxxx = diff(px, "x", 2).values
    pxxy = diff(diff(px, "x", 1), "y", 1).values
    pxyy = diff(diff(px, "y", 1), "y", 1).values
    pyyy = diff(py, "y", 2).values
    q = phi.grid.quad_weights()
    return float(np.sqrt(np.sum(
        q * (pxxx**2 + 3 * pxxy**2 + 3 * pxyy**2 + pyyy**2))))


def norm_X(phi, u_a, eps, bc_tol=1e-2):
    """NormReport of phi against the profile weight u_a.

    Checks the clamped boundary conditions (phi and its normal derivative
    vanish on the whole boundary) to ``bc_tol`` relative to sup|phi|, and
    requires u_a >= 0.  The default tolerance accommodates the one-sided
    stencil truncation of the trace check itself; fields produced by the
    remainder solver satisfy the conditions to roundoff.
    """
    same_grid(phi, u_a)
    if np.any(u_a.values < 0):
        raise NormError("u_a must be nonnegative")
    v = phi.values
    px = diff(phi, "x", 1).values
    py = diff(phi, "y", 1).values
    scale_v = max(np.abs(v).max(), 1e-300)
    scale_d = max(np.abs(px).max(), np.abs(py).max(), 1e-300)
    worst_v = max(np.abs(t).max() for t in (v[0, :], v[-1, :], v[:, 0], v[:, -1]))
    worst_d = max(np.abs(t).max() for t in (px[0, :], px[-1, :], py[:, 0], py[:, -1]))
    if worst_v > bc_tol * scale_v or worst_d > bc_tol * scale_d:
        raise NormError(
            f"phi violates clamped boundary conditions: traces {worst_v:.3e} "
            f"(value) / {worst_d:.3e} (normal derivative) exceed {bc_tol:.1e} "
            f"relative")
    q = quotient(phi, u_a)
    return NormReport(
        l2_grad=gradient_norm(phi),
        l2_hess=hessian_norm(phi),
        weighted_hess_q=hessian_norm(q, weight=u_a),
        l2_third=third_norm(phi),
        eps=float(eps),
    )
