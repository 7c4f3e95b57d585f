"""Viscosity sweeps: scale extraction, order-of-accuracy fits, stability
tables, and report emission."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .calculus import BumpFunction, loglog_slope
from .euler import ConstantProfile, CosineProfile, build_perturbed_shear, build_shear
from .grid import make_grid
from .hierarchy import assemble_hierarchy
from .outlet import assemble_outlet
from .remainder import (RemainderOperator, assemble_approx, energy_diagnostics,
                        hardy_check, picard_fixed_point, solve_linear_remainder)


class SweepError(RuntimeError):
    pass


def flow_from_spec(spec):
    """Build a background flow from a plain dict specification."""
    kind = spec.get("kind", "shear")
    prof_name = spec.get("profile", "constant")
    if prof_name == "constant":
        profile = ConstantProfile(float(spec.get("value", 1.0)))
    elif prof_name == "cosine":
        profile = CosineProfile(float(spec.get("offset", 2.0)),
                                float(spec.get("amplitude", 0.5)),
                                float(spec.get("freq", 1.0)))
    elif prof_name == "table":
        from .euler import TabulatedProfile
        ys = np.asarray([float(t) for t in str(spec["y"]).split(";")])
        us = np.asarray([float(t) for t in str(spec["u"]).split(";")])
        profile = TabulatedProfile(ys, us)
    else:
        raise SweepError(f"unknown profile {prof_name!r}")
    if kind == "shear":
        return build_shear(profile)
    if kind == "perturbed-shear":
        return build_perturbed_shear(profile, float(spec.get("delta", 0.01)),
                                     wave=float(spec.get("wave", 1.0)),
                                     shape=spec.get("shape", "ytilde"))
    raise SweepError(f"unknown flow kind {kind!r}")


def bump_from_spec(spec):
    return BumpFunction(amplitude=float(spec.get("amplitude", 0.04)),
                        center=float(spec.get("center", 0.0)),
                        width=float(spec.get("width", 0.4)),
                        kind=spec.get("kind", "cosine-bump"))


@dataclass
class SweepPlan:
    """One sweep: a decreasing geometric viscosity list plus the fixed
    construction choices (regime, truncations, flow, boundary shape)."""

    eps_list: tuple = (4e-3, 2e-3, 1e-3, 5e-4)
    regime: str = "concave-shear"
    K_a: int = 1
    K_r: int = 1
    L: float = 1.0
    flow_spec: dict = field(default_factory=lambda: {"kind": "shear", "profile": "constant", "value": 1.0})
    h_spec: dict = field(default_factory=lambda: {"kind": "cosine-bump", "amplitude": 0.04, "width": 0.4})
    resolution: int = 40
    s0: float = 2.0
    inflow: str = "blasius"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if len(eps) < 4:
            raise SweepError("sweep needs at least 4 viscosity points")
        if not all(a > b for a, b in zip(eps, eps[1:])):
            raise SweepError("viscosity list must be strictly decreasing")
        if max(eps) > self.L / 10.0 + 1e-15:
            raise SweepError(f"largest eps {max(eps)} exceeds L/10 = {self.L / 10}")
        if self.regime not in ("small-L", "concave-shear"):
            raise SweepError(f"unknown regime {self.regime!r}")
        if self.regime == "concave-shear":
            if self.flow_spec.get("kind", "shear") != "shear" or self.inflow != "blasius":
                raise SweepError("concave-shear regime requires a shear flow "
                                 "with Blasius-seeded layers")
        self.eps_list = eps


@dataclass
class FitResult:
    """Log-log slope fit of one quantity against viscosity."""

    name: str
    eps: tuple
    values: tuple
    slope: float
    half_width: float
    expected: float
    tolerance: float
    one_sided: bool = False
    passed: bool = False

    @classmethod
    def from_points(cls, name, eps, values, expected, tolerance, one_sided=False):
        slope, half = loglog_slope(np.asarray(eps), np.asarray(values))
        if one_sided:
            ok = slope >= expected - tolerance
        else:
            ok = abs(slope - expected) <= tolerance
        return cls(name=name, eps=tuple(map(float, eps)),
                   values=tuple(map(float, values)), slope=slope,
                   half_width=half, expected=expected, tolerance=tolerance,
                   one_sided=one_sided, passed=bool(ok))

    def as_lines(self):
        lines = [f"fit.{self.name}.slope={self.slope:.17g}",
                 f"fit.{self.name}.expected={self.expected:.17g}",
                 f"fit.{self.name}.tolerance={self.tolerance:.17g}",
                 f"fit.{self.name}.verdict={'pass' if self.passed else 'fail'}"]
        for e, v in zip(self.eps, self.values):
            lines.append(f"fit.{self.name}.point.{e:.6g}={v:.17g}")
        return lines


def build_case(plan, eps, K_a=None, K_r=None, h_amplitude=None):
    """Construct flow, hierarchy, outlet profile and grid for one eps."""
    flow = flow_from_spec(plan.flow_spec)
    K_a = plan.K_a if K_a is None else K_a
    K_r = plan.K_r if K_r is None else K_r
    hier = assemble_hierarchy(flow, K_a, eps, L=plan.L, inflow=plan.inflow,
                              s0=plan.s0)
    hspec = dict(plan.h_spec)
    if h_amplitude is not None:
        hspec["amplitude"] = h_amplitude
    h = bump_from_spec(hspec)
    out = assemble_outlet(flow, h, eps, K_r, L=plan.L, hierarchy=hier)
    grid = make_grid(plan.L, eps, plan.resolution)
    approx = assemble_approx(flow, hier, out, grid)
    return approx


def fit_outlet_shape(approx, flow, eps, n_y=21, window=5.0):
    """Per-Y exponential-rate fit of v_s near the outlet.

    The rate is extracted from log first differences of v_s along the
    grid nodes in |X| <= window*eps (robust to the smooth additive part
    the correctors contribute), then compared with the target u_e(0,Y)/eps.
    Also returns the correlation of v_s with the separable model
    h(Y) exp(X u_e(0, Y)/eps) over the window.
    """
    g = approx.grid
    h = approx.outlet.h
    lo, hi = h.support
    ys = np.linspace(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), n_y)
    xs = g.x[g.x >= -window * eps]
    if xs.size < 6:
        raise SweepError("insufficient fast-region nodes for the outlet fit; "
                         "use a finer grid (higher resolution)")
    V = approx.evaluator.partial("v", 0, 0, xs[:, None], ys[None, :])
    rates = np.full(ys.size, np.nan)
    for j in range(ys.size):
        d = np.diff(V[:, j])
        good = np.abs(d) > 1e-13 * np.abs(V[:, j]).max()
        if good.sum() < 4 or (not np.all(d[good] > 0) and not np.all(d[good] < 0)):
            continue
        xm = 0.5 * (xs[1:] + xs[:-1])[good]
        A = np.vstack([xm, np.ones_like(xm)]).T
        coef, *_ = np.linalg.lstsq(A, np.log(np.abs(d[good])), rcond=None)
        rates[j] = coef[0]
    target = flow.u(np.zeros_like(ys), ys) / eps
    ratio = rates / target
    model = h(ys)[None, :] * np.exp(xs[:, None] * target[None, :])
    # correlation over the window (mean-subtracted, offset-insensitive)
    corr = float(np.corrcoef(V.ravel(), model.ravel())[0, 1])
    return {"ys": ys, "rates": rates, "target": target,
            "ratio": ratio, "correlation": corr}


def outlet_thickness(approx, eps, y_star=None):
    """|X| at which |v_s(X, Y*)| falls to 1/e of its outlet value."""
    from scipy.optimize import brentq
    h = approx.outlet.h
    y0 = h.center if y_star is None else y_star
    v0 = float(approx.evaluator.partial("v", 0, 0, np.array([0.0]), np.array([y0]))[0])
    if abs(v0) < 1e-14:
        raise SweepError("outlet trace vanishes at the probe height")
    tgt = abs(v0) / np.e

    def fn(X):
        return abs(float(approx.evaluator.partial(
            "v", 0, 0, np.array([X]), np.array([y0]))[0])) - tgt

    return float(-brentq(fn, -10.0 * eps, 0.0, xtol=1e-3 * eps))


def prandtl_thickness(hier, flow, x_station=None):
    """Wall distances where u_a recovers 99% of the background."""
    from scipy.optimize import brentq
    L = hier.L
    xs = -L / 2 if x_station is None else x_station
    out = {}
    for s in (-1, 1):
        def fn(d):
            Y = s * (1.0 - d)
            ua = float(hier.evaluator.partial("u", 0, 0, np.array([xs]), np.array([Y]))[0])
            ue = float(flow.u(np.array([xs]), np.array([Y]))[0])
            return ua / ue - 0.99

        out[s] = float(brentq(fn, 1e-6, 0.8, xtol=1e-10))
    return out


def boundary_trace_errors(approx):
    """Outflow-trace gaps of the outlet profile against its targets."""
    out = approx.outlet
    h = out.h
    lo, hi = h.support
    ys = np.linspace(lo, hi, 201)
    v_err = float(np.abs(out.outflow_trace_v(ys) - h(ys)).max())
    u_lead = out.leading_u_trace(ys)
    u_err = float(np.abs(out.outflow_trace_u(ys) - u_lead).max())
    ue = out.flow.u(np.zeros_like(ys), ys)
    u_err_literal = float(np.abs(out.outflow_trace_u(ys) - out.eps * h(ys) / ue).max())
    return {"v_trace_err": v_err, "u_trace_err": u_err,
            "u_trace_err_literal": u_err_literal}


def singular_coefficient_norms(approx):
    """sup |Lap v_r| and sup |X Lap v_r| (the weighted-damping bookkeeping)."""
    g = approx.grid
    X, Y = g.meshgrid()
    lap_vr = (approx.outlet.partial("v", 2, 0, X, Y)
              + approx.outlet.partial("v", 0, 2, X, Y))
    return {"lap_vr_sup": float(np.abs(lap_vr).max()),
            "x_lap_vr_sup": float(np.abs(X * lap_vr).max())}


def smooth_rhs(L):
    def f(X, Y):
        return np.sin(np.pi * X / L) * np.sin(np.pi * (Y + 1.0))
    return f


def run_case(plan, eps):
    """Full per-viscosity pipeline; returns a flat dict of quantities."""
    flow = flow_from_spec(plan.flow_spec)
    approx = build_case(plan, eps)
    hier = approx.hierarchy
    g = approx.grid
    out = {"eps": eps}
    out["R_sup"] = approx.r_norms["sup"]
    out["R_l2"] = approx.r_norms["l2"]
    X, Y = g.meshgrid()
    E = hier.evaluator.curl_residual(X, Y, eps)
    out["Ea_sup"] = float(np.abs(E).max())
    Mu, Mv = hier.momentum_residual(X, Y)
    out["Mu_sup"] = float(np.abs(Mu).max())
    out["Mv_sup"] = float(np.abs(Mv).max())
    out["transport_defect"] = hier.transport_defect_sup()

    out["outlet_thickness"] = outlet_thickness(approx, eps)
    th = prandtl_thickness(hier, flow)
    out["prandtl_thickness_lower"] = th[-1]
    out["prandtl_thickness_upper"] = th[1]
    out.update(boundary_trace_errors(approx))
    shape = fit_outlet_shape(approx, flow, eps)
    good = np.isfinite(shape["ratio"])
    out["rate_ratio_worst"] = float(np.abs(shape["ratio"][good] - 1.0).max()) if good.any() else float("nan")
    out["shape_correlation"] = shape["correlation"]
    out.update(singular_coefficient_norms(approx))

    op = RemainderOperator(approx)
    sol = solve_linear_remainder(approx, smooth_rhs(plan.L), operator=op)
    out["stability_ratio"] = sol.stability_ratio
    out["h3_coefficient"] = sol.report.l2_third * eps**3 / max(sol.f_l2, 1e-300)
    led = energy_diagnostics(sol, approx, eps, regime=plan.regime,
                             h_sup=bump_from_spec(plan.h_spec).sup_norm)
    out["energy_basic_constant"] = led.inequalities["basic_constant"]
    out["energy_weighted_constant"] = led.inequalities["weighted_constant"]
    out["flux_lower"] = led.terms["flux_lower"]
    out["flux_upper"] = led.terms["flux_upper"]
    out["flux_signs_ok"] = 1.0 if all(led.signs.values()) else 0.0

    ua = approx.coefficient("u_a")
    hres = hardy_check(ua, eps, trials=200, seed=plan.seed)
    out["hardy1_constant"] = hres["hardy1_constant"]
    out["hardy2_constant"] = hres["hardy2_constant"]

    _, tr = picard_fixed_point(approx, rhs=smooth_rhs(plan.L),
                               rhs_scale=eps ** 6.5)
    out["picard_iterations"] = tr["iterations"]
    out["picard_ratio"] = max(tr["ratios"]) if tr["ratios"] else 0.0
    return out


def run_sweep(plan, out_dir=None, quantities=None):
    """Execute the sweep, fit the scale laws, and emit reports.

    Per-eps failures are recorded and the sweep continues on the other
    points; the resulting table is marked incomplete.  Returns a dict
    with per-eps rows, FitResults, and verdicts.
    """
    rows = {}
    failures = {}
    if plan.workers > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=plan.workers) as ex:
            futs = {ex.submit(run_case, plan, e): e for e in plan.eps_list}
            for fut in cf.as_completed(futs):
                e = futs[fut]
                try:
                    rows[e] = fut.result()
                except Exception as exc:   # noqa: BLE001 - recorded per point
                    failures[e] = str(exc)
    else:
        for e in plan.eps_list:
            try:
                rows[e] = run_case(plan, e)
            except Exception as exc:       # noqa: BLE001
                failures[e] = str(exc)

    eps_ok = [e for e in plan.eps_list if e in rows]
    fits = []

    def table(name):
        return [rows[e][name] for e in eps_ok]

    if len(eps_ok) >= 3:
        fits.append(FitResult.from_points(
            "residual_order", eps_ok, table("R_sup"),
            expected=(plan.K_a + 1) / 2.0, tolerance=0.25, one_sided=True))
        fits.append(FitResult.from_points(
            "momentum_order", eps_ok, table("Mu_sup"),
            expected=(plan.K_a + 1) / 2.0, tolerance=0.25, one_sided=True))
        fits.append(FitResult.from_points(
            "outlet_thickness", eps_ok, table("outlet_thickness"),
            expected=1.0, tolerance=0.1))
        fits.append(FitResult.from_points(
            "prandtl_thickness_lower", eps_ok, table("prandtl_thickness_lower"),
            expected=0.5, tolerance=0.05))
        fits.append(FitResult.from_points(
            "prandtl_thickness_upper", eps_ok, table("prandtl_thickness_upper"),
            expected=0.5, tolerance=0.05))
        if plan.K_a >= 1 and plan.K_r >= 1:
            fits.append(FitResult.from_points(
                "v_trace", eps_ok, table("v_trace_err"),
                expected=0.5, tolerance=0.1))
            fits.append(FitResult.from_points(
                "u_trace", eps_ok, table("u_trace_err"),
                expected=1.5, tolerance=0.2))
        fits.append(FitResult.from_points(
            "lap_vr", eps_ok, table("lap_vr_sup"), expected=-2.0, tolerance=0.2))
        fits.append(FitResult.from_points(
            "x_lap_vr", eps_ok, table("x_lap_vr_sup"), expected=-1.0, tolerance=0.2))

    verdicts = {f"fit.{f.name}": f.passed for f in fits}
    if eps_ok:
        sr = table("stability_ratio")
        verdicts["stability_within_10x"] = max(sr) / max(min(sr), 1e-300) < 10.0
        verdicts["rate_within_5pct"] = max(table("rate_ratio_worst")) <= 0.05
        verdicts["correlation_above_099"] = min(table("shape_correlation")) >= 0.99
        verdicts["flux_signs"] = all(r["flux_signs_ok"] > 0 for r in rows.values())
        verdicts["picard_max_20_iters"] = max(table("picard_iterations")) <= 20
        verdicts["picard_ratio_below_sqrt_eps"] = all(
            rows[e]["picard_ratio"] <= np.sqrt(e) for e in eps_ok)
        ec = table("energy_basic_constant")
        mid = 0.5 * (max(ec) + min(ec))
        verdicts["energy_constant_stable"] = (max(ec) - mid) <= 0.5 * mid + 1e-300
    verdicts["complete"] = not failures

    report = {"rows": rows, "failures": failures, "fits": fits,
              "verdicts": verdicts, "plan": asdict(plan)}
    if out_dir:
        emit_reports(report, out_dir)
    return report


def emit_reports(report, out_dir, plots=False):
    """CSV tables per quantity, a verdict summary, optional fit plots."""
    os.makedirs(out_dir, exist_ok=True)
    rows = report["rows"]
    eps_sorted = sorted(rows, reverse=True)
    names = sorted({k for r in rows.values() for k in r} - {"eps"})
    for name in names:
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w") as fh:
            fh.write("epsilon,value\n")
            for e in eps_sorted:
                if name in rows[e]:
                    fh.write(f"{e:.17g},{rows[e][name]:.17g}\n")
    lines = []
    for f in report["fits"]:
        lines.extend(f.as_lines())
    for k, v in sorted(report["verdicts"].items()):
        lines.append(f"verdict.{k}={'pass' if v else 'fail'}")
    for e, msg in report["failures"].items():
        lines.append(f"failure.{e:.6g}={msg}")
    with open(os.path.join(out_dir, "verdicts.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if plots:
        plot_fits(report, out_dir)


def plot_fits(report, out_dir):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    for f in report["fits"]:
        eps = np.asarray(f.eps)
        vals = np.asarray(f.values)
        good = vals > 0
        if good.sum() < 2:
            continue
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.loglog(eps[good], vals[good], "ko", label=f"slope {f.slope:.2f}")
        ref = vals[good][0] * (eps[good] / eps[good][0]) ** f.slope
        ax.loglog(eps[good], ref, "k--")
        ax.set_xlabel("viscosity")
        ax.set_ylabel(f.name)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, f"fit_{f.name}.svg"))
        plt.close(fig)
