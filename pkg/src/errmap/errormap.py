"""Residual-driven error maps, baselines, the certified bound, and metrics.

The error e = u - phi of a hard-constrained approximation to a linear PDE
solves the same PDE with the approximation's residual as a source and zero
initial/boundary data.  Integrating that defect equation on a grid yields a
pointwise error estimate e_res, compared here against the true error e_true
and the classical reference e_FDM = u_FDM - phi on the same grid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import ConfigError, InputError
from .fdm import (Grid, SpaceTimeField, assemble, central_time_march,
                  crank_nicolson_march, field_shape, grid_points, solve_steady)
from .problems import apply_operator

# residual fields share the grid-field carrier
ResidualField = SpaceTimeField


def evaluate_residual(model, problem, grid):
    """Residual R = D[phi] at every grid node, as a field."""
    pts = grid_points(grid)
    jets = model.jets(pts)
    r = apply_operator(problem, jets, pts)
    return SpaceTimeField(grid=grid, values=np.asarray(r).reshape(field_shape(grid)))


def solve_defect(problem, grid, residual):
    """Integrate D[e] = -R with zero initial/boundary data; returns e_res."""
    if residual.grid != grid:
        raise InputError("residual field lives on a different grid")
    op = assemble(problem, grid)
    r = residual.values

    if problem.is_steady:
        # laplacian(e) = -R with identity rows holding the boundary at zero
        rhs = -r.copy()
        if problem.spatial_dims == 1:
            rhs[0] = rhs[-1] = 0.0
        else:
            rhs[0, :] = rhs[-1, :] = 0.0
            rhs[:, 0] = rhs[:, -1] = 0.0
        return SpaceTimeField(grid=grid, values=solve_steady(op, rhs))

    zero = np.zeros(grid.k)
    if problem.time_order == 1:
        return crank_nicolson_march(op, zero, r, grid)
    # hard constraints also pin the initial error velocity to zero
    return central_time_march(op, zero, zero, r, grid)


def true_error(model, problem, grid):
    """e_true = u - phi on the grid (needs the analytic solution)."""
    from .problems import analytic_solution

    pts = grid_points(grid)
    diff = analytic_solution(problem, pts) - np.asarray(model.values(pts))
    return SpaceTimeField(grid=grid, values=diff.reshape(field_shape(grid)))


def fdm_baseline_error(model, problem, grid, u_fdm=None):
    """e_FDM = u_FDM - phi with u_FDM solved on the same grid."""
    from .fdm import solve_ibvp

    if u_fdm is None:
        u_fdm = solve_ibvp(problem, grid)
    pts = grid_points(grid)
    phi = np.asarray(model.values(pts)).reshape(field_shape(grid))
    return SpaceTimeField(grid=grid, values=u_fdm.values - phi)


# ---------------------------------------------------------------------------
# certified bound (heat only)
# ---------------------------------------------------------------------------

def gaussian_smooth(values, dx, sigma):
    """Discrete Gaussian smoothing, kernel truncated at 4 sigma, reflected ends."""
    half = max(1, int(math.ceil(4.0 * sigma / dx)))
    offsets = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (offsets * dx / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(values, half, mode="reflect")
    return np.convolve(padded, kernel, mode="valid")


def spatial_l2(values, dx):
    """Continuous L2 norm over the interval via the trapezoid rule."""
    sq = np.asarray(values, dtype=float) ** 2
    return math.sqrt(np.trapezoid(sq, dx=dx))


def bound_from_norm(norm_fn, omega, times, rtol=1e-8):
    """Integrate b' = omega b + ||R~(., t)|| with b(0) = 0 adaptively.

    Returns (curve, n_steps) where curve is a list of (t, b) pairs at the
    requested times and n_steps counts accepted integrator steps.
    """
    times = sorted(float(t) for t in times)
    if times[0] < 0.0:
        raise InputError("bound times must be non-negative")
    t_end = times[-1]
    if t_end == 0.0:
        return [(0.0, 0.0)], 0

    sol = solve_ivp(lambda s, y: [omega * y[0] + norm_fn(s)],
                    (0.0, t_end), [0.0], method="RK45",
                    rtol=rtol, atol=1e-12, dense_output=True)
    if not sol.success:
        raise ConfigError(f"bound integration failed: {sol.message}")
    curve = [(t, float(sol.sol(t)[0])) if t > 0.0 else (0.0, 0.0) for t in times]
    return curve, len(sol.t) - 1


def certified_bound(model, problem, spatial_k, times, sigma_dx=2.0, rtol=1e-8):
    """Semigroup upper bound b(t) for the heat problem (M = 1, omega = -alpha pi^2).

    The spatially smoothed residual norm ||R~(., s)||_2 is evaluated on
    demand at arbitrary s through the model, so the quadrature can take
    adaptive steps in time.  Returns (curve, n_steps).
    """
    if problem.id != "heat":
        raise ConfigError(f"certified bound supports only heat, not {problem.id}")
    omega = -problem.alpha * math.pi ** 2

    x = np.linspace(problem.x_bounds[0], problem.x_bounds[1], spatial_k)
    dx = (problem.x_bounds[1] - problem.x_bounds[0]) / (spatial_k - 1)
    sigma = sigma_dx * dx

    def norm_fn(s):
        pts = np.stack([x, np.full_like(x, s)], axis=1)
        jets = model.jets(pts)
        r = np.asarray(apply_operator(problem, jets, pts))
        return spatial_l2(gaussian_smooth(r, dx, sigma), dx)

    return bound_from_norm(norm_fn, omega, times, rtol=rtol)


# ---------------------------------------------------------------------------
# metrics and reports
# ---------------------------------------------------------------------------

def euclidean_accuracy(e_true, e_method):
    """||e_true - e_method||_2 as a plain Euclidean norm over grid points."""
    if e_true.grid != e_method.grid:
        raise InputError("accuracy metric needs fields on one grid")
    return float(np.linalg.norm((e_true.values - e_method.values).ravel()))


def l2_over_time(f):
    """Per-time-slice continuous spatial L2 curve of a time-dependent field."""
    g = f.grid
    if not g.n_t:
        raise InputError("l2_over_time needs a time-dependent field")
    return np.array([spatial_l2(f.values[i], g.dx) for i in range(g.n_t)])


@dataclass
class ErrorReport:
    """All error fields of one model on one grid, plus summary metrics."""

    problem: object
    grid: Grid
    residual: SpaceTimeField
    e_true: SpaceTimeField
    e_res: SpaceTimeField = None
    e_fdm: SpaceTimeField = None
    bound_curve: list = None
    bound_steps: int = 0
    metrics: dict = field(default_factory=dict)
    runtime_seconds: dict = field(default_factory=dict)


def accuracy_metrics(report):
    """Euclidean accuracies plus per-time L2 curves, keyed for metrics.json."""
    out = {}
    if report.e_res is not None:
        out["l2_true_res"] = euclidean_accuracy(report.e_true, report.e_res)
    if report.e_fdm is not None:
        out["l2_true_fdm"] = euclidean_accuracy(report.e_true, report.e_fdm)
    if report.grid.n_t:
        curves = {"t": report.grid.t_nodes.tolist(),
                  "e_true": l2_over_time(report.e_true).tolist()}
        if report.e_res is not None:
            curves["e_res"] = l2_over_time(report.e_res).tolist()
        if report.e_fdm is not None:
            curves["e_fdm"] = l2_over_time(report.e_fdm).tolist()
        out["l2_curves"] = curves
    if report.bound_curve is not None:
        out["bound_curve"] = [[t, b] for t, b in report.bound_curve]
    return out


def build_report(model, problem, grid, estimators=("res", "fdm"),
                 bound_times=None, sigma_dx=2.0):
    """Evaluate the residual and every requested error field on a grid."""
    unknown = set(estimators) - {"res", "fdm", "bound"}
    if unknown:
        raise ConfigError(f"unknown estimators {sorted(unknown)}")
    if "bound" in estimators and problem.id != "heat":
        raise ConfigError("the certified bound is only available for heat")

    timings = {}
    t0 = time.perf_counter()
    residual = evaluate_residual(model, problem, grid)
    timings["residual"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    e_true = true_error(model, problem, grid)
    timings["true_error"] = time.perf_counter() - t0

    report = ErrorReport(problem=problem, grid=grid, residual=residual,
                         e_true=e_true, runtime_seconds=timings)

    if "res" in estimators:
        t0 = time.perf_counter()
        report.e_res = solve_defect(problem, grid, residual)
        timings["defect_solve"] = time.perf_counter() - t0
    if "fdm" in estimators:
        t0 = time.perf_counter()
        report.e_fdm = fdm_baseline_error(model, problem, grid)
        timings["fdm_baseline"] = time.perf_counter() - t0
    if "bound" in estimators:
        t0 = time.perf_counter()
        times = bound_times if bound_times is not None else grid.t_nodes.tolist()
        report.bound_curve, report.bound_steps = certified_bound(
            model, problem, grid.k, times, sigma_dx=sigma_dx)
        timings["bound"] = time.perf_counter() - t0

    report.metrics = accuracy_metrics(report)
    return report
