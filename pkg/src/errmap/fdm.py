"""Structured-grid finite differences: operators, solves, and time marches.

Spatial operators use the central stencils (second order, exact on
quadratics).  Dirichlet problems carry identity boundary rows in their
assembled form and keep boundary nodes pinned to zero during marches;
the periodic problem works on the k-1 unique nodes and materializes the
duplicated endpoint only in output fields.

Time stepping follows the causal structure: Crank-Nicolson for first-order
time derivatives (implicit, unconditionally stable), explicit central
differences for second-order ones (CFL-limited).  Both discretize

    u_t  = L u - S          {I - dt/2 L} u^{n+1} = {I + dt/2 L} u^n
                                                   - dt/2 (S^n + S^{n+1})
    u_tt = L u - S          u^{n+1} = 2 u^n + dt^2 (L u^n - S^n) - u^{n-1}

so a defect source S = R integrates the error equation D[e] = -R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError, SolverError, StabilityError

_PIVOT_FLOOR = 1e-14
_CG_MAX_ITER = 20000
_STEADY_TOL = 1e-10


# ---------------------------------------------------------------------------
# grid and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform structured grid; nodes include both boundaries."""

    spatial_dims: int
    k: int                     # nodes per spatial dimension
    x_bounds: tuple = (0.0, 1.0)
    y_bounds: tuple = None
    n_t: int = 0               # time nodes (0 for steady)
    t_max: float = 0.0

    def __post_init__(self):
        if self.k < 3:
            raise ConfigError(f"grid needs k >= 3 nodes per dimension, got {self.k}")
        if self.n_t and self.n_t < 2:
            raise ConfigError(f"time grid needs n_t >= 2 nodes, got {self.n_t}")

    @property
    def dx(self):
        return (self.x_bounds[1] - self.x_bounds[0]) / (self.k - 1)

    @property
    def dt(self):
        if not self.n_t:
            return 0.0
        return self.t_max / (self.n_t - 1)

    @property
    def x_nodes(self):
        return np.linspace(self.x_bounds[0], self.x_bounds[1], self.k)

    @property
    def y_nodes(self):
        lo, hi = self.y_bounds
        return np.linspace(lo, hi, self.k)

    @property
    def t_nodes(self):
        return np.linspace(0.0, self.t_max, self.n_t)


def grid_for(problem, k, n_t=None):
    """Grid matching a problem's layout; time nodes default to k (k x k)."""
    if problem.is_steady:
        return Grid(spatial_dims=problem.spatial_dims, k=k,
                    x_bounds=problem.x_bounds, y_bounds=problem.y_bounds)
    return Grid(spatial_dims=1, k=k, x_bounds=problem.x_bounds,
                n_t=int(n_t or k), t_max=problem.t_max)


def grid_points(grid):
    """All nodes as an (n, D) matrix in natural-coordinate order.

    Steady 1D: (x,); steady 2D: (x, y) with x outer; time-dependent:
    (x, t) with time outer, matching field layout [t, x].
    """
    if grid.n_t:
        tt, xx = np.meshgrid(grid.t_nodes, grid.x_nodes, indexing="ij")
        return np.stack([xx.ravel(), tt.ravel()], axis=1)
    if grid.spatial_dims == 1:
        return grid.x_nodes[:, None]
    xx, yy = np.meshgrid(grid.x_nodes, grid.y_nodes, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def field_shape(grid):
    if grid.n_t:
        return (grid.n_t, grid.k)
    if grid.spatial_dims == 1:
        return (grid.k,)
    return (grid.k, grid.k)


@dataclass
class SpaceTimeField:
    """Scalar values on a grid: (k,), (k, k), or (n_t, k)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != field_shape(self.grid):
            raise InputError(
                f"field shape {self.values.shape} != grid shape "
                f"{field_shape(self.grid)}")
        if not np.all(np.isfinite(self.values)):
            raise InputError("field contains non-finite entries")


# ---------------------------------------------------------------------------
# linear solvers
# ---------------------------------------------------------------------------

def thomas_solve(lower, diag, upper, rhs):
    """Tridiagonal solve; lower[0] and upper[-1] are ignored."""
    n = len(diag)
    d = np.array(diag, dtype=float)
    r = np.array(rhs, dtype=float)
    u = np.asarray(upper, dtype=float)
    lo = np.asarray(lower, dtype=float)

    for i in range(1, n):
        if abs(d[i - 1]) < _PIVOT_FLOOR:
            raise SolverError(f"tridiagonal breakdown: pivot {d[i-1]:g} at row {i-1}")
        m = lo[i] / d[i - 1]
        d[i] -= m * u[i - 1]
        r[i] -= m * r[i - 1]
    if abs(d[-1]) < _PIVOT_FLOOR:
        raise SolverError(f"tridiagonal breakdown: pivot {d[-1]:g} at last row")

    x = np.empty(n)
    x[-1] = r[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (r[i] - u[i] * x[i + 1]) / d[i]
    return x


def cyclic_thomas_solve(lower, diag, upper, corner_ul, corner_ll, rhs):
    """Cyclic tridiagonal solve via Sherman-Morrison around Thomas.

    ``corner_ul`` is the [0, n-1] entry, ``corner_ll`` the [n-1, 0] entry.
    """
    n = len(diag)
    if n < 3:
        a = np.diag(np.asarray(diag, dtype=float))
        for i in range(1, n):
            a[i, i - 1] = lower[i]
            a[i - 1, i] = upper[i - 1]
        a[0, n - 1] += corner_ul
        a[n - 1, 0] += corner_ll
        try:
            return np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError("cyclic system singular") from exc

    gamma = -diag[0]
    if abs(gamma) < _PIVOT_FLOOR:
        gamma = 1.0
    d = np.array(diag, dtype=float)
    d[0] -= gamma
    d[-1] -= corner_ul * corner_ll / gamma

    y = thomas_solve(lower, d, upper, rhs)
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = corner_ll
    z = thomas_solve(lower, d, upper, u)

    vy = y[0] + corner_ul * y[-1] / gamma
    vz = z[0] + corner_ul * z[-1] / gamma
    denom = 1.0 + vz
    if abs(denom) < _PIVOT_FLOOR:
        raise SolverError("cyclic Sherman-Morrison breakdown")
    return y - (vy / denom) * z


def conjugate_gradient(apply_a, rhs, tol_abs, max_iter=_CG_MAX_ITER):
    """CG for SPD ``apply_a``; stops when ||A x - rhs||_inf <= tol_abs."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    if np.max(np.abs(r)) <= tol_abs:
        return x
    p = r.copy()
    rs = float(r.ravel() @ r.ravel())
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        alpha = rs / float(p.ravel() @ ap.ravel())
        x += alpha * p
        r -= alpha * ap
        if it % 64 == 0:
            # refresh against roundoff drift before testing convergence
            r = rhs - apply_a(x)
        if np.max(np.abs(r)) <= tol_abs:
            r = rhs - apply_a(x)
            if np.max(np.abs(r)) <= tol_abs:
                return x
        rs_new = float(r.ravel() @ r.ravel())
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(f"CG did not converge within {max_iter} iterations")


# ---------------------------------------------------------------------------
# spatial operators
# ---------------------------------------------------------------------------

class TridiagonalOperator:
    """Constant-stencil operator on a Dirichlet 1D grid."""

    kind = "tridiagonal"

    def __init__(self, grid, lo, di, up, cfl_speed=None):
        self.grid = grid
        self.lo, self.di, self.up = float(lo), float(di), float(up)
        self.cfl_speed = cfl_speed

    @property
    def n_reduced(self):
        return self.grid.k - 2

    def gather(self, full):
        return np.asarray(full, dtype=float)[1:-1].copy()

    def scatter(self, reduced):
        full = np.zeros(self.grid.k)
        full[1:-1] = reduced
        return full

    def apply(self, reduced):
        """L u on interior nodes (Dirichlet neighbors are zero)."""
        padded = np.concatenate(([0.0], reduced, [0.0]))
        return self.lo * padded[:-2] + self.di * padded[1:-1] + self.up * padded[2:]

    def shifted_solve(self, a, b, rhs):
        """Solve (a I + b L) u = rhs on the interior nodes."""
        n = self.n_reduced
        return thomas_solve(np.full(n, b * self.lo),
                            np.full(n, a + b * self.di),
                            np.full(n, b * self.up), rhs)

    def dense(self):
        """Full k x k matrix with identity boundary rows."""
        k = self.grid.k
        mat = np.zeros((k, k))
        mat[0, 0] = 1.0
        mat[k - 1, k - 1] = 1.0
        for i in range(1, k - 1):
            mat[i, i - 1] = self.lo
            mat[i, i] = self.di
            mat[i, i + 1] = self.up
        return mat


class CyclicTridiagonalOperator:
    """Constant-stencil operator on a periodic 1D grid (k-1 unique nodes)."""

    kind = "cyclic_tridiagonal"

    def __init__(self, grid, lo, di, up):
        self.grid = grid
        self.lo, self.di, self.up = float(lo), float(di), float(up)
        self.cfl_speed = None

    @property
    def n_reduced(self):
        return self.grid.k - 1

    def gather(self, full):
        return np.asarray(full, dtype=float)[:-1].copy()

    def scatter(self, reduced):
        return np.concatenate((reduced, [reduced[0]]))

    def apply(self, reduced):
        return (self.lo * np.roll(reduced, 1) + self.di * reduced
                + self.up * np.roll(reduced, -1))

    def shifted_solve(self, a, b, rhs):
        n = self.n_reduced
        return cyclic_thomas_solve(np.full(n, b * self.lo),
                                   np.full(n, a + b * self.di),
                                   np.full(n, b * self.up),
                                   b * self.lo, b * self.up, rhs)

    def dense(self):
        n = self.n_reduced
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, (i - 1) % n] += self.lo
            mat[i, i] += self.di
            mat[i, (i + 1) % n] += self.up
        return mat


class FivePointOperator:
    """5-point Laplacian on a Dirichlet 2D grid; interior unknowns only."""

    kind = "sparse_5point"

    def __init__(self, grid):
        self.grid = grid
        self.cfl_speed = None

    @property
    def n_interior(self):
        return self.grid.k - 2

    def gather(self, full):
        return np.asarray(full, dtype=float)[1:-1, 1:-1].copy()

    def scatter(self, reduced):
        full = np.zeros((self.grid.k, self.grid.k))
        full[1:-1, 1:-1] = reduced
        return full

    def apply(self, interior):
        padded = np.pad(interior, 1)
        lap = (padded[:-2, 1:-1] + padded[2:, 1:-1]
               + padded[1:-1, :-2] + padded[1:-1, 2:]
               - 4.0 * padded[1:-1, 1:-1])
        return lap / self.grid.dx ** 2

    def solve(self, rhs_interior, tol_abs):
        """Solve L u = rhs via Jacobi-scaled CG on the negated SPD system."""
        scale = self.grid.dx ** 2 / 4.0  # inverse of |diagonal|
        sol = conjugate_gradient(lambda v: -self.apply(v) * scale,
                                 -rhs_interior * scale,
                                 tol_abs * scale)
        return sol

    def dense(self):
        n = self.n_interior * self.n_interior
        mat = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            mat[:, j] = self.apply(e.reshape(self.n_interior, -1)).ravel()
        return mat


def assemble(problem, grid):
    """Discretized spatial operator for a problem on a grid."""
    dx2 = grid.dx ** 2
    if problem.id == "poisson1d":
        return TridiagonalOperator(grid, 1.0 / dx2, -2.0 / dx2, 1.0 / dx2)
    if problem.id == "heat":
        a = problem.alpha
        return TridiagonalOperator(grid, a / dx2, -2.0 * a / dx2, a / dx2)
    if problem.id == "wave":
        c2 = problem.c ** 2
        return TridiagonalOperator(grid, c2 / dx2, -2.0 * c2 / dx2, c2 / dx2,
                                   cfl_speed=problem.c)
    if problem.id == "drift_diffusion":
        a, b = problem.alpha, problem.beta
        adv = b / (2.0 * grid.dx)
        return CyclicTridiagonalOperator(grid, a / dx2 - adv, -2.0 * a / dx2,
                                         a / dx2 + adv)
    if problem.id == "poisson2d":
        return FivePointOperator(grid)
    raise ConfigError(f"no operator for problem {problem.id!r}")


# ---------------------------------------------------------------------------
# solves and marches
# ---------------------------------------------------------------------------

def solve_steady(op, rhs):
    """Solve L u = rhs; Dirichlet rows of rhs must be zero."""
    rhs = np.asarray(rhs, dtype=float)
    tol = _STEADY_TOL * max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)

    if op.kind == "tridiagonal":
        if rhs.shape != (op.grid.k,):
            raise InputError(f"rhs shape {rhs.shape} != ({op.grid.k},)")
        if rhs[0] != 0.0 or rhs[-1] != 0.0:
            raise InputError("Dirichlet rows of rhs must be zero")
        u = op.scatter(op.shifted_solve(0.0, 1.0, op.gather(rhs)))
        res = np.max(np.abs(op.apply(op.gather(u)) - op.gather(rhs)))
    elif op.kind == "sparse_5point":
        k = op.grid.k
        if rhs.shape != (k, k):
            raise InputError(f"rhs shape {rhs.shape} != ({k}, {k})")
        ring = np.concatenate([rhs[0], rhs[-1], rhs[:, 0], rhs[:, -1]])
        if np.any(ring != 0.0):
            raise InputError("Dirichlet rows of rhs must be zero")
        u = op.scatter(op.solve(op.gather(rhs), tol))
        res = np.max(np.abs(op.apply(op.gather(u)) - op.gather(rhs)))
    elif op.kind == "cyclic_tridiagonal":
        n = op.n_reduced
        if rhs.shape not in ((n,), (op.grid.k,)):
            raise InputError(f"rhs shape {rhs.shape} incompatible with cyclic grid")
        reduced = rhs[:n]
        u = op.scatter(op.shifted_solve(0.0, 1.0, reduced))
        res = np.max(np.abs(op.apply(u[:n]) - reduced))
    else:
        raise ConfigError(f"unknown operator kind {op.kind!r}")

    if res > tol:
        raise SolverError(f"steady solve residual {res:.3e} exceeds {tol:.3e}")
    return u


def _source_rows(op, source, n_t):
    if source is None:
        return None
    source = np.asarray(source, dtype=float)
    if source.shape[0] != n_t:
        raise InputError(f"source has {source.shape[0]} rows, grid has {n_t}")
    return np.stack([op.gather(source[i]) for i in range(n_t)])


def crank_nicolson_march(op, u0, source, grid):
    """March u_t = L u - S from u0; returns the full space-time field."""
    n_t = grid.n_t
    dt = grid.dt
    src = _source_rows(op, source, n_t)

    out = np.zeros((n_t, grid.k))
    u = op.gather(np.asarray(u0, dtype=float))
    # materialize t=0 through the reduced layout: boundary rows stay pinned
    out[0] = op.scatter(u)
    for n in range(n_t - 1):
        rhs = u + 0.5 * dt * op.apply(u)
        if src is not None:
            rhs = rhs - 0.5 * dt * (src[n] + src[n + 1])
        u = op.shifted_solve(1.0, -0.5 * dt, rhs)
        out[n + 1] = op.scatter(u)
    return SpaceTimeField(grid=grid, values=out)


def central_time_march(op, u0, v0, source, grid):
    """March u_tt = L u - S from (u0, v0); explicit, CFL-checked."""
    n_t = grid.n_t
    dt = grid.dt
    if op.cfl_speed is not None:
        ratio = op.cfl_speed * dt / grid.dx
        if ratio > 1.0:
            raise StabilityError(
                f"CFL violated: c*dt/dx = {ratio:.6g} > 1; refine the time grid")
    src = _source_rows(op, source, n_t)

    out = np.zeros((n_t, grid.k))
    prev = op.gather(np.asarray(u0, dtype=float))
    out[0] = op.scatter(prev)
    v = op.gather(np.asarray(v0, dtype=float))

    accel = op.apply(prev) - (src[0] if src is not None else 0.0)
    curr = prev + dt * v + 0.5 * dt ** 2 * accel
    if n_t > 1:
        out[1] = op.scatter(curr)
    for n in range(1, n_t - 1):
        accel = op.apply(curr) - (src[n] if src is not None else 0.0)
        nxt = 2.0 * curr + dt ** 2 * accel - prev
        prev, curr = curr, nxt
        out[n + 1] = op.scatter(curr)
    return SpaceTimeField(grid=grid, values=out)


def solve_ibvp(problem, grid):
    """Reference FDM solution of the original problem on the grid."""
    from . import problems as pb

    op = assemble(problem, grid)
    if problem.is_steady:
        rhs = pb.source_term(problem, grid_points(grid)).reshape(field_shape(grid))
        if problem.spatial_dims == 1:
            rhs[0] = rhs[-1] = 0.0
        else:
            rhs[0, :] = rhs[-1, :] = 0.0
            rhs[:, 0] = rhs[:, -1] = 0.0
        return SpaceTimeField(grid=grid, values=solve_steady(op, rhs))

    u0 = pb.initial_condition(grid.x_nodes)
    if problem.time_order == 1:
        return crank_nicolson_march(op, u0, None, grid)
    return central_time_march(op, u0, np.zeros(grid.k), None, grid)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def field_to_csv(field, path):
    """Write ``t,x[,y],value`` rows (steady omits t), 17 significant digits."""
    g = field.grid
    lines = []
    if g.n_t:
        lines.append("t,x,value")
        for i, t in enumerate(g.t_nodes):
            for j, x in enumerate(g.x_nodes):
                lines.append(f"{_fmt(t)},{_fmt(x)},{_fmt(field.values[i, j])}")
    elif g.spatial_dims == 1:
        lines.append("x,value")
        for j, x in enumerate(g.x_nodes):
            lines.append(f"{_fmt(x)},{_fmt(field.values[j])}")
    else:
        lines.append("x,y,value")
        for i, x in enumerate(g.x_nodes):
            for j, y in enumerate(g.y_nodes):
                lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(field.values[i, j])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_columns(path):
    """Parse a field CSV back into named float columns."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = np.array(rows, dtype=float)
    return {name: cols[:, i] for i, name in enumerate(header)}
