"""The five benchmark initial-boundary value problems.

Each problem lives on the unit domain per spatial dimension with t in
[0, 1] for the time-dependent cases.  All admit closed-form solutions:

    poisson1d        u = sin(2 pi x),                 laplacian(u) = f
    poisson2d        u = sin(2 pi x) sin(pi y)
    heat             u = exp(-4 pi^2 alpha t) sin(2 pi x)
    drift_diffusion  u = exp(-4 pi^2 alpha t) sin(2 pi (x + beta t))
    wave             u = sin(2 pi x) cos(2 pi c t)

Points are passed as (n, D) arrays over each problem's natural coordinates:
(x,) for poisson1d, (x, y) for poisson2d, and (x, t) for the time-dependent
problems.  Jet-valued helpers are written generically so their inputs can be
plain arrays or tape variables; this lets the training loss reuse the exact
same constraint/operator code that evaluates residual fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError
from .network import forward_jet_batch

TWO_PI = 2.0 * math.pi

PROBLEM_IDS = ("poisson1d", "poisson2d", "heat", "drift_diffusion", "wave")

HIDDEN_LAYERS = (20, 20, 20)


@dataclass(frozen=True)
class ProblemSpec:
    """Benchmark problem: operator coefficients, BCs, domain, closed form."""

    id: str
    alpha: float = 0.05        # diffusivity (heat, drift_diffusion)
    beta: float = 2.0          # drift speed (drift_diffusion)
    c: float = 0.5             # wave speed
    x_bounds: tuple = (0.0, 1.0)
    y_bounds: tuple = None     # poisson2d only
    t_max: float = 0.0         # 0 for steady problems
    bc_kind: str = "dirichlet_zero"
    time_order: int = 0        # 0 steady, 1 parabolic, 2 hyperbolic

    @property
    def is_steady(self):
        return self.time_order == 0

    @property
    def spatial_dims(self):
        return 2 if self.id == "poisson2d" else 1

    @property
    def coord_names(self):
        if self.id == "poisson1d":
            return ("x",)
        if self.id == "poisson2d":
            return ("x", "y")
        return ("x", "t")

    @property
    def n_coords(self):
        return len(self.coord_names)

    @property
    def net_input_dim(self):
        # periodic problems feed (sin 2 pi x, cos 2 pi x, t) to the network
        if self.id == "drift_diffusion":
            return 3
        return self.n_coords

    @property
    def layer_sizes(self):
        return (self.net_input_dim, *HIDDEN_LAYERS, 1)


_DEFAULTS = {
    "poisson1d": dict(time_order=0),
    "poisson2d": dict(time_order=0, y_bounds=(0.0, 1.0)),
    "heat": dict(time_order=1, t_max=1.0),
    "drift_diffusion": dict(time_order=1, t_max=1.0, bc_kind="periodic"),
    "wave": dict(time_order=2, t_max=1.0),
}


def get_problem(problem_id, **overrides):
    """Problem spec by id, with Table-style defaults (alpha=1/20, beta=2, c=1/2)."""
    if problem_id not in _DEFAULTS:
        raise ConfigError(
            f"unknown problem {problem_id!r}; expected one of {PROBLEM_IDS}")
    kwargs = dict(_DEFAULTS[problem_id])
    kwargs.update(overrides)
    return ProblemSpec(id=problem_id, **kwargs)


def _check_points(p, pts):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != p.n_coords:
        raise InputError(
            f"{p.id}: expected points with {p.n_coords} coordinates "
            f"({', '.join(p.coord_names)}), got shape {pts.shape}")
    return pts


def in_domain(p, pts):
    """True where every coordinate lies inside the closed domain."""
    pts = _check_points(p, pts)
    lo_x, hi_x = p.x_bounds
    ok = (pts[:, 0] >= lo_x) & (pts[:, 0] <= hi_x)
    if p.id == "poisson2d":
        lo_y, hi_y = p.y_bounds
        ok &= (pts[:, 1] >= lo_y) & (pts[:, 1] <= hi_y)
    elif not p.is_steady:
        ok &= (pts[:, 1] >= 0.0) & (pts[:, 1] <= p.t_max)
    return ok


def _require_in_domain(p, pts):
    ok = in_domain(p, pts)
    if not np.all(ok):
        bad = np.asarray(pts)[~ok][0]
        raise InputError(f"{p.id}: point {bad} outside the domain")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def initial_condition(x):
    """u(x, 0) = sin(2 pi x), shared by every time-dependent benchmark."""
    return np.sin(TWO_PI * np.asarray(x, dtype=float))


def analytic_solution(p, pts):
    """Exact solution u at each point (vectorized)."""
    pts = _check_points(p, pts)
    _require_in_domain(p, pts)
    x = pts[:, 0]
    if p.id == "poisson1d":
        return np.sin(TWO_PI * x)
    if p.id == "poisson2d":
        return np.sin(TWO_PI * x) * np.sin(math.pi * pts[:, 1])
    t = pts[:, 1]
    if p.id == "heat":
        return np.exp(-4.0 * math.pi ** 2 * p.alpha * t) * np.sin(TWO_PI * x)
    if p.id == "drift_diffusion":
        return (np.exp(-4.0 * math.pi ** 2 * p.alpha * t)
                * np.sin(TWO_PI * (x + p.beta * t)))
    if p.id == "wave":
        return np.sin(TWO_PI * x) * np.cos(TWO_PI * p.c * t)
    raise ConfigError(f"unknown problem {p.id!r}")


def source_term(p, pts):
    """Poisson source f with laplacian(u) = f for the closed forms above."""
    if p.id not in ("poisson1d", "poisson2d"):
        raise InputError(f"source_term is only defined for Poisson, not {p.id}")
    pts = _check_points(p, pts)
    x = pts[:, 0]
    if p.id == "poisson1d":
        return -4.0 * math.pi ** 2 * np.sin(TWO_PI * x)
    y = pts[:, 1]
    return -5.0 * math.pi ** 2 * np.sin(TWO_PI * x) * np.sin(math.pi * y)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

class JetBatch:
    """Jet components of a scalar field over a batch of points.

    Components are stored per coordinate pair so they can hold either numpy
    arrays or tape variables.  ``hess[i][j]`` and ``hess[j][i]`` are the same
    object.
    """

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = list(grad)
        self.hess = [list(row) for row in hess]

    @classmethod
    def from_arrays(cls, value, grad, hess):
        d = grad.shape[1]
        g = [grad[:, i] for i in range(d)]
        h = [[hess[:, i, j] for j in range(d)] for i in range(d)]
        return cls(value, g, h)


def analytic_jet(p, pts):
    """Exact jets of the analytic solution (oracle for residual tests)."""
    pts = _check_points(p, pts)
    x = pts[:, 0]
    w = TWO_PI
    if p.id == "poisson1d":
        s, c = np.sin(w * x), np.cos(w * x)
        return JetBatch(s, [w * c], [[-w * w * s]])
    if p.id == "poisson2d":
        y = pts[:, 1]
        sx, cx = np.sin(w * x), np.cos(w * x)
        sy, cy = np.sin(math.pi * y), np.cos(math.pi * y)
        val = sx * sy
        gx = w * cx * sy
        gy = math.pi * sx * cy
        hxx = -w * w * sx * sy
        hyy = -math.pi ** 2 * sx * sy
        hxy = w * math.pi * cx * cy
        return JetBatch(val, [gx, gy], [[hxx, hxy], [hxy, hyy]])
    t = pts[:, 1]
    if p.id == "heat":
        lam = 4.0 * math.pi ** 2 * p.alpha
        decay = np.exp(-lam * t)
        s, c = np.sin(w * x), np.cos(w * x)
        val = decay * s
        return JetBatch(
            val,
            [decay * w * c, -lam * val],
            [[-w * w * val, -lam * decay * w * c],
             [-lam * decay * w * c, lam * lam * val]])
    if p.id == "drift_diffusion":
        lam = 4.0 * math.pi ** 2 * p.alpha
        decay = np.exp(-lam * t)
        phase = w * (x + p.beta * t)
        s, c = np.sin(phase), np.cos(phase)
        val = decay * s
        dx = decay * w * c
        dt = -lam * val + decay * w * p.beta * c
        dxx = -w * w * val
        dxt = -lam * decay * w * c - decay * w * w * p.beta * s
        dtt = (lam * lam * val - 2.0 * lam * decay * w * p.beta * c
               - decay * (w * p.beta) ** 2 * s)
        return JetBatch(val, [dx, dt], [[dxx, dxt], [dxt, dtt]])
    if p.id == "wave":
        wc = w * p.c
        s, c = np.sin(w * x), np.cos(w * x)
        st, ct = np.sin(wc * t), np.cos(wc * t)
        val = s * ct
        return JetBatch(
            val,
            [w * c * ct, -wc * s * st],
            [[-w * w * val, -w * wc * c * st],
             [-w * wc * c * st, -wc * wc * val]])
    raise ConfigError(f"unknown problem {p.id!r}")


def _entry(jet_part, what):
    if jet_part is None:
        raise InputError(f"jet is missing the {what} entry the operator needs")
    return jet_part


def apply_operator(p, jet, pts):
    """PDE residual R = D[field] at each point, from the field's jets."""
    pts = _check_points(p, pts)
    if p.id == "heat":
        return jet.grad[1] - p.alpha * _entry(jet.hess[0][0], "d2/dx2")
    if p.id == "drift_diffusion":
        return (jet.grad[1] - p.alpha * _entry(jet.hess[0][0], "d2/dx2")
                - p.beta * jet.grad[0])
    if p.id == "wave":
        return (_entry(jet.hess[1][1], "d2/dt2")
                - p.c ** 2 * _entry(jet.hess[0][0], "d2/dx2"))
    if p.id == "poisson1d":
        return _entry(jet.hess[0][0], "d2/dx2") - source_term(p, pts)
    if p.id == "poisson2d":
        return (_entry(jet.hess[0][0], "d2/dx2")
                + _entry(jet.hess[1][1], "d2/dy2") - source_term(p, pts))
    raise ConfigError(f"unknown problem {p.id!r}")


# ---------------------------------------------------------------------------
# hard constraints
# ---------------------------------------------------------------------------

def net_features(p, pts):
    """Map natural coordinates to network inputs."""
    pts = _check_points(p, pts)
    if p.id == "drift_diffusion":
        x, t = pts[:, 0], pts[:, 1]
        return np.stack([np.sin(TWO_PI * x), np.cos(TWO_PI * x), t], axis=1)
    return pts


def training_hess_pairs(p):
    """Network-input Hessian entries the residual loss actually consumes.

    Restricting jet propagation to these pairs roughly halves training
    cost; the unused mixed/time entries of the constrained jet come out
    as None and the residual never reads them.
    """
    if p.id in ("poisson1d", "heat"):
        return ((0, 0),)
    if p.id in ("poisson2d", "wave"):
        return ((0, 0), (1, 1))
    if p.id == "drift_diffusion":
        return ((0, 0), (0, 1), (1, 1))
    raise ConfigError(f"unknown problem {p.id!r}")


def constrain_jets(p, pts, raw):
    """Jets of the hard-constrained output from raw network jets.

    ``raw`` holds jets with respect to the network inputs (features for the
    periodic problem); the result holds jets with respect to the natural
    coordinates.  Entries may be arrays or tape variables; every operation
    here is an exact product/chain rule with analytic mask derivatives.
    Constrained entries whose raw second derivatives were not propagated
    (see :func:`training_hess_pairs`) come out as None.
    """
    pts = _check_points(p, pts)
    x = pts[:, 0]
    v = raw.value
    g = raw.grad
    h = raw.hess

    def have(*idx):
        return all(h[i][k] is not None for i, k in idx)

    if p.id == "poisson1d":
        m = x * (x - 1.0)
        mp = 2.0 * x - 1.0
        val = m * v
        dx = mp * v + m * g[0]
        dxx = 2.0 * v + 2.0 * mp * g[0] + m * h[0][0] if have((0, 0)) else None
        return JetBatch(val, [dx], [[dxx]])

    if p.id == "poisson2d":
        y = pts[:, 1]
        mx = x * (x - 1.0)
        mxp = 2.0 * x - 1.0
        my = y * (y - 1.0)
        myp = 2.0 * y - 1.0
        m = mx * my
        m_x = mxp * my
        m_y = mx * myp
        val = m * v
        dx = m_x * v + m * g[0]
        dy = m_y * v + m * g[1]
        dxx = 2.0 * my * v + 2.0 * m_x * g[0] + m * h[0][0] if have((0, 0)) else None
        dyy = 2.0 * mx * v + 2.0 * m_y * g[1] + m * h[1][1] if have((1, 1)) else None
        dxy = (mxp * myp * v + m_x * g[1] + m_y * g[0] + m * h[0][1]
               if have((0, 1)) else None)
        return JetBatch(val, [dx, dy], [[dxx, dxy], [dxy, dyy]])

    t = pts[:, 1]
    u0 = np.sin(TWO_PI * x)
    u0p = TWO_PI * np.cos(TWO_PI * x)
    u0pp = -TWO_PI ** 2 * np.sin(TWO_PI * x)

    if p.id in ("heat", "wave"):
        m = x * (x - 1.0)
        mp = 2.0 * x - 1.0
        # time mask t for first-order, t^2 for second-order problems
        if p.time_order == 1:
            w, wp, wpp = t, 1.0, 0.0
        else:
            w, wp, wpp = t * t, 2.0 * t, 2.0
        val = u0 + w * m * v
        dx = u0p + w * (mp * v + m * g[0])
        dt = wp * (m * v) + w * m * g[1]
        dxx = (u0pp + w * (2.0 * v + 2.0 * mp * g[0] + m * h[0][0])
               if have((0, 0)) else None)
        dxt = (wp * (mp * v + m * g[0]) + w * (mp * g[1] + m * h[0][1])
               if have((0, 1)) else None)
        dtt = (wpp * (m * v) + 2.0 * wp * m * g[1] + w * m * h[1][1]
               if have((1, 1)) else None)
        return JetBatch(val, [dx, dt], [[dxx, dxt], [dxt, dtt]])

    if p.id == "drift_diffusion":
        # features (s, c, t): chain rule from feature jets to (x, t) jets
        s = np.sin(TWO_PI * x)
        c = np.cos(TWO_PI * x)
        sp, cp = TWO_PI * c, -TWO_PI * s
        spp, cpp = -TWO_PI ** 2 * s, -TWO_PI ** 2 * c
        psi = v
        psi_x = sp * g[0] + cp * g[1]
        psi_t = g[2]
        psi_xx = (spp * g[0] + cpp * g[1]
                  + sp * sp * h[0][0] + 2.0 * sp * cp * h[0][1]
                  + cp * cp * h[1][1]
                  if have((0, 0), (0, 1), (1, 1)) else None)
        psi_xt = (sp * h[0][2] + cp * h[1][2]
                  if have((0, 2), (1, 2)) else None)
        psi_tt = h[2][2] if have((2, 2)) else None
        val = u0 + t * psi
        dx = u0p + t * psi_x
        dt = psi + t * psi_t
        dxx = u0pp + t * psi_xx if psi_xx is not None else None
        dxt = psi_x + t * psi_xt if psi_xt is not None else None
        dtt = 2.0 * psi_t + t * psi_tt if psi_tt is not None else None
        return JetBatch(val, [dx, dt], [[dxx, dxt], [dxt, dtt]])

    raise ConfigError(f"unknown problem {p.id!r}")


def hard_constrain(p, params, pt):
    """Jet2 of the constrained output at one point in natural coordinates."""
    from .network import Jet2

    pts = _check_points(p, np.asarray(pt, dtype=float))
    feats = net_features(p, pts)
    v, g, h = forward_jet_batch(params, feats)
    jet = constrain_jets(p, pts, JetBatch.from_arrays(v, g, h))
    d = p.n_coords
    grad = np.array([jet.grad[i][0] for i in range(d)])
    hess = np.array([[jet.hess[i][j][0] for j in range(d)] for i in range(d)])
    return Jet2(value=float(jet.value[0]), grad=grad, hess=hess)


# ---------------------------------------------------------------------------
# models: anything that can produce constrained jets on demand
# ---------------------------------------------------------------------------

class ConstrainedModel:
    """Hard-constrained network; evaluates jets/values at natural points."""

    def __init__(self, problem, params):
        if params.d_in != problem.net_input_dim:
            raise InputError(
                f"{problem.id}: network input dim {params.d_in} != "
                f"{problem.net_input_dim}")
        self.problem = problem
        self.params = params

    def jets(self, pts):
        pts = _check_points(self.problem, pts)
        feats = net_features(self.problem, pts)
        v, g, h = forward_jet_batch(self.params, feats)
        return constrain_jets(self.problem, pts, JetBatch.from_arrays(v, g, h))

    def values(self, pts):
        return self.jets(pts).value


class AnalyticModel:
    """Exact solution posing as a model; its residual is zero by definition."""

    def __init__(self, problem):
        self.problem = problem

    def jets(self, pts):
        return analytic_jet(self.problem, pts)

    def values(self, pts):
        return analytic_solution(self.problem, pts)
