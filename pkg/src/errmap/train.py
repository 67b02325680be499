"""Physics-informed training of the hard-constrained networks.

With every initial/boundary condition enforced by construction, the loss is
just the mean squared PDE residual over a fixed set of interior collocation
points, minimized full-batch with Adam.  Runs are deterministic: the same
config reproduces bit-identical parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, TrainingError
from .network import MlpParams, init_params, loss_gradient
from .problems import (JetBatch, apply_operator, constrain_jets, get_problem,
                       net_features, training_hess_pairs)


@dataclass
class TrainConfig:
    problem: str
    n_collocation: int = 10000
    iterations: int = 10000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    resample_each_iter: bool = False
    divergence_limit: float = 1e6
    problem_params: dict = None       # overrides for alpha/beta/c etc.

    def make_problem(self):
        return get_problem(self.problem, **(self.problem_params or {}))

    def validate(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.iterations > 0 and self.n_collocation < 1:
            raise ConfigError("need at least one collocation point to train")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        try:
            self.make_problem()
        except TypeError as exc:
            raise ConfigError(f"bad problem_params: {exc}") from exc
        return self


@dataclass
class LossHistory:
    losses: list = field(default_factory=list)
    # (iteration, elapsed wall-clock seconds) every checkpoint interval
    wall_clock: list = field(default_factory=list)


def _sample(problem, n, rng):
    x = rng.random(n)
    while np.any((x <= 0.0) | (x >= 1.0)):
        bad = (x <= 0.0) | (x >= 1.0)
        x[bad] = rng.random(int(bad.sum()))
    lo, hi = problem.x_bounds
    cols = [lo + (hi - lo) * x]
    if problem.id == "poisson2d":
        y = rng.random(n)
        while np.any((y <= 0.0) | (y >= 1.0)):
            bad = (y <= 0.0) | (y >= 1.0)
            y[bad] = rng.random(int(bad.sum()))
        ylo, yhi = problem.y_bounds
        cols.append(ylo + (yhi - ylo) * y)
    elif not problem.is_steady:
        # t in (0, t_max]: the open-at-zero side is where the IC is pinned
        cols.append(problem.t_max * (1.0 - rng.random(n)))
    return np.stack(cols, axis=1)


def sample_collocation(problem, n, seed):
    """n uniform interior space(-time) points, deterministic in the seed."""
    if n < 1:
        raise ConfigError("need n >= 1 collocation points")
    return _sample(problem, n, np.random.default_rng(seed))


def physics_loss(model, pts):
    """Mean squared constrained residual over the points (boundary terms vanish)."""
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        raise ConfigError("physics_loss needs a non-empty batch")
    r = np.asarray(apply_operator(model.problem, model.jets(pts), pts))
    return float(np.mean(r * r))


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def for_params(cls, params):
        arrays = params.weights + params.biases
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], step=0)


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update; returns (new params, new state)."""
    flat_g = grads.weights + grads.biases
    if not all(np.all(np.isfinite(g)) for g in flat_g):
        raise TrainingError(f"non-finite gradient entry at step {state.step + 1}")

    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate
    t = state.step + 1
    flat_p = params.weights + params.biases

    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(flat_p, flat_g, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))

    n_w = len(params.weights)
    out = MlpParams(layer_sizes=params.layer_sizes,
                    weights=new_p[:n_w], biases=new_p[n_w:], seed=params.seed)
    return out, AdamState(m=new_m, v=new_v, step=t)


def train(cfg, progress_every=0):
    """Full-batch residual training; returns (MlpParams, LossHistory)."""
    cfg.validate()
    problem = cfg.make_problem()
    params = init_params(problem.layer_sizes, cfg.seed)
    history = LossHistory()
    if cfg.iterations == 0:
        return params, history

    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_params(params)
    hess_pairs = training_hess_pairs(problem)

    def make_loss(pts):
        def loss_fn(leaves):
            raw = JetBatch(leaves.value, leaves.grad, leaves.hess)
            jet = constrain_jets(problem, pts, raw)
            r = apply_operator(problem, jet, pts)
            return (r ** 2).mean()
        return loss_fn

    pts = _sample(problem, cfg.n_collocation, rng)
    feats = net_features(problem, pts)
    loss_fn = make_loss(pts)

    started = time.perf_counter()
    for it in range(cfg.iterations):
        if cfg.resample_each_iter and it > 0:
            pts = _sample(problem, cfg.n_collocation, rng)
            feats = net_features(problem, pts)
            loss_fn = make_loss(pts)

        loss, grads = loss_gradient(params, feats, loss_fn, hess_pairs=hess_pairs)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {it}")
        if loss > cfg.divergence_limit:
            raise TrainingError(
                f"loss {loss:.3e} exceeded divergence limit at iteration {it}")

        params, state = adam_step(params, grads, state, cfg)
        history.losses.append(loss)
        if progress_every and (it + 1) % progress_every == 0:
            elapsed = time.perf_counter() - started
            history.wall_clock.append((it + 1, elapsed))
            print(f"iter {it + 1:>6d}  loss {loss:.6e}  ({elapsed:.1f}s)")
    history.wall_clock.append((cfg.iterations, time.perf_counter() - started))
    return params, history


def loss_history_to_csv(history, path):
    lines = ["iter,loss"]
    for i, loss in enumerate(history.losses):
        lines.append(f"{i},{format(loss, '.17g')}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
