import json

import numpy as np
import pytest

from errmap.exceptions import ConfigError, TrainingError
from errmap.network import MlpParams, ParamGrads, init_params
from errmap.problems import (AnalyticModel, ConstrainedModel, JetBatch,
                             get_problem)
from errmap.train import (AdamState, TrainConfig, adam_step, physics_loss,
                          sample_collocation, train)


def params_blob(p):
    return json.dumps([w.tolist() for w in p.weights]
                      + [b.tolist() for b in p.biases])


# --- collocation sampling -----------------------------------------------------

def test_sampling_deterministic():
    p = get_problem("heat")
    a = sample_collocation(p, 4, seed=3)
    b = sample_collocation(p, 4, seed=3)
    assert np.all(a == b)
    assert a.shape == (4, 2)


def test_sampling_strictly_interior():
    p = get_problem("heat")
    pts = sample_collocation(p, 5000, seed=1)
    x, t = pts[:, 0], pts[:, 1]
    assert np.all((x > 0.0) & (x < 1.0))
    assert np.all((t > 0.0) & (t <= 1.0))

    p2 = get_problem("poisson2d")
    pts2 = sample_collocation(p2, 2000, seed=1)
    assert np.all((pts2 > 0.0) & (pts2 < 1.0))


def test_sampling_mean_is_centered():
    p = get_problem("heat")
    pts = sample_collocation(p, 100_000, seed=7)
    assert abs(float(pts[:, 0].mean()) - 0.5) <= 0.01


# --- physics loss ---------------------------------------------------------------

def test_physics_loss_exact_solution_standin():
    for pid in ("heat", "poisson1d", "wave"):
        p = get_problem(pid)
        pts = sample_collocation(p, 64, seed=2)
        assert physics_loss(AnalyticModel(p), pts) <= 1e-20


def test_physics_loss_single_point_definition():
    p = get_problem("heat")

    class ConstantResidual:
        problem = p

        def jets(self, pts):
            n = len(pts)
            zero = np.zeros(n)
            return JetBatch(zero, [zero, np.full(n, 3.0)],
                            [[zero, zero], [zero, zero]])

    assert physics_loss(ConstantResidual(), np.array([[0.4, 0.3]])) == pytest.approx(9.0)


def test_physics_loss_matches_residual_field():
    from errmap.errormap import evaluate_residual
    from errmap.fdm import grid_for, grid_points

    p = get_problem("heat")
    model = ConstrainedModel(p, init_params(p.layer_sizes, 5))
    g = grid_for(p, 9)
    r = evaluate_residual(model, p, g)
    loss = physics_loss(model, grid_points(g))
    assert loss == pytest.approx(float(np.mean(r.values ** 2)), abs=1e-14)


def test_physics_loss_nonnegative_random_nets():
    p = get_problem("drift_diffusion")
    pts = sample_collocation(p, 32, seed=0)
    for seed in range(5):
        model = ConstrainedModel(p, init_params(p.layer_sizes, seed))
        assert physics_loss(model, pts) >= 0.0


# --- adam -----------------------------------------------------------------------

def tiny_params(theta):
    return MlpParams(layer_sizes=(1, 1),
                     weights=[np.array([[theta]])], biases=[np.zeros(1)])


def cfg_for(lr=0.1):
    return TrainConfig(problem="heat", learning_rate=lr)


def test_adam_first_step_magnitude():
    p = tiny_params(1.0)
    g = ParamGrads(weights=[np.array([[0.37]])], biases=[np.zeros(1)])
    out, state = adam_step(p, g, AdamState.for_params(p), cfg_for(lr=0.1))
    # bias-corrected first step moves by ~lr in the gradient direction
    assert out.weights[0][0, 0] == pytest.approx(1.0 - 0.1, abs=1e-8)
    assert state.step == 1


def test_adam_zero_gradient_keeps_params():
    p = tiny_params(0.5)
    g = ParamGrads(weights=[np.zeros((1, 1))], biases=[np.zeros(1)])
    state = AdamState.for_params(p)
    for _ in range(3):
        p, state = adam_step(p, g, state, cfg_for())
    assert p.weights[0][0, 0] == 0.5


def test_adam_rejects_nonfinite_gradient():
    p = tiny_params(1.0)
    g = ParamGrads(weights=[np.array([[np.nan]])], biases=[np.zeros(1)])
    with pytest.raises(TrainingError):
        adam_step(p, g, AdamState.for_params(p), cfg_for())


def test_adam_matches_scalar_reference():
    # independently scripted scalar Adam on loss = theta^2 / 2
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    theta, m, v = 1.0, 0.0, 0.0
    for step in range(1, 4):
        grad = theta
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        m_hat = m / (1 - b1 ** step)
        v_hat = v / (1 - b2 ** step)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)

    p = tiny_params(1.0)
    state = AdamState.for_params(p)
    for _ in range(3):
        g = ParamGrads(weights=[p.weights[0].copy()], biases=[np.zeros(1)])
        p, state = adam_step(p, g, state, cfg_for(lr=lr))
    assert p.weights[0][0, 0] == pytest.approx(theta, abs=1e-12)


# --- training loop ----------------------------------------------------------------

def test_zero_iterations_returns_initial_params():
    cfg = TrainConfig(problem="heat", iterations=0, seed=11)
    params, history = train(cfg)
    assert params_blob(params) == params_blob(
        init_params(get_problem("heat").layer_sizes, 11))
    assert history.losses == []


def test_training_is_deterministic():
    cfg = TrainConfig(problem="heat", n_collocation=100, iterations=25, seed=4)
    p1, h1 = train(cfg)
    p2, h2 = train(cfg)
    assert params_blob(p1) == params_blob(p2)
    assert h1.losses == h2.losses


def test_divergence_guard_aborts():
    cfg = TrainConfig(problem="heat", n_collocation=32, iterations=10,
                      seed=0, divergence_limit=1e-12)
    with pytest.raises(TrainingError):
        train(cfg)


def test_invalid_config_rejected():
    with pytest.raises(ConfigError):
        TrainConfig(problem="heat", learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(problem="nope").validate()
    with pytest.raises(ConfigError):
        TrainConfig(problem="heat", iterations=5, n_collocation=0).validate()


def test_resampling_changes_the_point_set():
    cfg_fixed = TrainConfig(problem="heat", n_collocation=50, iterations=8, seed=2)
    cfg_resample = TrainConfig(problem="heat", n_collocation=50, iterations=8,
                               seed=2, resample_each_iter=True)
    p_fixed, _ = train(cfg_fixed)
    p_resample, _ = train(cfg_resample)
    assert params_blob(p_fixed) != params_blob(p_resample)


def test_trained_heat_loss_profile(trained_heat):
    params, history, cfg = trained_heat
    losses = np.array(history.losses)
    assert len(losses) == cfg.iterations
    assert np.all(np.isfinite(losses))
    assert losses[-1] < 5e-3
    tenth = len(losses) // 10
    assert losses[-tenth:].mean() < losses[:tenth].mean()


def test_trained_heat_beats_random_init(trained_heat):
    from errmap.errormap import true_error
    from errmap.fdm import grid_for

    params, _, cfg = trained_heat
    p = get_problem("heat")
    g = grid_for(p, 33)
    trained = np.linalg.norm(true_error(ConstrainedModel(p, params), p, g).values)
    random_net = ConstrainedModel(p, init_params(p.layer_sizes, cfg.seed))
    untrained = np.linalg.norm(true_error(random_net, p, g).values)
    assert trained < 0.2 * untrained


def test_coarse_grid_fdm_reference_overshoots_true_error(trained_heat):
    # on a very coarse grid the reference solve's own discretization error
    # dwarfs a well-trained network's true error
    from errmap.errormap import fdm_baseline_error, true_error
    from errmap.fdm import grid_for

    params, _, _ = trained_heat
    p = get_problem("heat")
    g = grid_for(p, 9)
    model = ConstrainedModel(p, params)
    e_fdm = np.linalg.norm(fdm_baseline_error(model, p, g).values)
    e_true = np.linalg.norm(true_error(model, p, g).values)
    assert e_fdm > e_true
