"""Pointwise error maps for hard-constrained PINNs on linear PDEs.

Train a hard-constrained network on a benchmark problem, evaluate its PDE
residual on a structured grid, and integrate the defect equation with
finite differences to estimate the pointwise solution error.
"""

from .errormap import (ErrorReport, accuracy_metrics, build_report,
                       certified_bound, evaluate_residual, fdm_baseline_error,
                       solve_defect, true_error)
from .exceptions import (CheckpointError, ConfigError, ErrmapError, InputError,
                         SolverError, StabilityError, TrainingError)
from .fdm import (Grid, SpaceTimeField, assemble, central_time_march,
                  crank_nicolson_march, field_to_csv, grid_for, solve_ibvp,
                  solve_steady)
from .network import (Jet2, MlpParams, forward_jet, forward_jet_batch,
                      init_params, load_checkpoint, loss_gradient,
                      save_checkpoint)
from .problems import (AnalyticModel, ConstrainedModel, ProblemSpec,
                       analytic_solution, apply_operator, get_problem,
                       hard_constrain, source_term)
from .train import (TrainConfig, adam_step, physics_loss, sample_collocation,
                    train)

__version__ = "0.1.0"

__all__ = [
    "AnalyticModel", "CheckpointError", "ConfigError", "ConstrainedModel",
    "ErrmapError", "ErrorReport", "Grid", "InputError", "Jet2", "MlpParams",
    "ProblemSpec", "SolverError", "SpaceTimeField", "StabilityError",
    "TrainConfig", "TrainingError", "accuracy_metrics", "adam_step",
    "analytic_solution", "apply_operator", "assemble", "build_report",
    "central_time_march", "certified_bound", "crank_nicolson_march",
    "evaluate_residual", "fdm_baseline_error", "field_to_csv", "forward_jet",
    "forward_jet_batch", "get_problem", "grid_for", "hard_constrain",
    "init_params", "load_checkpoint", "loss_gradient", "physics_loss",
    "sample_collocation", "save_checkpoint", "solve_defect", "solve_ibvp",
    "solve_steady", "source_term", "train", "true_error",
]
