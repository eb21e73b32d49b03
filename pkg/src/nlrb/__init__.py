"""Nonlinear non-intrusive reduced-basis surrogates with online adaptation."""

from .grid import Grid, DiffOperator, Quadrature, build_grid, diff_operator, quadrature_weights
from .pod import ReducedBasis, SnapshotSet, assemble_snapshots, compute_pod, project
from .net import AdamState, MlpSpec, adam_step, forward, grad_input, grad_params
from .model import (
    CompositeModel,
    OfflineConfig,
    OfflineDataset,
    build_composite,
    evaluate_basis_features,
    make_offline_dataset,
    offline_loss,
    predict_offline,
    reconstruct,
    train_offline,
)
from .online import AdaptationResult, OnlineConfig, adapt, online_loss, pinn_residual
from .problems import ProblemDef, burgers_problem, make_problem, sample_params
from .baselines import PodNnModel, PodnnConfig, optimal_projection_error, podnn_predict, train_podnn
from .evaluate import aggregate, relative_error, worst_decile_indices

__version__ = "0.1.0"
