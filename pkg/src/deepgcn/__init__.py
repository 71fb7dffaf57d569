"""Deep graph-convolution training engine and spectral verification toolkit."""

from .graph import (CsrGraph, MatrixKind, PropMatrix, dropedge_sample,
                    laplacian_operator, lazy_walk_operator, load_graph,
                    renormalized_operator)
from .autodiff import Tape, TensorNode
from .models import ModelConfig, ModelKind, ModelParams, beta_schedule, init_params, model_forward
from .data import DatasetBundle, Split, load_dataset, save_dataset
from .training import RunResult, full_supervised_protocol, sweep, train

__all__ = [
    "CsrGraph", "MatrixKind", "PropMatrix", "dropedge_sample",
    "laplacian_operator", "lazy_walk_operator", "load_graph", "renormalized_operator",
    "Tape", "TensorNode",
    "ModelConfig", "ModelKind", "ModelParams", "beta_schedule", "init_params", "model_forward",
    "DatasetBundle", "Split", "load_dataset", "save_dataset",
    "RunResult", "full_supervised_protocol", "sweep", "train",
]
