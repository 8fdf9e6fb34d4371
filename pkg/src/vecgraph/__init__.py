"""Vectorized scene encoding and trajectory prediction, trainable at desk scale.

Modules: ``diffcore`` (reverse-mode autodiff), ``vectorize`` (polylines to
vectors), ``model`` (subgraph + global attention encoder), ``training``,
``scenegen`` (synthetic scenes), ``evalkit`` (metrics and ablations),
``costmodel`` (FLOP and parameter counts), ``io`` and ``cli``.
"""

from .errors import (ContractError, DataError, DimensionError, ParameterError, StateError, StructureError,
                     TrainingDiverged, VecGraphError)
from .model import ModelConfig, forward, init_params, predict
from .training import TrainConfig, train
from .vectorize import Polyline, Scene, normalize_scene

__version__ = "0.1.0"

__all__ = [
    "ContractError", "DataError", "DimensionError", "ParameterError", "StateError", "StructureError",
    "TrainingDiverged", "VecGraphError", "ModelConfig", "forward", "init_params", "predict",
    "TrainConfig", "train", "Polyline", "Scene", "normalize_scene",
]
