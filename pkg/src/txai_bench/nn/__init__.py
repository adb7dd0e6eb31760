from .layers import Conv2D, Dense, Flatten, LayerSpec, MaxPool, ReLU, Softmax, softmax
from .model_io import (
    ModelFileError,
    NotAModelFile,
    TruncatedModelFile,
    UnsupportedModelVersion,
    load_model,
    save_model,
)
from .network import (
    ForwardTrace,
    Network,
    backward_params,
    backward_to_input,
    backward_to_layer,
    build_network,
    cross_entropy_loss,
    forward,
    predict,
    predict_batch,
    softmax_cross_entropy_logit_grad,
    validate_architecture,
)
from .train import EpochStats, TrainConfig, TrainingDiverged, train

__all__ = [
    "Conv2D", "MaxPool", "ReLU", "Flatten", "Dense", "Softmax", "LayerSpec",
    "Network", "ForwardTrace", "build_network", "validate_architecture",
    "forward", "predict", "predict_batch", "softmax",
    "backward_to_input", "backward_to_layer", "backward_params",
    "softmax_cross_entropy_logit_grad", "cross_entropy_loss",
    "TrainConfig", "EpochStats", "TrainingDiverged", "train",
    "save_model", "load_model", "ModelFileError", "NotAModelFile",
    "UnsupportedModelVersion", "TruncatedModelFile",
]
