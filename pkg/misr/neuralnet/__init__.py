# misr/neuralnet/__init__.py
from misr.neuralnet.network import NetworkParams, forward, init_params, param_count, predict
from misr.neuralnet.paramfile import load_params, save_params
from misr.neuralnet.tensor import Tensor
from misr.neuralnet.train import EpochRecord, TrainConfig, train

__all__ = [
    "EpochRecord",
    "NetworkParams",
    "Tensor",
    "TrainConfig",
    "forward",
    "init_params",
    "load_params",
    "param_count",
    "predict",
    "save_params",
    "train",
]
