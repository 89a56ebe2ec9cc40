# This file marks the directory as a Python package.
from .checkpoint import Checkpoint
from .config import RunConfig, load_run_config
from .network import MsrfNetConfig, msrfnet_forward
from .params import ParamStore
from .tensor import GradTape, Tensor, backward

__all__ = [
    "Checkpoint",
    "GradTape",
    "MsrfNetConfig",
    "ParamStore",
    "RunConfig",
    "Tensor",
    "backward",
    "load_run_config",
    "msrfnet_forward",
]
