"""Domain types: jump rates, networks, kernels and model specifications."""

from .jumprate import JumpRate
from .kernels import (ExpPolyKernel, GeneralKernel, NetworkKernel, PeriodicKernel,
                      TrigExpPolyKernel, decay_rates, eval_kernel, kernel_l1_norms,
                      season_of, season_slot)
from .model import (CountSeries, ModelSpec, PeriodicBaseline, TrigBaseline,
                    ValidationReport, validate_model)
from .network import NetworkSpec
from .serialize import (dumps_model, load_model, loads_model, model_from_dict,
                        model_to_dict, save_model)

__all__ = [
    "JumpRate", "NetworkSpec", "PeriodicKernel", "GeneralKernel", "NetworkKernel",
    "ExpPolyKernel", "TrigExpPolyKernel", "decay_rates", "eval_kernel", "kernel_l1_norms",
    "season_of", "season_slot", "CountSeries", "ModelSpec", "PeriodicBaseline",
    "TrigBaseline", "ValidationReport", "validate_model", "dumps_model", "loads_model",
    "model_from_dict", "model_to_dict", "save_model", "load_model",
]
