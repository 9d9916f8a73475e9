"""safsim: cycle-accurate int8 systolic-array accelerator simulator with
single-bit fault-injection campaigns."""

from .datapath import PipelineState, SaConfig
from .faults import FaultSpec, Outcome, OutcomeKind, RegisterAddress
from .modelio import ModelSpec, load_dataset, load_model, save_dataset, save_model
from .scheduler import compile_model, reference_inference, run_golden

__all__ = [
    "PipelineState", "SaConfig", "FaultSpec", "Outcome", "OutcomeKind",
    "RegisterAddress", "ModelSpec", "load_dataset", "load_model",
    "save_dataset", "save_model", "compile_model", "reference_inference",
    "run_golden",
]

__version__ = "0.1.0"
