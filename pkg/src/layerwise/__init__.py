"""Constructive fixed-width multigrade networks with layer-wise L^p error certificates."""

from .analysis import BoundReport, Holder, ModulusEstimate, ModulusPlan, estimate_modulus, lp_norm, verify_bounds
from .decoder import FitBudget, FitFailure, SineDecoder, TableDecoder, decode, fit_two_sine
from .encoder import StepProxy, build_encoder_weights, encode, step_proxy
from .geometry import CellLabel, GridLevel, PartitionConfig, TransitionRegion, choose_delta
from .multigrade import DecoderMode, GradeTerm, MultigradeNet, TargetFunction, build, export_weights
from .quadrature import CellAverageEngine

__all__ = [
    "BoundReport",
    "CellAverageEngine",
    "CellLabel",
    "DecoderMode",
    "FitBudget",
    "FitFailure",
    "GradeTerm",
    "GridLevel",
    "Holder",
    "ModulusEstimate",
    "ModulusPlan",
    "MultigradeNet",
    "PartitionConfig",
    "SineDecoder",
    "StepProxy",
    "TableDecoder",
    "TargetFunction",
    "TransitionRegion",
    "build",
    "build_encoder_weights",
    "choose_delta",
    "decode",
    "encode",
    "estimate_modulus",
    "export_weights",
    "fit_two_sine",
    "lp_norm",
    "step_proxy",
    "verify_bounds",
]
