"""Waiting-time and Werner-parameter distributions of repeater chains with cut-offs."""

from .protocol import (
    Backend,
    CutoffSpec,
    EvalConfig,
    HardwareParams,
    Kind,
    ProtocolNode,
    Strategy,
    build_nested_chain,
    dist,
    gen,
    parse_config,
    serialize_config,
    swap,
    validate_protocol,
)
from .states import AttemptKernels, LinkState, SelectionKernels
from .evaluator import eval_gen, eval_protocol
from .keyrate import SecretKeyReport, secret_key_rate

__version__ = "0.1.0"

__all__ = [
    "AttemptKernels",
    "Backend",
    "CutoffSpec",
    "EvalConfig",
    "HardwareParams",
    "Kind",
    "LinkState",
    "ProtocolNode",
    "SecretKeyReport",
    "SelectionKernels",
    "Strategy",
    "build_nested_chain",
    "dist",
    "eval_gen",
    "eval_protocol",
    "gen",
    "parse_config",
    "secret_key_rate",
    "serialize_config",
    "swap",
    "validate_protocol",
]
