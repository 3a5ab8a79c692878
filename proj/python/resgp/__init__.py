"""Residual Gaussian process multi-fidelity emulation (C++ core)."""

from ._resgp import *  # noqa: F401,F403
from ._resgp import (  # noqa: F401
    ActiveLearningError,
    ConditioningError,
    DataError,
    DimensionError,
    DomainBox,
    KernelHyperparams,
    Model,
    NestingError,
    OptimizerConfig,
    ResGPError,
    UnsupportedError,
)

__all__ = [name for name in dir() if not name.startswith("_")]
