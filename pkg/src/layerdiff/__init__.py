"""Semi-analytical solver for one-dimensional layered diffusion.

Each layer is solved by a residue (eigenfunction) series in the natural
transform domain; unknown interface fluxes follow from a Volterra system
in time.  A Crank-Nicolson reference solver checks the result.
"""

from .fdoracle import FdConfig, compare_fields, interface_residuals, pde_residual, solve_fd
from .funcspace import (
    DomainError,
    FunctionSpec,
    SpaceTimeFunctionSpec,
    TimeGrid,
    TimeSeries,
    WeightParams,
    eval_fn,
    eval_weight,
    sample,
)
from .multilayer import StackError, StackSpec, solve_stack, solve_two_layer
from .onelayer import OneLayerProblem, SolutionField, solve_one_layer
from .spectral import LayerGeometry, RobinVector, SpectralBasis, SpectralError, find_roots

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "FdConfig",
    "FunctionSpec",
    "LayerGeometry",
    "OneLayerProblem",
    "RobinVector",
    "SolutionField",
    "SpaceTimeFunctionSpec",
    "SpectralBasis",
    "SpectralError",
    "StackError",
    "StackSpec",
    "TimeGrid",
    "TimeSeries",
    "WeightParams",
    "compare_fields",
    "eval_fn",
    "eval_weight",
    "find_roots",
    "interface_residuals",
    "pde_residual",
    "sample",
    "solve_fd",
    "solve_one_layer",
    "solve_stack",
    "solve_two_layer",
]
