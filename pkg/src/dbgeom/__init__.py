"""Differential geometry of neural-network decision boundaries.

Exact derivatives of MLP classifiers, curvature of their zero level sets,
Riemannian tensors in graph charts, Euler characteristic by integrating
Gaussian curvature, and weight conditions that force flat boundaries.
"""

from .derivatives import DerivativeBundle, derivatives, fd_check, gradient, hessian, third_derivatives
from .errors import (
    ChartError,
    ConstructionError,
    ContractError,
    GeometryError,
    GridTooLargeError,
    ModelParseError,
    SingularPointError,
    TrainingDivergedError,
    UnsupportedDimensionError,
)
from .implicit import ImplicitFunction
from .network import Activation, Layer, MlpNetwork, evaluate, load_model, random_network, save_model

__all__ = [
    "Activation",
    "ChartError",
    "ConstructionError",
    "ContractError",
    "DerivativeBundle",
    "GeometryError",
    "GridTooLargeError",
    "ImplicitFunction",
    "Layer",
    "MlpNetwork",
    "ModelParseError",
    "SingularPointError",
    "TrainingDivergedError",
    "UnsupportedDimensionError",
    "derivatives",
    "evaluate",
    "fd_check",
    "gradient",
    "hessian",
    "load_model",
    "random_network",
    "save_model",
    "third_derivatives",
]
