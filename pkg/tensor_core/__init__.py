from tensor_core.errors import (
    ArtifactExistsError,
    CalibrationError,
    ConfigError,
    ContractError,
    LifecycleError,
    NumericDivergenceError,
    NumericDomainError,
    OracleError,
    ShapeError,
    WWSError,
)
from tensor_core.gradcheck import finite_diff_check
from tensor_core.ops import PRIMITIVES, apply_primitive
from tensor_core.tensor import ComputeGraph, Tensor, backward, no_grad
