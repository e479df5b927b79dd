"""
Exception hierarchy shared by every package in the project
"""


class WWSError(Exception):
    """Base class for all project errors"""


class ContractError(WWSError, ValueError):
    """A precondition of an operation was violated"""


class ShapeError(ContractError):
    """Input shapes are invalid for the requested operation"""


class NumericDomainError(WWSError, ArithmeticError):
    """A NaN or Inf value reached an op boundary"""


class LifecycleError(WWSError, RuntimeError):
    """A compute graph was used after it had been consumed"""


class OracleError(WWSError, RuntimeError):
    """The finite-difference oracle detected a non-deterministic target"""


class NumericDivergenceError(WWSError, ArithmeticError):
    """Training produced a non-finite loss"""

    def __init__(self, message: str, iteration: int = None, epoch: int = None, batch: int = None):
        super().__init__(message)
        self.iteration = iteration
        self.epoch = epoch
        self.batch = batch


class CalibrationError(WWSError, ValueError):
    """No threshold can satisfy the requested operating point"""


class ConfigError(WWSError, ValueError):
    """Experiment configuration failed validation"""


class ArtifactExistsError(WWSError, FileExistsError):
    """An output path already exists and overwrite was not requested"""
