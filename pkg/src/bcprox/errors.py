"""Exception types raised by bcprox."""


class BCProxError(Exception):
    """Base class for all library errors."""


class StructureError(BCProxError, ValueError):
    """A vector does not conform to the block structure it is used with."""


class ContractError(BCProxError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ConfigError(BCProxError, ValueError):
    """Invalid problem, solver or run configuration."""


class NumericError(BCProxError, ArithmeticError):
    """A non-finite value appeared during a computation.

    ``block`` and ``iteration`` locate the failure when known.
    """

    def __init__(self, message, block=None, iteration=None):
        super().__init__(message)
        self.block = block
        self.iteration = iteration
