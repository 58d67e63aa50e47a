class RJMLTError(Exception):
    pass


class InvalidStateError(RJMLTError, ValueError):
    """A chain state or proposal distribution that MH cannot use."""


class InitializationError(RJMLTError, RuntimeError):
    """Bootstrap found no state with positive contribution."""


class NonInvertibleError(RJMLTError):
    """A sample cannot be mapped back to primary sample space.

    Raised by inverse blocks; reversible jumps catch it and reject.
    """


class NumericError(RJMLTError, ArithmeticError):
    pass
