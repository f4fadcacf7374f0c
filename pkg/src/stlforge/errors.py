"""Exception hierarchy shared across the package."""


class StlForgeError(Exception):
    """Base class for all package errors."""


class SpecError(StlForgeError, ValueError):
    """Invalid specification text, config, or checkpoint (validation failure)."""


class ParseError(SpecError):
    def __init__(self, message, text=None, pos=None):
        self.text = text
        self.pos = pos
        if pos is not None:
            message = f"{message} at position {pos}"
            if text is not None:
                message += f"\n  {text}\n  {' ' * pos}^"
        super().__init__(message)


class UnknownVariableError(ParseError):
    pass


class NonConstantExponentError(ParseError):
    pass


class IntervalError(SpecError):
    pass


class DomainError(StlForgeError, ArithmeticError):
    """Numeric domain violation: ln/sqrt of a negative number, division by zero, ..."""


class TapeError(StlForgeError, RuntimeError):
    pass


class TrainingDiverged(StlForgeError, RuntimeError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
