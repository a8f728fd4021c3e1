"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes (see ``astrec.cli``).
"""


class AstError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AstError, ValueError):
    pass


class DataError(AstError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    pass


class ContractError(AstError, RuntimeError):
    pass


class NumericalError(AstError, ArithmeticError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class TrainingError(NumericalError):
    def __init__(self, message, step=None, component=None):
        self.step = step
        self.component = component
        super().__init__(message)


class GenerationError(AstError, RuntimeError):
    pass


class UnsupportedInputError(AstError, TypeError):
    pass


class DiagnosticError(DataError):
    pass
