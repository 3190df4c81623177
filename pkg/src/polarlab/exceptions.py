"""Exception classes for polarlab."""


class PolarLabError(Exception):
    """Base exception for polarlab errors."""

    pass


class ConfigurationError(PolarLabError):
    """Raised when an experiment configuration or decoding plan is invalid."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConstructionError(PolarLabError):
    """Raised when a reliability order cannot be built or loaded."""

    pass


class CodeParameterError(PolarLabError):
    """Raised when code dimensions are inconsistent (invalid rate)."""

    pass


class ContractError(PolarLabError):
    """Raised when an operation is called outside its preconditions."""

    pass


class BaseMatrixError(PolarLabError):
    """Raised for unknown or malformed LDPC base matrices."""

    pass
