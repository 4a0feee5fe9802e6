class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class SingularInputError(ContractViolation):
    """A closed-form expression is undefined at the given input."""


class PoisonedEntryError(ArithmeticError):
    """A Hessian query produced a non-finite entry."""

    def __init__(self, i: int, j: int, value: float, where: str = "Hessian"):
        self.i, self.j, self.value = int(i), int(j), float(value)
        super().__init__(f"{where} entry ({self.i}, {self.j}) is non-finite: {value!r}")


class ObjectiveError(ArithmeticError):
    """The objective returned a non-finite value."""


class ConfigError(ValueError):
    """Experiment configuration failed validation; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
