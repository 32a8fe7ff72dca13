from typing import List, Optional, Tuple

from django.core.exceptions import ValidationError


class CapaException(Exception):
    """Generic capa_wmmse exception"""


class UnsupportedFormat(CapaException):
    """Unable to parse or emit a file (based on its extension)"""


class ConfigurationError(CapaException):
    def __init__(self, errors: List['DetailValidationError']):
        self.errors = errors
        fields = ', '.join(error.field for error in errors)
        super().__init__(f"Invalid configuration ({fields})")

    def to_list(self) -> list:
        return [error.to_dict() for error in self.errors]


class DetailValidationError(ValidationError):
    def __init__(self, error: ValidationError, path: Tuple):
        if not hasattr(error, 'message') and isinstance(error.error_list, list):
            for item in error.error_list:
                item.path = path

        super().__init__(error)
        self._path = path

    @property
    def path(self) -> Tuple:
        return self._path

    @property
    def field(self) -> str:
        return '.'.join(str(item) for item in self._path)

    def prepend(self, key: Tuple):
        self._path = key + self._path

    def to_list(self) -> list:
        return list(self.path)

    def to_dict(self) -> dict:
        return {
            'code': self.code,
            'message': self.message % self.params if self.params else self.message,
            'path': self.to_list(),
            'field': self.field,
        }


class NumericalError(CapaException):
    """Numerical failure inside a solver, channel builder or oracle"""


class InvalidOrder(NumericalError):
    def __init__(self, order):
        self.order = order
        super().__init__(f"Quadrature order must be a positive integer (got {order!r})")


class SingularityError(NumericalError):
    def __init__(self, rx_index: Optional[int] = None, tx_index: Optional[int] = None):
        self.rx_index = rx_index
        self.tx_index = tx_index
        if rx_index is None:
            message = "Green's function evaluated at coincident points"
        else:
            message = f"Green's function evaluated at coincident points (rx={rx_index}, tx={tx_index})"
        super().__init__(message)


class SingularSystemError(NumericalError):
    """A linear system is singular or numerically ill-conditioned"""


class IllConditionedIterate(SingularSystemError):
    def __init__(self, iteration: int, condition: float):
        self.iteration = iteration
        self.condition = condition
        super().__init__(f"Ill-conditioned WMMSE iterate at t={iteration} (condition number {condition:.3e})")


class DegenerateInput(NumericalError):
    """Input carries no power or no gain"""


class DimensionError(NumericalError):
    """Stream count or matrix dimensions are inconsistent"""


class DomainError(NumericalError):
    """Argument outside the domain of an operation"""


class EmptyArrayError(DomainError):
    """Element spacing leaves no element on the aperture"""


class NonPositiveDefiniteKernel(NumericalError):
    """Power correlation kernel is not Hermitian positive definite"""


class SampleBudgetExceeded(NumericalError):
    def __init__(self, samples: int, budget: int):
        self.samples = samples
        self.budget = budget
        super().__init__(f"{samples} samples per aperture exceed the sample budget of {budget}")


class MissingReconstruction(NumericalError):
    """Beamformer carries no reconstruction coefficients"""
