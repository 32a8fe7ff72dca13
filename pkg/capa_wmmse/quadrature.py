import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import DomainError, InvalidOrder

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-14
NEWTON_MAX_STEPS = 100


@dataclass(frozen=True, eq=False)
class GaussLegendreRule:
    """
    M-point Gauss-Legendre rule on [-1, 1]. Nodes are strictly increasing and
    symmetric about zero; weights are positive and sum to 2.
    """
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.order

    def scaled(self, a: float, b: float):
        """Nodes and weights mapped onto [a, b]."""
        half = 0.5 * (b - a)
        return half * self.nodes + 0.5 * (a + b), half * self.weights


def _legendre(order: int, x: np.ndarray):
    """P_M(x) and P'_M(x) by the three-term recurrence."""
    previous = np.ones_like(x)
    current = x.copy()
    for degree in range(2, order + 1):
        previous, current = current, ((2 * degree - 1) * x * current - (degree - 1) * previous) / degree
    derivative = order * (x * current - previous) / (x * x - 1.0)
    return current, derivative


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> GaussLegendreRule:
    index = np.arange(1, order + 1)
    x = np.cos(np.pi * (index - 0.25) / (order + 0.5))

    for _ in range(NEWTON_MAX_STEPS):
        value, derivative = _legendre(order, x)
        step = value / derivative
        x = x - step
        if np.max(np.abs(step)) < NEWTON_TOLERANCE:
            break
    else:
        logger.warning("Newton iteration for M=%d stopped before reaching tolerance", order)

    _, derivative = _legendre(order, x)
    weights = 2.0 / ((1.0 - x * x) * derivative * derivative)

    order_index = np.argsort(x)
    x = x[order_index]
    weights = weights[order_index]

    # exact symmetry about zero
    x = 0.5 * (x - x[::-1])
    weights = 0.5 * (weights + weights[::-1])

    x.flags.writeable = False
    weights.flags.writeable = False
    return GaussLegendreRule(order=order, nodes=x, weights=weights)


def gauss_legendre(order: int) -> GaussLegendreRule:
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 1:
        raise InvalidOrder(order)
    return _gauss_legendre(int(order))


def _evaluate(f: Callable, *points: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(f(*points))
    except TypeError:
        values = np.vectorize(f)(*points)
    if values.shape != points[0].shape:
        values = np.broadcast_to(values, points[0].shape)
    return values


def _check_finite(values: np.ndarray, name: str):
    if not np.all(np.isfinite(values)):
        logger.warning(
            "%s: integrand is not finite at %d of %d samples", name, int(np.sum(~np.isfinite(values))), values.size
        )


def _scalar(value) -> Union[float, complex]:
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


def integrate_1d(rule: GaussLegendreRule, f: Callable, a: float, b: float) -> Union[float, complex]:
    """
    (b - a)/2 * sum_m w_m f((b - a)/2 * x_m + (a + b)/2). The integrand is
    called once with the array of nodes; constant results are broadcast.
    """
    if not a < b:
        raise DomainError(f"Integration interval is empty ([{a}, {b}])")

    x, w = rule.scaled(a, b)
    values = _evaluate(f, x)
    _check_finite(values, 'integrate_1d')
    return _scalar(np.sum(w * values))


def tensor_integrate_2d(rule: GaussLegendreRule, f: Callable, rect: Sequence[float]) -> Union[float, complex]:
    """
    Tensor-product rule over rect = (a, b, c, d), i.e. [a, b] x [c, d]. The
    integrand receives two broadcast arrays (x outer, y inner).
    """
    a, b, c, d = rect
    if not (a < b and c < d):
        raise DomainError(f"Integration rectangle is empty ({rect})")

    x, wx = rule.scaled(a, b)
    y, wy = rule.scaled(c, d)
    grid_x, grid_y = np.meshgrid(x, y, indexing='ij')
    values = _evaluate(f, grid_x, grid_y)
    _check_finite(values, 'tensor_integrate_2d')
    return _scalar(wx @ values @ wy)
