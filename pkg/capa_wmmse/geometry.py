import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import DomainError, EmptyArrayError
from .quadrature import GaussLegendreRule, gauss_legendre

logger = logging.getLogger(__name__)

PLANE_TOLERANCE = 1e-10


def rotation_matrix(alpha: float, beta: float, phi: float) -> np.ndarray:
    """R_z(alpha) R_y(beta) R_x(phi)"""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cp, sp = math.cos(phi), math.sin(phi)

    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class ApertureGeometry:
    """
    Planar rectangular aperture of size length_x by length_y, centred at offset
    and rotated by (alpha, beta, phi) about the z, y and x axes. The
    polarization is given in the local frame and normalised on construction.
    """
    length_x: float
    length_y: float
    offset: Sequence[float] = (0.0, 0.0, 0.0)
    alpha: float = 0.0
    beta: float = 0.0
    phi: float = 0.0
    polarization: Sequence[float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if not (self.length_x > 0 and self.length_y > 0):
            raise DomainError(f"Aperture edges must be positive (got {self.length_x}, {self.length_y})")

        offset = tuple(float(item) for item in self.offset)
        polarization = np.asarray(self.polarization, dtype=float)
        if len(offset) != 3 or polarization.shape != (3,):
            raise DomainError("Offset and polarization must be 3-vectors")

        norm = np.linalg.norm(polarization)
        if norm == 0:
            raise DomainError("Polarization vector must be nonzero")

        object.__setattr__(self, 'offset', offset)
        object.__setattr__(self, 'polarization', tuple(float(item) for item in polarization / norm))

    @classmethod
    def square(cls, area: float, **kwargs) -> 'ApertureGeometry':
        side = math.sqrt(area)
        return cls(length_x=side, length_y=side, **kwargs)

    def replace(self, **changes) -> 'ApertureGeometry':
        return replace(self, **changes)

    @property
    def area(self) -> float:
        return self.length_x * self.length_y

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.alpha, self.beta, self.phi)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.offset)

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[:, 2]

    @property
    def global_polarization(self) -> np.ndarray:
        return self.rotation @ np.asarray(self.polarization)

    def to_global(self, local_points: np.ndarray) -> np.ndarray:
        """Map (K, 2) local in-plane coordinates to (K, 3) global points."""
        local_points = np.atleast_2d(local_points)
        lifted = np.column_stack([local_points, np.zeros(local_points.shape[0])])
        return lifted @ self.rotation.T + self.center

    def to_local(self, points: np.ndarray):
        """Local in-plane coordinates (K, 2) and signed distance to the plane (K,)."""
        points = np.atleast_2d(points)
        local = (points - self.center) @ self.rotation
        return local[:, :2], local[:, 2]

    def contains(self, points: np.ndarray, tolerance: float = 1e-9) -> np.ndarray:
        local, height = self.to_local(points)
        return (
            (np.abs(height) <= max(tolerance, PLANE_TOLERANCE))
            & (np.abs(local[:, 0]) <= 0.5 * self.length_x + tolerance)
            & (np.abs(local[:, 1]) <= 0.5 * self.length_y + tolerance)
        )


@dataclass(eq=False)
class QuadratureGrid:
    """
    Sample points of an aperture in raster order (x index outer, y index inner)
    with the diagonal of the weight matrix Phi.
    """
    geometry: ApertureGeometry
    order: int
    local_points: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    kind: str = 'gauss-legendre'
    shape: tuple = field(default=())

    def __len__(self):
        return self.points.shape[0]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def phi(self) -> np.ndarray:
        return np.diag(self.weights)


def _lift(geometry: ApertureGeometry, xs: np.ndarray, ys: np.ndarray, weights: np.ndarray, order, kind):
    grid_x, grid_y = np.meshgrid(xs, ys, indexing='ij')
    local_points = np.column_stack([grid_x.ravel(), grid_y.ravel()])
    return QuadratureGrid(
        geometry=geometry,
        order=order,
        local_points=local_points,
        points=geometry.to_global(local_points),
        weights=weights,
        kind=kind,
        shape=(len(xs), len(ys)),
    )


def build_grid(geometry: ApertureGeometry, rule: Union[GaussLegendreRule, int]) -> QuadratureGrid:
    if not isinstance(rule, GaussLegendreRule):
        rule = gauss_legendre(rule)

    xs = 0.5 * geometry.length_x * rule.nodes
    ys = 0.5 * geometry.length_y * rule.nodes
    weights = 0.25 * geometry.area * np.outer(rule.weights, rule.weights).ravel()
    return _lift(geometry, xs, ys, weights, rule.order, 'gauss-legendre')


def build_uniform_grid(geometry: ApertureGeometry, samples_per_axis: int) -> QuadratureGrid:
    """Midpoint sampling, every sample weighted by A / n^2."""
    if samples_per_axis < 1:
        raise DomainError(f"Samples per axis must be positive (got {samples_per_axis})")

    centres = (np.arange(samples_per_axis) + 0.5) / samples_per_axis - 0.5
    weights = np.full(samples_per_axis ** 2, geometry.area / samples_per_axis ** 2)
    return _lift(
        geometry, centres * geometry.length_x, centres * geometry.length_y, weights, samples_per_axis, 'uniform'
    )


def element_count(length: float, spacing: float) -> int:
    return int(math.ceil(round(length / spacing, 9)))


def build_element_grid(
    geometry: ApertureGeometry, spacing: float, element_area: Optional[float] = None
) -> QuadratureGrid:
    """
    Element centres at (n - 1) d - L/2 along each axis, n = 1 .. ceil(L / d).
    Every element is weighted by its area (spacing squared by default).
    """
    if spacing <= 0:
        raise DomainError(f"Element spacing must be positive (got {spacing})")
    if spacing > min(geometry.length_x, geometry.length_y):
        raise EmptyArrayError(
            f"Element spacing {spacing} exceeds the aperture ({geometry.length_x} x {geometry.length_y})"
        )

    if element_area is None:
        element_area = spacing ** 2

    count_x = element_count(geometry.length_x, spacing)
    count_y = element_count(geometry.length_y, spacing)
    xs = np.arange(count_x) * spacing - 0.5 * geometry.length_x
    ys = np.arange(count_y) * spacing - 0.5 * geometry.length_y
    weights = np.full(count_x * count_y, float(element_area))
    return _lift(geometry, xs, ys, weights, (count_x, count_y), 'elements')


def corners(geometry: ApertureGeometry) -> np.ndarray:
    half_x = 0.5 * geometry.length_x
    half_y = 0.5 * geometry.length_y
    return geometry.to_global(np.array([[-half_x, -half_y], [-half_x, half_y], [half_x, half_y], [half_x, -half_y]]))


def _straddles(plane: ApertureGeometry, other: ApertureGeometry, tolerance: float) -> bool:
    _, height = plane.to_local(corners(other))
    return not (np.all(height > tolerance) or np.all(height < -tolerance))


def apertures_intersect(a: ApertureGeometry, b: ApertureGeometry, tolerance: float = 1e-9) -> bool:
    """
    Conservative intersection test: two planar rectangles can only meet when
    each one touches or crosses the plane of the other. Coplanar apertures are
    compared by their in-plane extent.
    """
    if not (_straddles(a, b, tolerance) and _straddles(b, a, tolerance)):
        return False

    _, height = a.to_local(corners(b))
    if np.all(np.abs(height) <= tolerance):
        local, _ = a.to_local(corners(b))
        return bool(
            np.max(local[:, 0]) >= -0.5 * a.length_x and np.min(local[:, 0]) <= 0.5 * a.length_x
            and np.max(local[:, 1]) >= -0.5 * a.length_y and np.min(local[:, 1]) <= 0.5 * a.length_y
        )
    return True
