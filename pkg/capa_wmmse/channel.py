import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import DomainError, SingularityError
from .geometry import ApertureGeometry, QuadratureGrid, build_element_grid, build_grid
from .quadrature import GaussLegendreRule

logger = logging.getLogger(__name__)

FREE_SPACE_IMPEDANCE = 120.0 * math.pi
SPEED_OF_LIGHT = 3e8
COINCIDENCE_TOLERANCE = 1e-12
ROWS_PER_BLOCK = 256


@dataclass(frozen=True)
class PhysicalConstants:
    """
    Carrier and link budget. transmit_power is the budget Tr(W^H Phi_T W) in
    configured current units. power_unit (A^2 per configured unit) enters
    through field_scale, which multiplies every sampled channel.
    """
    frequency: float = 2.4e9
    speed_of_light: float = SPEED_OF_LIGHT
    impedance: float = FREE_SPACE_IMPEDANCE
    noise_power: float = 5.6e-3
    transmit_power: float = 100.0
    power_unit: float = 9e-4

    def __post_init__(self):
        for name in ('frequency', 'speed_of_light', 'impedance', 'noise_power', 'transmit_power', 'power_unit'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be a positive finite number (got {value})")

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def power(self) -> float:
        return self.transmit_power

    @property
    def field_scale(self) -> float:
        """Field per configured current unit, sqrt(power_unit)."""
        return math.sqrt(self.power_unit)

    def replace(self, **changes) -> 'PhysicalConstants':
        values = {
            'frequency': self.frequency,
            'speed_of_light': self.speed_of_light,
            'impedance': self.impedance,
            'noise_power': self.noise_power,
            'transmit_power': self.transmit_power,
            'power_unit': self.power_unit,
        }
        values.update(changes)
        return PhysicalConstants(**values)


def _green_block(rx_points, tx_points, u_r, u_t, constants: PhysicalConstants) -> np.ndarray:
    difference = rx_points[:, None, :] - tx_points[None, :, :]
    distance = np.linalg.norm(difference, axis=-1)

    if np.any(distance < COINCIDENCE_TOLERANCE):
        rx_index, tx_index = np.argwhere(distance < COINCIDENCE_TOLERANCE)[0]
        raise SingularityError(int(rx_index), int(tx_index))

    wavelength = constants.wavelength
    projection = float(u_r @ u_t) - (difference @ u_r) * (difference @ u_t) / distance ** 2
    scale = -1j * constants.impedance * np.exp(-1j * constants.wavenumber * distance) / (2.0 * wavelength * distance)
    return scale * projection


def green_matrix(
    rx_points: np.ndarray, tx_points: np.ndarray, u_r: np.ndarray, u_t: np.ndarray, constants: PhysicalConstants
) -> np.ndarray:
    """
    Polarised LoS dyadic Green's function h(r_i, s_j) for every pair of points.
    Rows follow rx_points, columns tx_points.
    """
    rx_points = np.atleast_2d(np.asarray(rx_points, dtype=float))
    tx_points = np.atleast_2d(np.asarray(tx_points, dtype=float))
    u_r = np.asarray(u_r, dtype=float)
    u_t = np.asarray(u_t, dtype=float)

    result = np.empty((rx_points.shape[0], tx_points.shape[0]), dtype=complex)
    for start in range(0, rx_points.shape[0], ROWS_PER_BLOCK):
        stop = start + ROWS_PER_BLOCK
        try:
            result[start:stop] = _green_block(rx_points[start:stop], tx_points, u_r, u_t, constants)
        except SingularityError as e:
            raise SingularityError(e.rx_index + start, e.tx_index) from e
    return result


def green_scalar(r, s, u_r, u_t, constants: PhysicalConstants) -> complex:
    """u_R^T G(r, s) u_T"""
    try:
        return complex(green_matrix(r, s, u_r, u_t, constants)[0, 0])
    except SingularityError:
        raise SingularityError() from None


@dataclass(eq=False)
class SampledChannel:
    """Green's function samples between Rx (rows) and Tx (columns) grids, times field_scale."""
    tx: QuadratureGrid
    rx: QuadratureGrid
    matrix: np.ndarray
    constants: PhysicalConstants

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def weighted_matrix(self) -> np.ndarray:
        """Phi_R^{1/2} H Phi_T^{1/2}"""
        return np.sqrt(self.rx.weights)[:, None] * self.matrix * np.sqrt(self.tx.weights)[None, :]

    def tx_row(self, points: np.ndarray) -> np.ndarray:
        """h(r_i, s) for every Rx node r_i and the given Tx points; shape (K, M_R)."""
        return self.constants.field_scale * green_matrix(
            self.rx.points, points, self.rx.geometry.global_polarization,
            self.tx.geometry.global_polarization, self.constants,
        ).T


def build_sampled_channel(tx_grid: QuadratureGrid, rx_grid: QuadratureGrid, constants: PhysicalConstants):
    matrix = constants.field_scale * green_matrix(
        rx_grid.points,
        tx_grid.points,
        rx_grid.geometry.global_polarization,
        tx_grid.geometry.global_polarization,
        constants,
    )
    logger.debug("Sampled channel %dx%d at f=%.4g Hz", matrix.shape[0], matrix.shape[1], constants.frequency)
    return SampledChannel(tx=tx_grid, rx=rx_grid, matrix=matrix, constants=constants)


def build_channel(tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants, order) -> SampledChannel:
    """Gauss-Legendre grids of the given order on both apertures, then the sampled channel."""
    if not isinstance(order, GaussLegendreRule):
        order = int(order)
    return build_sampled_channel(build_grid(tx, order), build_grid(rx, order), constants)


def truncation_order(length: float, wavelength: float) -> int:
    """ceil(L / lambda), robust to representation error in L / lambda."""
    return int(math.ceil(round(length / wavelength, 9)))


def _orders(geometry: ApertureGeometry, wavelength: float) -> Tuple[int, int]:
    return truncation_order(geometry.length_x, wavelength), truncation_order(geometry.length_y, wavelength)


def mode_indices(length_x: float, length_y: float, wavelength: float) -> np.ndarray:
    """(n, m) wavenumber indices, n outer, |n| <= ceil(L_x/lambda), |m| <= ceil(L_y/lambda)."""
    order_x = truncation_order(length_x, wavelength)
    order_y = truncation_order(length_y, wavelength)
    n, m = np.meshgrid(np.arange(-order_x, order_x + 1), np.arange(-order_y, order_y + 1), indexing='ij')
    return np.column_stack([n.ravel(), m.ravel()])


def fourier_basis(geometry: ApertureGeometry, local_points: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """psi_{n,m}(s) = exp(j 2 pi (n s_x / L_x + m s_y / L_y)) / sqrt(A); shape (K, modes)."""
    local_points = np.atleast_2d(local_points)
    phase = (
        np.outer(local_points[:, 0], modes[:, 0]) / geometry.length_x
        + np.outer(local_points[:, 1], modes[:, 1]) / geometry.length_y
    )
    return np.exp(2j * np.pi * phase) / math.sqrt(geometry.area)


@dataclass(eq=False)
class WavenumberChannel:
    tx_orders: Tuple[int, int]
    rx_orders: Tuple[int, int]
    tx_modes: np.ndarray
    rx_modes: np.ndarray
    tx_basis: np.ndarray
    rx_basis: np.ndarray
    matrix: np.ndarray
    channel: SampledChannel

    @property
    def tx_mode_count(self) -> int:
        return (2 * self.tx_orders[0] + 1) * (2 * self.tx_orders[1] + 1)

    @property
    def rx_mode_count(self) -> int:
        return (2 * self.rx_orders[0] + 1) * (2 * self.rx_orders[1] + 1)

    def spatial(self, coefficients: np.ndarray) -> np.ndarray:
        """Beamformer samples at the Tx quadrature nodes from wavenumber coefficients."""
        return self.tx_basis @ coefficients


def build_wavenumber_channel(chan: SampledChannel) -> WavenumberChannel:
    """H_w = Psi_R^H Phi_R H Phi_T Psi_T"""
    wavelength = chan.constants.wavelength
    tx_geometry = chan.tx.geometry
    rx_geometry = chan.rx.geometry

    tx_modes = mode_indices(tx_geometry.length_x, tx_geometry.length_y, wavelength)
    rx_modes = mode_indices(rx_geometry.length_x, rx_geometry.length_y, wavelength)
    tx_basis = fourier_basis(tx_geometry, chan.tx.local_points, tx_modes)
    rx_basis = fourier_basis(rx_geometry, chan.rx.local_points, rx_modes)

    weighted = chan.rx.weights[:, None] * chan.matrix * chan.tx.weights[None, :]
    matrix = rx_basis.conj().T @ weighted @ tx_basis
    logger.debug("Wavenumber channel %dx%d", matrix.shape[0], matrix.shape[1])

    return WavenumberChannel(
        tx_orders=_orders(tx_geometry, wavelength),
        rx_orders=_orders(rx_geometry, wavelength),
        tx_modes=tx_modes,
        rx_modes=rx_modes,
        tx_basis=tx_basis,
        rx_basis=rx_basis,
        matrix=matrix,
        channel=chan,
    )


@dataclass(eq=False)
class DiscreteArrayChannel:
    """Element-to-element channel A_d h(r_bar, s_bar) of two planar arrays."""
    tx: QuadratureGrid
    rx: QuadratureGrid
    spacing: float
    element_area: float
    matrix: np.ndarray
    constants: PhysicalConstants

    @property
    def tx_counts(self) -> Tuple[int, int]:
        return self.tx.shape

    @property
    def rx_counts(self) -> Tuple[int, int]:
        return self.rx.shape

    @property
    def tx_elements(self) -> int:
        return self.tx.size

    @property
    def rx_elements(self) -> int:
        return self.rx.size


def build_spda_channel(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    spacing: Optional[float] = None,
    element_area: Optional[float] = None,
) -> DiscreteArrayChannel:
    """Half-wavelength array with effective element aperture lambda^2 / (4 pi) unless overridden."""
    wavelength = constants.wavelength
    if spacing is None:
        spacing = 0.5 * wavelength
    if element_area is None:
        element_area = wavelength ** 2 / (4.0 * math.pi)
    if element_area <= 0:
        raise DomainError(f"Element area must be positive (got {element_area})")

    tx_grid = build_element_grid(tx, spacing, element_area)
    rx_grid = build_element_grid(rx, spacing, element_area)
    matrix = constants.field_scale * element_area * green_matrix(
        rx_grid.points, tx_grid.points, rx.global_polarization, tx.global_polarization, constants
    )
    logger.debug("Discrete array channel %dx%d, spacing %.4g m", matrix.shape[0], matrix.shape[1], spacing)
    return DiscreteArrayChannel(
        tx=tx_grid, rx=rx_grid, spacing=spacing, element_area=element_area, matrix=matrix, constants=constants
    )


def sample_metasurface_channel(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    element_spacing: float,
    element_area: float,
) -> DiscreteArrayChannel:
    if element_spacing <= 0:
        raise DomainError(f"Element spacing must be positive (got {element_spacing})")
    if element_area > element_spacing ** 2 * (1 + 1e-12):
        raise DomainError(f"Element area {element_area} does not fit the spacing {element_spacing}")
    return build_spda_channel(tx, rx, constants, spacing=element_spacing, element_area=element_area)
