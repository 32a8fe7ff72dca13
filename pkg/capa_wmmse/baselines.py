import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .channel import (
    DiscreteArrayChannel, PhysicalConstants, SampledChannel, WavenumberChannel, build_sampled_channel,
)
from .exceptions import DegenerateInput, DimensionError, DomainError, SampleBudgetExceeded
from .geometry import ApertureGeometry, build_uniform_grid
from .reports import SolveReport
from .utils import log2det

logger = logging.getLogger(__name__)

BISECTION_TOLERANCE = 1e-12
BISECTION_MAX_STEPS = 200
DENSE_MIN_SAMPLES = 60
DENSE_SAMPLES_PER_WAVELENGTH = 15
DEFAULT_SAMPLE_BUDGET = 4096


def water_fill(gains, total_power: float, noise_power: float) -> np.ndarray:
    """
    P_k = max(0, mu - noise / g_k) with the water level mu found by bisection so
    that sum(P_k) = total_power.
    """
    gains = np.asarray(gains, dtype=float)
    if np.any(gains < 0) or not np.all(np.isfinite(gains)):
        raise DomainError("Channel gains must be finite and nonnegative")
    if not np.any(gains > 0):
        raise DegenerateInput("Water-filling needs at least one positive gain")
    if not (total_power > 0 and noise_power > 0):
        raise DomainError("Power budget and noise power must be positive")

    active = gains > 0
    floors = np.full(gains.shape, np.inf)
    floors[active] = noise_power / gains[active]

    def allocated(level):
        return np.sum(np.maximum(0.0, level - floors[active]))

    low = 0.0
    high = total_power + np.min(floors[active])
    for _ in range(BISECTION_MAX_STEPS):
        level = 0.5 * (low + high)
        if allocated(level) > total_power:
            high = level
        else:
            low = level
        if high - low <= BISECTION_TOLERANCE * high:
            break

    powers = np.zeros(gains.shape)
    powers[active] = np.maximum(0.0, 0.5 * (low + high) - floors[active])
    return powers * (total_power / np.sum(powers))


@dataclass(eq=False)
class SvdBeamformingResult:
    """
    Right singular beams (modes x N, orthonormal columns), all singular values
    in descending order, water-filled stream powers and the resulting rate.
    """
    method: str
    beams: np.ndarray
    singular_values: np.ndarray
    powers: np.ndarray
    rate_bits: float
    wall_ms: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def streams(self) -> int:
        return self.beams.shape[1]

    @property
    def precoder(self) -> np.ndarray:
        """Beams with the stream amplitudes applied."""
        return self.beams * np.sqrt(self.powers)[None, :]

    def to_report(self, config: dict = None) -> SolveReport:
        return SolveReport(
            method=self.method,
            rate_bits=self.rate_bits,
            iterations=0,
            rate_trace=[],
            wall_ms=self.wall_ms,
            effective_rank=int(np.sum(self.powers > 0)),
            streams=self.streams,
            converged=True,
            transmit_power=float(np.sum(self.powers)),
            stream_powers=[float(item) for item in self.powers],
            config=config or {},
            extras={'singular_values': [float(item) for item in self.singular_values[:self.streams]], **self.extras},
        )


def svd_water_fill(
    matrix: np.ndarray, streams: Optional[int], constants: PhysicalConstants, method: str
) -> SvdBeamformingResult:
    started = time.perf_counter()
    _, singular_values, vh = la.svd(matrix, full_matrices=False)
    if streams is None:
        streams = singular_values.size
    if isinstance(streams, bool) or not 1 <= streams <= singular_values.size:
        raise DimensionError(f"Stream count must be between 1 and {singular_values.size} (got {streams})")

    gains = singular_values[:streams] ** 2
    powers = water_fill(gains, constants.power, constants.noise_power)
    rate = float(np.sum(np.log2(1.0 + gains * powers / constants.noise_power)))
    return SvdBeamformingResult(
        method=method,
        beams=vh[:streams].conj().T,
        singular_values=singular_values,
        powers=powers,
        rate_bits=rate,
        wall_ms=1e3 * (time.perf_counter() - started),
    )


def composed_rate(matrix: np.ndarray, result: SvdBeamformingResult, noise_power: float) -> float:
    """log2 det(I + W^H H^H H W / sigma^2) of the water-filled precoder."""
    received = matrix @ result.precoder
    return log2det(np.eye(result.streams) + received.conj().T @ received / noise_power)


def fourier_svd_solve(
    wchan: WavenumberChannel, streams: Optional[int], constants: PhysicalConstants
) -> SvdBeamformingResult:
    """
    SVD of the wavenumber-domain channel with water-filling over the squared
    singular values. Also reports the rate of the reconstructed spatial
    beamformer on the quadrature model it was built from. Quadrature orders
    below 4 * (highest mode order) + 2 under-resolve the projection and
    overstate the rate; they are logged as a warning.
    """
    highest = max(wchan.tx_orders + wchan.rx_orders)
    required = 4 * highest + 2
    resolved = min(wchan.channel.tx.order, wchan.channel.rx.order)
    if resolved < required:
        logger.warning(
            "Fourier-SVD quadrature order %d is below %d for mode order %d, the rate is overstated",
            resolved, required, highest,
        )

    limit = min(wchan.rx_mode_count, wchan.tx_mode_count)
    if streams is None:
        streams = limit
    if streams > limit:
        raise DimensionError(f"Fourier-SVD supports at most {limit} streams (got {streams})")

    result = svd_water_fill(wchan.matrix, streams, constants, 'fourier_svd')

    chan = wchan.channel
    spatial = wchan.spatial(result.precoder)
    received = chan.matrix @ (chan.tx.weights[:, None] * spatial)
    gram = received.conj().T @ (chan.rx.weights[:, None] * received)
    result.extras.update({
        'tx_modes': wchan.tx_mode_count,
        'rx_modes': wchan.rx_mode_count,
        'spatial_rate': log2det(np.eye(streams) + gram / constants.noise_power),
        'spatial_power': float(np.sum(chan.tx.weights[:, None] * np.abs(spatial) ** 2)),
    })
    return result


def spda_svd_solve(
    dchan: DiscreteArrayChannel, streams: Optional[int], constants: PhysicalConstants
) -> SvdBeamformingResult:
    limit = min(dchan.rx_elements, dchan.tx_elements)
    if streams is None:
        streams = limit
    if streams > limit:
        raise DimensionError(f"Discrete array supports at most {limit} streams (got {streams})")

    result = svd_water_fill(dchan.matrix, streams, constants, 'spda')
    result.extras.update({
        'tx_elements': dchan.tx_elements,
        'rx_elements': dchan.rx_elements,
        'spacing': dchan.spacing,
        'element_area': dchan.element_area,
    })
    return result


def dense_samples(tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants) -> int:
    """60 samples per axis, or 15 per wavelength along the longest edge when that is more."""
    longest = max(tx.length_x, tx.length_y, rx.length_x, rx.length_y)
    per_axis = round(DENSE_SAMPLES_PER_WAVELENGTH * longest / constants.wavelength, 9)
    return max(DENSE_MIN_SAMPLES, int(math.ceil(per_axis)))


def dense_channel(
    tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants, samples_per_axis: int,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
) -> SampledChannel:
    if samples_per_axis ** 2 > sample_budget:
        raise SampleBudgetExceeded(samples_per_axis ** 2, sample_budget)
    return build_sampled_channel(
        build_uniform_grid(tx, samples_per_axis), build_uniform_grid(rx, samples_per_axis), constants
    )


def dense_optimal_solve(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    samples_per_axis: Optional[int] = None,
    streams: Optional[int] = None,
    verify: bool = False,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
) -> SvdBeamformingResult:
    """
    Optimality oracle: both apertures sampled uniformly, SVD of the area weighted
    channel sqrt(w_R) H sqrt(w_T) and water-filling. Without samples_per_axis the
    density comes from dense_samples, capped at the sample budget with a warning;
    an explicit density over the budget raises. With verify, the rate is
    recomputed at twice the density (half when twice would not fit the budget)
    and the difference reported.
    """
    started = time.perf_counter()
    if samples_per_axis is None:
        samples_per_axis = dense_samples(tx, rx, constants)
        if samples_per_axis ** 2 > sample_budget:
            capped = math.isqrt(sample_budget)
            logger.warning(
                "Dense sampling at %d/axis exceeds the sample budget of %d, using %d/axis",
                samples_per_axis, sample_budget, capped,
            )
            samples_per_axis = capped

    chan = dense_channel(tx, rx, constants, samples_per_axis, sample_budget)
    result = svd_water_fill(chan.weighted_matrix, streams, constants, 'dense_optimal')
    result.extras['samples_per_axis'] = samples_per_axis

    if verify:
        reference = 2 * samples_per_axis
        if reference ** 2 > sample_budget:
            reference = max(1, samples_per_axis // 2)
        other = dense_optimal_solve(tx, rx, constants, reference, streams, False, sample_budget)
        difference = abs(other.rate_bits - result.rate_bits)
        result.extras.update({'doubling_difference': difference, 'verify_samples_per_axis': reference})
        if difference >= 1e-3:
            logger.warning(
                "Dense sampling at %d/axis is not converged (%d/axis changes the rate by %.3e)",
                samples_per_axis, reference, difference,
            )

    result.wall_ms = 1e3 * (time.perf_counter() - started)
    return result
