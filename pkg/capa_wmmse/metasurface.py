"""
Discrete realisations of a continuous beamformer: the beamformer is sampled at
metasurface element centres and evaluated on the element channel A_e h.
"""
import logging
import math

import numpy as np

from .baselines import SvdBeamformingResult
from .channel import DiscreteArrayChannel, SampledChannel, WavenumberChannel, fourier_basis
from .exceptions import DegenerateInput, DimensionError
from .utils import hermitian, log2det
from .wmmse import BeamformerMatrix, reconstruct_continuous

logger = logging.getLogger(__name__)


def element_size(wavelength: float, fraction: float = 0.05) -> float:
    """Edge of a square metasurface element, a fraction of the wavelength."""
    return fraction * wavelength


def discretize(values: np.ndarray, element_area: float, budget: float) -> np.ndarray:
    """
    Element excitations sqrt(A_e) w(s_bar), rescaled so that the squared
    Frobenius norm equals the power budget.
    """
    excitation = math.sqrt(element_area) * np.asarray(values, dtype=complex)
    power = float(np.sum(np.abs(excitation) ** 2))
    if not power > 0:
        raise DegenerateInput("Sampled beamformer carries no power")
    return excitation * math.sqrt(budget / power)


def discrete_rate(dchan: DiscreteArrayChannel, excitation: np.ndarray, noise: float = None) -> float:
    """log2 det(I + W_bar^H H_bar^H H_bar W_bar / sigma^2)"""
    noise = dchan.constants.noise_power if noise is None else noise
    excitation = np.atleast_2d(np.asarray(excitation, dtype=complex))
    if excitation.shape[0] != dchan.tx_elements:
        raise DimensionError(f"Excitation has {excitation.shape[0]} rows, array has {dchan.tx_elements} elements")

    received = dchan.matrix @ excitation
    return log2det(np.eye(excitation.shape[1]) + hermitian(received.conj().T @ received) / noise)


def sample_wmmse(beamformer: BeamformerMatrix, chan: SampledChannel, dchan: DiscreteArrayChannel) -> np.ndarray:
    values = reconstruct_continuous(beamformer, chan, dchan.tx.points)
    return discretize(values, dchan.element_area, dchan.constants.power)


def sample_fourier(
    result: SvdBeamformingResult, wchan: WavenumberChannel, dchan: DiscreteArrayChannel
) -> np.ndarray:
    geometry = wchan.channel.tx.geometry
    values = fourier_basis(geometry, dchan.tx.local_points, wchan.tx_modes) @ result.precoder
    return discretize(values, dchan.element_area, dchan.constants.power)


def wmmse_metasurface_rate(beamformer: BeamformerMatrix, chan: SampledChannel, dchan: DiscreteArrayChannel) -> float:
    rate = discrete_rate(dchan, sample_wmmse(beamformer, chan, dchan))
    logger.debug("WMMSE on %d elements (spacing %.4g m): %.6f", dchan.tx_elements, dchan.spacing, rate)
    return rate


def fourier_metasurface_rate(
    result: SvdBeamformingResult, wchan: WavenumberChannel, dchan: DiscreteArrayChannel
) -> float:
    rate = discrete_rate(dchan, sample_fourier(result, wchan, dchan))
    logger.debug("Fourier-SVD on %d elements (spacing %.4g m): %.6f", dchan.tx_elements, dchan.spacing, rate)
    return rate
