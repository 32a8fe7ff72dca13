import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from .channel import PhysicalConstants, SampledChannel, build_channel, build_sampled_channel
from .exceptions import DimensionError, DomainError, SingularSystemError
from .geometry import ApertureGeometry, build_grid, build_uniform_grid
from .reports import DOF_COLUMNS, write_csv, write_matrix_csv
from .utils import hermitian, log2det
from .wmmse import BeamformerMatrix

logger = logging.getLogger(__name__)

DEFAULT_DOF_THRESHOLD_DB = 10.0
UNIFORM_DOF_SAMPLES = 40

Beamformer = Union[BeamformerMatrix, np.ndarray]


def _samples(beamformer: Beamformer, chan: SampledChannel) -> np.ndarray:
    samples = beamformer.samples if isinstance(beamformer, BeamformerMatrix) else np.asarray(beamformer)
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] != chan.tx.size:
        raise DimensionError(f"Beamformer has {samples.shape[0]} rows, Tx grid has {chan.tx.size} nodes")
    return samples


def _noise(chan: SampledChannel, noise: Optional[float]) -> float:
    noise = chan.constants.noise_power if noise is None else noise
    if not noise > 0:
        raise DomainError(f"Noise power must be positive (got {noise})")
    return noise


def _received(samples: np.ndarray, chan: SampledChannel) -> np.ndarray:
    """E = H Phi_T W, the received field at the Rx nodes."""
    return chan.matrix @ (chan.tx.weights[:, None] * samples)


def gram_matrix(beamformer: Beamformer, chan: SampledChannel) -> np.ndarray:
    """Q = W^H Phi_T H^H Phi_R H Phi_T W"""
    received = _received(_samples(beamformer, chan), chan)
    return hermitian(received.conj().T @ (chan.rx.weights[:, None] * received))


@dataclass(eq=False)
class ReceiverMatrix:
    """Receiver samples at the Rx quadrature nodes, row i is v(r_i)."""
    samples: np.ndarray

    @property
    def streams(self) -> int:
        return self.samples.shape[1]


@dataclass(eq=False)
class CorrelationMap:
    """
    xi[n, m] = |(V^H Phi_R H Phi_T W)[n, m]|^2, the coupling of stream m into
    the estimate of stream n. receiver_power holds ||v_n||^2 under Phi_R.
    """
    xi: np.ndarray
    receiver_power: np.ndarray
    noise_power: float
    rate_bits: float

    @property
    def streams(self) -> int:
        return self.xi.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.xi))

    @property
    def max_off_diagonal(self) -> float:
        if self.streams == 1:
            return 0.0
        return float(np.max(self.xi[~np.eye(self.streams, dtype=bool)]))

    def parallel_rate(self) -> float:
        """Rate of the streams read as parallel channels, interference ignored."""
        snr = self.diagonal / (self.noise_power * self.receiver_power)
        return float(np.sum(np.log2(1.0 + snr)))

    def to_csv(self, path: Path):
        write_matrix_csv(path, self.xi)

    def to_dict(self) -> dict:
        return {
            'xi': self.xi,
            'receiver_power': self.receiver_power,
            'noise_power': self.noise_power,
            'rate_bits': self.rate_bits,
            'parallel_rate_bits': self.parallel_rate(),
        }


def achievable_rate(beamformer: Beamformer, chan: SampledChannel, noise: float = None) -> float:
    """log2 det(I_N + Q / noise)"""
    noise = _noise(chan, noise)
    gram = gram_matrix(beamformer, chan)
    if not np.any(gram):
        return 0.0
    return log2det(np.eye(gram.shape[0]) + gram / noise)


def mmse_receiver(beamformer: Beamformer, chan: SampledChannel, noise: float = None) -> ReceiverMatrix:
    """V = H Phi_T W Theta^{-1} with Theta = noise I + Q."""
    noise = _noise(chan, noise)
    samples = _samples(beamformer, chan)
    received = _received(samples, chan)
    gram = hermitian(received.conj().T @ (chan.rx.weights[:, None] * received))

    theta = noise * np.eye(samples.shape[1]) + gram
    try:
        factor = la.cho_factor(theta, lower=True)
    except la.LinAlgError as e:
        raise SingularSystemError("Theta is not positive definite") from e
    return ReceiverMatrix(la.cho_solve(factor, received.conj().T).conj().T)


def mse_matrix(
    beamformer: Beamformer, receiver: Union[ReceiverMatrix, np.ndarray], chan: SampledChannel, noise: float = None
) -> np.ndarray:
    """E = (I - L)(I - L)^H + noise V^H Phi_R V with L = V^H Phi_R H Phi_T W."""
    noise = _noise(chan, noise)
    samples = _samples(beamformer, chan)
    receiver = receiver.samples if isinstance(receiver, ReceiverMatrix) else np.asarray(receiver, dtype=complex)
    if receiver.shape != (chan.rx.size, samples.shape[1]):
        raise DimensionError(f"Receiver must be {chan.rx.size}x{samples.shape[1]} (got {receiver.shape})")

    weighted = chan.rx.weights[:, None] * receiver
    residual = np.eye(samples.shape[1]) - weighted.conj().T @ _received(samples, chan)
    return hermitian(residual @ residual.conj().T + noise * receiver.conj().T @ weighted)


def sic_rate_oracle(
    beamformer: Beamformer, chan: SampledChannel, noise: float = None, order: Sequence[int] = None
) -> Tuple[np.ndarray, float]:
    """
    Per-stream rates of the MMSE-SIC receiver. Streams are decoded in `order`
    (index order by default); when stream n is decoded, the streams decoded
    before it are cancelled and the later ones act as interference.

    Returns the rates in decoding order and their sum.
    """
    noise = _noise(chan, noise)
    gram = gram_matrix(beamformer, chan)
    streams = gram.shape[0]

    order = list(range(streams)) if order is None else [int(item) for item in order]
    if sorted(order) != list(range(streams)):
        raise DimensionError(f"Decoding order must be a permutation of 0..{streams - 1} (got {order})")

    rates = np.empty(streams)
    for position, stream in enumerate(order):
        later = order[position + 1:]
        signal = float(np.real(gram[stream, stream]))
        if later:
            cross = gram[np.ix_([stream], later)]
            interference = noise * np.eye(len(later)) + gram[np.ix_(later, later)]
            signal -= float(np.real(cross @ la.solve(interference, cross.conj().T, assume_a='her')))
        rates[position] = math.log2(1.0 + max(signal, 0.0) / noise)

    return rates, float(np.sum(rates))


def stream_correlation(beamformer: Beamformer, chan: SampledChannel, noise: float = None) -> CorrelationMap:
    noise = _noise(chan, noise)
    samples = _samples(beamformer, chan)
    receiver = mmse_receiver(samples, chan, noise).samples

    weighted = chan.rx.weights[:, None] * receiver
    coupling = weighted.conj().T @ _received(samples, chan)
    receiver_power = np.real(np.sum(receiver.conj() * weighted, axis=0))
    return CorrelationMap(
        xi=np.abs(coupling) ** 2,
        receiver_power=receiver_power,
        noise_power=noise,
        rate_bits=achievable_rate(samples, chan, noise),
    )


def count_dof(singular_values: np.ndarray, threshold_db: float = DEFAULT_DOF_THRESHOLD_DB) -> int:
    """Singular values within threshold_db (20 log10 ratio) of the largest."""
    if not threshold_db > 0:
        raise DomainError(f"DoF threshold must be positive (got {threshold_db} dB)")
    singular_values = np.asarray(singular_values, dtype=float)
    top = singular_values.max() if singular_values.size else 0.0
    if top <= 0:
        return 0
    floor = top * 10.0 ** (-threshold_db / 20.0)
    return int(np.sum(singular_values >= floor * (1.0 - 1e-12)))


def _channel_singular_values(chan: SampledChannel, weighted: bool) -> np.ndarray:
    matrix = chan.weighted_matrix if weighted else chan.matrix
    return la.svd(matrix, compute_uv=False)


def dof_order(tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants, order: int) -> int:
    """
    Quadrature order for DoF counting: at least two nodes per wavelength along
    the longest aperture edge, max(order, ceil(2 L_max / lambda)).
    """
    longest = max(tx.length_x, tx.length_y, rx.length_x, rx.length_y)
    return max(int(order), int(math.ceil(round(2.0 * longest / constants.wavelength, 9))))


def dof_estimate(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    order: int,
    threshold_db: float = DEFAULT_DOF_THRESHOLD_DB,
    weighted: bool = True,
) -> int:
    """
    Spatial DoF from the Gauss-Legendre sampled channel: with weighted, the
    singular values of Phi_R^{1/2} H Phi_T^{1/2}, otherwise those of H. The
    order is raised to dof_order so short links are not under-resolved.
    """
    if order < 2:
        raise DomainError(f"DoF estimation needs at least 2 samples per axis (got {order})")
    chan = build_channel(tx, rx, constants, dof_order(tx, rx, constants, order))
    return count_dof(_channel_singular_values(chan, weighted), threshold_db)


def uniform_dof(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    samples_per_axis: int = UNIFORM_DOF_SAMPLES,
    threshold_db: float = DEFAULT_DOF_THRESHOLD_DB,
) -> int:
    """DoF of a dense uniform (midpoint) sampling, the reference for dof_estimate."""
    chan = build_sampled_channel(
        build_uniform_grid(tx, samples_per_axis), build_uniform_grid(rx, samples_per_axis), constants
    )
    return count_dof(_channel_singular_values(chan, True), threshold_db)


def link_distance(tx: ApertureGeometry, rx: ApertureGeometry) -> float:
    return float(np.linalg.norm(rx.center - tx.center))


def closed_form_dof(tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants) -> float:
    """Paraxial far-field estimate A_T A_R / (lambda D)^2."""
    distance = link_distance(tx, rx)
    if distance == 0:
        raise DomainError("Apertures share a centre")
    return tx.area * rx.area / (constants.wavelength * distance) ** 2


def nlos_dof(tx: ApertureGeometry, rx: ApertureGeometry, constants: PhysicalConstants) -> float:
    return 4.0 * min(tx.area, rx.area) / constants.wavelength ** 2


@dataclass
class DofReport:
    distance: float
    fresnel_ratio: float
    dof: int
    dof_uniform: Optional[int]
    dof_closed_form: float
    dof_nlos: float

    def to_row(self) -> dict:
        return {key: getattr(self, key) for key in DOF_COLUMNS}


def dof_report(
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    order: int,
    threshold_db: float = DEFAULT_DOF_THRESHOLD_DB,
    weighted: bool = True,
    uniform_samples: Optional[int] = UNIFORM_DOF_SAMPLES,
) -> DofReport:
    """DoF estimate with its uniform-sampling reference and the closed forms; F = D^2 / A_R."""
    distance = link_distance(tx, rx)
    dof_uniform = None
    if uniform_samples:
        dof_uniform = uniform_dof(tx, rx, constants, uniform_samples, threshold_db)

    report = DofReport(
        distance=distance,
        fresnel_ratio=distance ** 2 / rx.area,
        dof=dof_estimate(tx, rx, constants, order, threshold_db, weighted),
        dof_uniform=dof_uniform,
        dof_closed_form=closed_form_dof(tx, rx, constants),
        dof_nlos=nlos_dof(tx, rx, constants),
    )
    logger.debug("DoF at D=%.3f m: %d (uniform %s)", distance, report.dof, report.dof_uniform)
    return report


def write_dof_table(path: Path, reports: Sequence[DofReport]):
    write_csv(path, DOF_COLUMNS, (report.to_row() for report in reports))


def kernel_rate(
    beamformer: Callable[[np.ndarray], np.ndarray],
    tx: ApertureGeometry,
    rx: ApertureGeometry,
    constants: PhysicalConstants,
    order: int = 20,
) -> float:
    """
    log2 det(I + (1/sigma^2) int int w(s)^H K(s, z) w(z) ds dz) for a beamformer
    given as a function of global Tx points, with the coupling kernel
    K(s, z) = int h(r, s)^* h(r, z) dr. Every integral uses its own
    Gauss-Legendre rule of the given order.
    """
    tx_grid = build_grid(tx, order)
    rx_grid = build_grid(rx, order)
    chan = build_sampled_channel(tx_grid, rx_grid, constants)

    values = np.asarray(beamformer(tx_grid.points), dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != tx_grid.size:
        raise DimensionError(f"Beamformer returned {values.shape[0]} rows for {tx_grid.size} points")

    kernel = hermitian(chan.matrix.conj().T @ (rx_grid.weights[:, None] * chan.matrix))
    weighted = tx_grid.weights[:, None] * values
    gram = hermitian(weighted.conj().T @ kernel @ weighted)
    return log2det(np.eye(values.shape[1]) + gram / constants.noise_power)
