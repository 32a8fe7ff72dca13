import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as la

from .channel import SampledChannel
from .exceptions import (
    DegenerateInput, DimensionError, DomainError, IllConditionedIterate, MissingReconstruction,
    NonPositiveDefiniteKernel,
)
from .reports import SolveReport
from .utils import cholesky_with_shift, hermitian, log2det

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12


class InitMode(Enum):
    RANDOM = 'random'
    MATCHED_FILTER = 'matched_filter'


@dataclass
class SolverConfig:
    order: int = 10
    streams: Optional[int] = None
    max_iterations: int = 100
    threshold: float = 1e-6
    init: InitMode = InitMode.MATCHED_FILTER
    seed: int = 42
    fixed_iterations: bool = False
    condition_limit: float = 1e14

    def __post_init__(self):
        self.init = InitMode(self.init)
        if not self.threshold > 0:
            raise DomainError(f"Stopping threshold must be positive (got {self.threshold})")
        if self.max_iterations < 1:
            raise DomainError(f"At least one iteration is required (got {self.max_iterations})")

    def to_dict(self) -> dict:
        return {
            'M': self.order,
            'N': self.streams,
            'max_iter': self.max_iterations,
            'threshold': self.threshold,
            'init': self.init.value,
            'seed': self.seed,
            'fixed_iterations': self.fixed_iterations,
        }


@dataclass(eq=False)
class BeamformerMatrix:
    """
    Beamformer samples at the Tx quadrature nodes (row i is w(s_i)). When
    coefficients are present, w(s) = h~(s) C for any s on the Tx aperture.
    """
    samples: np.ndarray
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=complex))
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise DimensionError(f"Beamformer must be an M_s x N matrix (got shape {self.samples.shape})")
        if not np.all(np.isfinite(self.samples)):
            raise DegenerateInput("Beamformer samples are not finite")

    @property
    def streams(self) -> int:
        return self.samples.shape[1]

    def scaled(self, factor: float) -> 'BeamformerMatrix':
        coefficients = None if self.coefficients is None else self.coefficients * factor
        return BeamformerMatrix(self.samples * factor, coefficients)


class PowerConstraint:
    """Quadratic transmit power Tr(W^H P W) at the Tx quadrature nodes."""
    reconstructable = False

    def power(self, samples: np.ndarray) -> float:
        raise NotImplementedError

    def solve(self, matrix: np.ndarray) -> np.ndarray:
        """P^{-1} matrix"""
        raise NotImplementedError


class DiagonalPower(PowerConstraint):
    """P = Phi_T, the uncorrelated constraint."""
    reconstructable = True

    def __init__(self, weights: np.ndarray):
        self.weights = np.asarray(weights, dtype=float)

    def power(self, samples: np.ndarray) -> float:
        return float(np.sum(self.weights[:, None] * np.abs(samples) ** 2))

    def solve(self, matrix: np.ndarray) -> np.ndarray:
        return matrix / self.weights[:, None]


class KernelPower(PowerConstraint):
    """P = Phi_T C Phi_T for a Hermitian positive definite correlation kernel C."""

    def __init__(self, weights: np.ndarray, kernel: np.ndarray):
        kernel = np.asarray(kernel, dtype=complex)
        size = weights.shape[0]
        if kernel.shape != (size, size):
            raise DimensionError(f"Kernel must be {size}x{size} (got {kernel.shape})")

        scale = np.linalg.norm(kernel)
        if not np.all(np.isfinite(kernel)) or scale == 0:
            raise NonPositiveDefiniteKernel("Kernel is zero or not finite")
        if np.linalg.norm(kernel - kernel.conj().T) > 1e-10 * scale:
            raise NonPositiveDefiniteKernel("Kernel is not Hermitian")
        if np.min(la.eigvalsh(hermitian(kernel))) <= 0:
            raise NonPositiveDefiniteKernel("Kernel is not positive definite")

        self.matrix = hermitian(weights[:, None] * kernel * weights[None, :])
        self.factor, self.shift = cholesky_with_shift(self.matrix)

    def power(self, samples: np.ndarray) -> float:
        return float(np.real(np.trace(samples.conj().T @ self.matrix @ samples)))

    def solve(self, matrix: np.ndarray) -> np.ndarray:
        return la.cho_solve(self.factor, matrix)


@dataclass(eq=False)
class WmmseState:
    """
    Iterate W_t together with the quantities derived from it (received field
    samples E = H Phi_T W_t, back-propagated field Y = H^H Phi_R E, Gram Q and
    effective noise). theta, weight and omega are those of the step that
    produced W_t.
    """
    beamformer: BeamformerMatrix
    iteration: int
    rate_trace: List[float]
    received: np.ndarray
    backward: np.ndarray
    gram: np.ndarray
    effective_noise: float
    transmit_power: float
    theta: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    epsilon: Optional[float] = None

    @property
    def rate(self) -> float:
        return self.rate_trace[-1]

    @property
    def samples(self) -> np.ndarray:
        return self.beamformer.samples


def _propagate(samples: np.ndarray, chan: SampledChannel):
    received = chan.matrix @ (chan.tx.weights[:, None] * samples)
    weighted = chan.rx.weights[:, None] * received
    backward = chan.matrix.conj().T @ weighted
    gram = hermitian(received.conj().T @ weighted)
    return received, backward, gram


def _effective_noise(chan: SampledChannel, transmit_power: float) -> float:
    return chan.constants.noise_power / chan.constants.power * transmit_power


def _state(
    beamformer: BeamformerMatrix, chan: SampledChannel, constraint: PowerConstraint, iteration: int,
    rate_trace: List[float], **factors
) -> WmmseState:
    transmit_power = constraint.power(beamformer.samples)
    if not transmit_power > 0:
        raise DegenerateInput(f"Beamformer carries no transmit power at t={iteration}")

    received, backward, gram = _propagate(beamformer.samples, chan)
    effective_noise = _effective_noise(chan, transmit_power)
    rate = log2det(np.eye(beamformer.streams) + gram / effective_noise)

    return WmmseState(
        beamformer=beamformer,
        iteration=iteration,
        rate_trace=rate_trace + [rate],
        received=received,
        backward=backward,
        gram=gram,
        effective_noise=effective_noise,
        transmit_power=transmit_power,
        **factors,
    )


def init_state(chan: SampledChannel, beamformer: BeamformerMatrix, constraint: PowerConstraint = None) -> WmmseState:
    if beamformer.samples.shape[0] != chan.tx.size:
        raise DimensionError(f"Beamformer has {beamformer.samples.shape[0]} rows, Tx grid has {chan.tx.size} nodes")
    return _state(beamformer, chan, constraint or DiagonalPower(chan.tx.weights), 0, [])


def init_beamformer(
    chan: SampledChannel,
    streams: int,
    mode=InitMode.MATCHED_FILTER,
    seed: int = 42,
    constraint: PowerConstraint = None,
) -> BeamformerMatrix:
    """
    W_0 scaled to the power budget.

    random: complex Gaussian entries from numpy.random.default_rng(seed).
    matched_filter: the N dominant right singular vectors x_n of
    Phi_R^{1/2} H Phi_T^{1/2}, mapped back to node samples as Phi_T^{-1/2} x_n,
    so that the initial streams are orthogonal through the channel.
    """
    mode = InitMode(mode)
    size = chan.tx.size
    if isinstance(streams, bool) or not 1 <= streams <= size:
        raise DimensionError(f"Stream count must be between 1 and {size} (got {streams})")

    constraint = constraint or DiagonalPower(chan.tx.weights)

    if mode == InitMode.RANDOM:
        rng = np.random.default_rng(seed)
        samples = (rng.standard_normal((size, streams)) + 1j * rng.standard_normal((size, streams))) / np.sqrt(2.0)
    else:
        _, _, vh = la.svd(chan.weighted_matrix, full_matrices=False)
        samples = vh[:streams].conj().T / np.sqrt(chan.tx.weights)[:, None]

    power = constraint.power(samples)
    if not power > 0:
        raise DegenerateInput("Initial beamformer carries no power")
    return BeamformerMatrix(samples * np.sqrt(chan.constants.power / power))


def _checked(matrix: np.ndarray, iteration: int, limit: float) -> np.ndarray:
    condition = np.linalg.cond(matrix)
    if not condition <= limit:
        raise IllConditionedIterate(iteration, float(condition))
    return matrix


def wmmse_step(
    state: WmmseState, chan: SampledChannel, constraint: PowerConstraint = None, condition_limit: float = 1e14
) -> WmmseState:
    """
    One matrix WMMSE update: from Q, Theta, U of W_t build G, V, epsilon and
    Omega, then W_{t+1} = P^{-1} Phi_T Y Theta^{-1} U Omega^{-1}.
    """
    constraint = constraint or DiagonalPower(chan.tx.weights)
    streams = state.beamformer.streams
    identity = np.eye(streams)
    noise = chan.constants.noise_power
    t = state.iteration

    if not state.effective_noise > 0:
        raise DegenerateInput(f"Effective noise vanished at t={t}")

    theta = _checked(state.effective_noise * identity + state.gram, t, condition_limit)
    weight = identity + state.gram / state.effective_noise
    theta_factor = la.cho_factor(theta, lower=True)

    # Y Theta^{-1}
    forward = la.cho_solve(theta_factor, state.backward.conj().T).conj().T
    if constraint.reconstructable:
        direction = forward
        ambient = chan.tx.weights[:, None] * forward
    else:
        ambient = chan.tx.weights[:, None] * forward
        direction = constraint.solve(ambient)

    g_matrix = hermitian(ambient.conj().T @ direction)
    v_matrix = la.cho_solve(theta_factor, la.cho_solve(theta_factor, state.gram).conj().T)
    epsilon = chan.constants.power / (noise * float(np.real(np.trace(weight @ v_matrix))))
    omega = _checked(identity / epsilon + g_matrix @ weight, t, condition_limit)

    # U Omega^{-1}, solved as Omega^H X = U
    mixing = la.lu_solve(la.lu_factor(omega), weight, trans=2).conj().T
    samples = direction @ mixing

    coefficients = None
    if constraint.reconstructable:
        coefficients = (chan.rx.weights[:, None] * state.received) @ la.cho_solve(theta_factor, mixing)

    new_state = _state(
        BeamformerMatrix(samples, coefficients), chan, constraint, t + 1, state.rate_trace,
        theta=theta, weight=weight, omega=omega, epsilon=epsilon,
    )
    logger.debug("WMMSE t=%d rate=%.9f", new_state.iteration, new_state.rate)
    return new_state


def effective_rank(gram: np.ndarray) -> int:
    eigenvalues = la.eigvalsh(hermitian(gram))
    top = np.max(np.abs(eigenvalues)) if eigenvalues.size else 0.0
    if top == 0:
        return 0
    return int(np.sum(eigenvalues > RANK_TOLERANCE * top))


def scale_to_budget(beamformer: BeamformerMatrix, constraint: PowerConstraint, budget: float) -> BeamformerMatrix:
    """W sqrt(P_T / Tr(W^H P W)), the equality-constrained point of the same rate."""
    power = constraint.power(beamformer.samples)
    if not power > 0:
        raise DegenerateInput("Beamformer carries no transmit power")
    return beamformer.scaled(np.sqrt(budget / power))


def _iterate(
    chan: SampledChannel, cfg: SolverConfig, constraint: PowerConstraint, method: str, extras: dict = None
) -> Tuple[BeamformerMatrix, SolveReport]:
    started = time.perf_counter()
    streams = cfg.streams if cfg.streams is not None else min(chan.tx.size, chan.rx.size)

    beamformer = init_beamformer(chan, streams, cfg.init, cfg.seed, constraint)
    state = init_state(chan, beamformer, constraint)
    best = state
    converged = False

    while state.iteration < cfg.max_iterations:
        previous = state.rate
        state = wmmse_step(state, chan, constraint, cfg.condition_limit)
        if state.rate >= best.rate:
            best = state
        if not cfg.fixed_iterations and state.rate - previous < cfg.threshold * abs(previous):
            converged = True
            break

    max_iter_reached = not converged and not cfg.fixed_iterations
    if max_iter_reached:
        logger.warning("WMMSE stopped at the iteration cap (%d) before meeting the threshold", cfg.max_iterations)

    budget = chan.constants.power
    final = scale_to_budget(best.beamformer, constraint, budget)
    received, _, gram = _propagate(final.samples, chan)
    rate = log2det(np.eye(streams) + gram / chan.constants.noise_power)
    wall_ms = 1e3 * (time.perf_counter() - started)

    if isinstance(constraint, DiagonalPower):
        stream_powers = np.sum(constraint.weights[:, None] * np.abs(final.samples) ** 2, axis=0)
    else:
        stream_powers = np.real(np.einsum('in,ij,jn->n', final.samples.conj(), constraint.matrix, final.samples))

    report = SolveReport(
        method=method,
        rate_bits=rate,
        iterations=state.iteration,
        rate_trace=list(state.rate_trace),
        wall_ms=wall_ms,
        effective_rank=effective_rank(gram),
        streams=streams,
        converged=converged,
        max_iter_reached=max_iter_reached,
        transmit_power=constraint.power(final.samples),
        stream_powers=[float(item) for item in stream_powers],
        config=cfg.to_dict(),
        extras=extras or {},
    )
    logger.info("%s: %.6f bit/s/Hz after %d iterations (%.1f ms)", method, rate, state.iteration, wall_ms)
    return final, report


def solve(chan: SampledChannel, cfg: SolverConfig = None) -> Tuple[BeamformerMatrix, SolveReport]:
    return _iterate(chan, cfg or SolverConfig(), DiagonalPower(chan.tx.weights), 'wmmse')


def solve_correlated(
    chan: SampledChannel, cfg: SolverConfig, kernel: np.ndarray
) -> Tuple[BeamformerMatrix, SolveReport]:
    """
    WMMSE under the correlated constraint Tr(W^H Phi_T C Phi_T W) <= P_T, with
    C sampled at the Tx quadrature nodes and inverted numerically.
    """
    constraint = KernelPower(chan.tx.weights, kernel)
    return _iterate(chan, cfg or SolverConfig(), constraint, 'wmmse_correlated', {'tikhonov_shift': constraint.shift})


def reconstruct_continuous(beamformer: BeamformerMatrix, chan: SampledChannel, s) -> np.ndarray:
    """
    w(s) = h~(s) C at arbitrary points of the Tx aperture. Returns an N-vector
    for a single point, a (K, N) matrix for K points.
    """
    if beamformer.coefficients is None:
        raise MissingReconstruction("Beamformer was not produced by a WMMSE step with an uncorrelated constraint")

    points = np.asarray(s, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    inside = chan.tx.geometry.contains(points)
    if not np.all(inside):
        raise DomainError(f"{int(np.sum(~inside))} point(s) lie outside the Tx aperture")

    values = chan.tx_row(points).conj() @ beamformer.coefficients
    return values[0] if single else values

