"""
Experiment orchestration: single solves, parameter sweeps, DoF curves,
correlation maps and timing benchmarks over an ExperimentConfig.
"""
import dataclasses
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import cpu_count
from threadpoolctl import threadpool_limits

from .analysis import CorrelationMap, DofReport, dof_estimate, dof_report, stream_correlation, write_dof_table
from .baselines import (
    SvdBeamformingResult, dense_optimal_solve, fourier_svd_solve, spda_svd_solve, svd_water_fill,
)
from .channel import (
    DiscreteArrayChannel, SampledChannel, build_channel, build_spda_channel, build_wavenumber_channel,
    sample_metasurface_channel, truncation_order,
)
from .config import ExperimentConfig, Method, OutputFormat, SweepVariable
from .exceptions import CapaException, DimensionError, SampleBudgetExceeded
from .geometry import ApertureGeometry, element_count
from .metasurface import element_size, fourier_metasurface_rate, wmmse_metasurface_rate
from .reports import (
    BENCH_COLUMNS, SOLVE_COLUMNS, SWEEP_COLUMNS, SolveReport, write_csv, write_json, write_report,
)
from .settings import Settings
from .utils import configure
from .wmmse import BeamformerMatrix, solve

logger = logging.getLogger(__name__)

DEFAULT_FRESNEL_RATIOS = tuple(float(item) for item in np.geomspace(1.0, 100.0, 10))
BENCH_METHODS = (Method.WMMSE, Method.FOURIER_SVD)


def mode_count(geometry: ApertureGeometry, wavelength: float) -> int:
    """(2 ceil(L_x / lambda) + 1)(2 ceil(L_y / lambda) + 1)"""
    return (
        (2 * truncation_order(geometry.length_x, wavelength) + 1)
        * (2 * truncation_order(geometry.length_y, wavelength) + 1)
    )


def resolve_streams(config: ExperimentConfig) -> int:
    """
    Stream count shared by WMMSE and Fourier-SVD. "auto-fourier" (or no value)
    is the smaller Fourier mode count, capped by the quadrature size M^2;
    "auto-dof" is the numeric DoF estimate, at least one stream.
    """
    streams = config.solver.streams
    limit = config.solver.order ** 2

    if streams == 'auto-dof':
        dof = dof_estimate(
            config.tx, config.rx, config.constants, config.solver.order,
            config.solver.dof_threshold_db, config.solver.dof_weighted,
        )
        resolved = min(max(1, dof), limit)
    elif streams is None or streams == 'auto-fourier':
        wavelength = config.constants.wavelength
        resolved = min(mode_count(config.tx, wavelength), mode_count(config.rx, wavelength), limit)
    else:
        resolved = int(streams)
        if resolved > limit:
            raise DimensionError(f"{resolved} streams do not fit a quadrature of {limit} nodes per aperture")

    logger.debug("Streams %s resolved to %d", streams, resolved)
    return resolved


def fourier_order(config: ExperimentConfig) -> int:
    """Quadrature order of the Fourier-SVD channel: max(M, 4 * max order + 2), within the sample budget."""
    if config.solver.fourier_order is not None:
        order = config.solver.fourier_order
    else:
        wavelength = config.constants.wavelength
        highest = max(
            truncation_order(length, wavelength)
            for length in (config.tx.length_x, config.tx.length_y, config.rx.length_x, config.rx.length_y)
        )
        order = max(config.solver.order, 4 * highest + 2)

    budget = Settings().SAMPLE_BUDGET
    if order ** 2 > budget:
        capped = int(math.isqrt(budget))
        logger.warning("Fourier quadrature order %d exceeds the sample budget, using %d", order, capped)
        order = capped
    return order


def _wmmse(config: ExperimentConfig, streams: int) -> Tuple[BeamformerMatrix, SampledChannel, SolveReport]:
    chan = build_channel(config.tx, config.rx, config.constants, config.solver.order)
    beamformer, report = solve(chan, config.solver.solver_config(streams))
    return beamformer, chan, report


def _fourier(config: ExperimentConfig, streams: int):
    order = fourier_order(config)
    chan = build_channel(config.tx, config.rx, config.constants, order)
    started = time.perf_counter()
    wchan = build_wavenumber_channel(chan)
    result = fourier_svd_solve(wchan, streams, config.constants)
    result.wall_ms = 1e3 * (time.perf_counter() - started)
    return result, wchan, result.to_report({'M': order, 'N': streams})


def _spda(dchan: DiscreteArrayChannel, config: ExperimentConfig, streams: int) -> SolveReport:
    limit = min(dchan.tx_elements, dchan.rx_elements)
    if streams > limit:
        logger.info("SPDA streams clamped from %d to its %d elements", streams, limit)
        streams = limit
    return spda_svd_solve(dchan, streams, config.constants).to_report({'N': streams})


def _dense(config: ExperimentConfig) -> SolveReport:
    result = dense_optimal_solve(
        config.tx, config.rx, config.constants,
        samples_per_axis=config.solver.dense_samples,
        verify=config.solver.dense_verify,
        sample_budget=Settings().SAMPLE_BUDGET,
    )
    return result.to_report({'samples_per_axis': result.extras['samples_per_axis']})


def _check_elements(geometry: ApertureGeometry, spacing: float):
    count = element_count(geometry.length_x, spacing) * element_count(geometry.length_y, spacing)
    budget = Settings().SAMPLE_BUDGET
    if count > budget:
        raise SampleBudgetExceeded(count, budget)


def solve_method(config: ExperimentConfig, method: Method, streams: Optional[int] = None) -> SolveReport:
    """One method on one configuration."""
    method = Method(method)
    if streams is None and method in (Method.WMMSE, Method.FOURIER_SVD, Method.SPDA):
        streams = resolve_streams(config)

    if method == Method.WMMSE:
        return _wmmse(config, streams)[2]
    if method == Method.FOURIER_SVD:
        return _fourier(config, streams)[2]
    if method == Method.SPDA:
        _check_elements(config.tx, 0.5 * config.constants.wavelength)
        return _spda(build_spda_channel(config.tx, config.rx, config.constants), config, streams)
    return _dense(config)


def solve_metasurface(config: ExperimentConfig, method: Method, spacing: float) -> SolveReport:
    """
    Rate of a method realised on a metasurface with the given element spacing
    (in wavelengths). dense_optimal stays the continuous reference.
    """
    method = Method(method)
    if method == Method.DENSE_OPTIMAL:
        return _dense(config)

    wavelength = config.constants.wavelength
    distance = spacing * wavelength
    _check_elements(config.tx, distance)
    _check_elements(config.rx, distance)
    dchan = sample_metasurface_channel(
        config.tx, config.rx, config.constants, distance, element_size(wavelength, config.sweep.element_size) ** 2
    )
    streams = resolve_streams(config)

    if method == Method.SPDA:
        return _spda(dchan, config, streams)

    if method == Method.WMMSE:
        beamformer, chan, report = _wmmse(config, streams)
        report.extras['continuous_rate'] = report.rate_bits
        report.rate_bits = wmmse_metasurface_rate(beamformer, chan, dchan)
    else:
        result, wchan, report = _fourier(config, streams)
        report.extras['continuous_rate'] = report.rate_bits
        report.rate_bits = fourier_metasurface_rate(result, wchan, dchan)
    report.extras.update({'spacing': distance, 'tx_elements': dchan.tx_elements})
    return report


def apply_sweep(config: ExperimentConfig, variable: SweepVariable, value: float) -> ExperimentConfig:
    """Copy of the config with the swept variable set; spacing leaves the config untouched."""
    variable = SweepVariable(variable)
    if variable == SweepVariable.POWER:
        return dataclasses.replace(config, constants=config.constants.replace(transmit_power=value))
    if variable == SweepVariable.FREQUENCY:
        return dataclasses.replace(config, constants=config.constants.replace(frequency=value))
    if variable == SweepVariable.APERTURE:
        side = math.sqrt(value)
        return dataclasses.replace(
            config,
            tx=config.tx.replace(length_x=side, length_y=side),
            rx=config.rx.replace(length_x=side, length_y=side),
        )
    if variable == SweepVariable.DISTANCE:
        x, y, _ = config.rx.offset
        return dataclasses.replace(config, rx=config.rx.replace(offset=(x, y, value)))
    return config


def run_point(config: ExperimentConfig, value: float) -> List[dict]:
    """Sweep rows of every configured method at one value; failures become rows with status "failed"."""
    variable = config.sweep.variable
    rows = []
    for method in config.methods:
        row = {'sweep_var': variable.value, 'value': value, 'method': method.value}
        try:
            point = apply_sweep(config, variable, value)
            if variable == SweepVariable.SPACING:
                report = solve_metasurface(point, method, value)
            else:
                report = solve_method(point, method)
        except CapaException as e:
            logger.warning("Sweep point %s=%g failed for %s: %s", variable.value, value, method.value, e)
            row.update({'status': 'failed', 'message': str(e)})
        else:
            row.update({
                'rate_bits': report.rate_bits,
                'iters': report.iterations,
                'wall_ms': report.wall_ms,
                'status': 'ok',
                'message': '',
            })
        rows.append(row)
    return rows


def _output(config: ExperimentConfig) -> Path:
    path = Path(config.output.path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_solve(config: ExperimentConfig) -> List[SolveReport]:
    """
    Every configured method on one configuration. Writes `<method>.json`
    (`.msgpack` for the msgpack format) per method and the combined solve.csv.
    """
    output = _output(config)
    suffix = '.msgpack' if config.output.format == OutputFormat.MSGPACK else '.json'
    streams = resolve_streams(config)

    reports = []
    for method in config.methods:
        report = solve_method(config, method, streams)
        write_report(output / f"{method.value}{suffix}", report.to_dict())
        reports.append(report)

    write_csv(output / 'solve.csv', SOLVE_COLUMNS, (report.to_row() for report in reports))
    return reports


def run_sweep(config: ExperimentConfig, jobs: Optional[int] = None, verbosity: int = 1) -> List[dict]:
    """
    Rows of sweep.csv, one per (value, method). Points are dispatched to a pool
    of `jobs` worker processes (physical cores by default); jobs=1 runs in process.
    """
    values = config.sweep.points()
    jobs = jobs or cpu_count(only_physical_cores=True)

    if jobs == 1 or len(values) == 1:
        results = [run_point(config, value) for value in values]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(values)), initializer=configure,
                                 initargs=(verbosity,)) as executor:
            results = list(executor.map(run_point, [config] * len(values), values))

    rows = [row for point in results for row in point]
    failed = sum(1 for row in rows if row['status'] != 'ok')
    if failed:
        logger.warning("%d of %d sweep rows failed", failed, len(rows))

    write_csv(_output(config) / 'sweep.csv', SWEEP_COLUMNS, rows)
    return rows


def place_receiver(tx: ApertureGeometry, rx: ApertureGeometry, distance: float) -> ApertureGeometry:
    """Rx moved to `distance` along the Tx normal from the Tx centre."""
    centre = tx.center + distance * tx.normal
    return rx.replace(offset=tuple(float(item) for item in centre))


def run_dof(config: ExperimentConfig, fresnel_ratios: Sequence[float] = DEFAULT_FRESNEL_RATIOS) -> List[DofReport]:
    """DoF against F = D^2 / A_R; writes dof.csv."""
    reports = []
    for ratio in fresnel_ratios:
        distance = math.sqrt(ratio * config.rx.area)
        rx = place_receiver(config.tx, config.rx, distance)
        reports.append(dof_report(
            config.tx, rx, config.constants, config.solver.order,
            config.solver.dof_threshold_db, config.solver.dof_weighted,
        ))

    write_dof_table(_output(config) / 'dof.csv', reports)
    return reports


def run_correlate(config: ExperimentConfig) -> CorrelationMap:
    """WMMSE solve followed by the stream correlation map; writes correlation.csv and correlation.json."""
    beamformer, chan, report = _wmmse(config, resolve_streams(config))
    correlation = stream_correlation(beamformer, chan)

    output = _output(config)
    correlation.to_csv(output / 'correlation.csv')
    write_json(output / 'correlation.json', {
        **correlation.to_dict(),
        'max_off_diagonal': correlation.max_off_diagonal,
        'solve': report.to_dict(),
    })
    logger.info(
        "Correlation of %d streams: max off-diagonal %.3e, min diagonal %.3e",
        correlation.streams, correlation.max_off_diagonal, float(np.min(correlation.diagonal)),
    )
    return correlation


def _bench_wmmse(config: ExperimentConfig) -> float:
    bench = config.bench
    started = time.perf_counter()
    chan = build_channel(config.tx, config.rx, config.constants, config.solver.order)
    if not bench.include_channel:
        started = time.perf_counter()
    cfg = config.solver.solver_config(
        min(bench.streams, chan.tx.size), max_iterations=bench.iterations, fixed_iterations=True,
    )
    solve(chan, cfg)
    return 1e3 * (time.perf_counter() - started)


def _bench_fourier(config: ExperimentConfig) -> float:
    started = time.perf_counter()
    chan = build_channel(config.tx, config.rx, config.constants, config.solver.order)
    if not config.bench.include_channel:
        started = time.perf_counter()
    wchan = build_wavenumber_channel(chan)
    limit = min(wchan.tx_mode_count, wchan.rx_mode_count)
    result: SvdBeamformingResult = svd_water_fill(
        wchan.matrix, min(config.bench.streams, limit), config.constants, Method.FOURIER_SVD.value
    )
    logger.debug("Fourier-SVD bench run: %d modes, %.4f bit/s/Hz", wchan.tx_mode_count, result.rate_bits)
    return 1e3 * (time.perf_counter() - started)


def bench_cell(config: ExperimentConfig, method: Method) -> Dict[str, float]:
    """
    Median and coefficient of variation of `repeats` timed runs of one method,
    after one untimed warm-up run.
    """
    runner = _bench_wmmse if Method(method) == Method.WMMSE else _bench_fourier
    runner(config)
    times = [runner(config) for _ in range(config.bench.repeats)]
    median = statistics.median(times)
    mean = statistics.fmean(times)
    cv = statistics.pstdev(times) / mean if mean > 0 else 0.0
    return {'median_ms': median, 'cv': cv, 'repeats': len(times)}


def run_bench(config: ExperimentConfig) -> List[dict]:
    """
    Timing table over frequencies x areas (square apertures on both sides)
    with a fixed number of WMMSE iterations. Channel sampling is excluded
    from the timings unless bench.include_channel is set; the wavenumber
    channel is always part of the Fourier-SVD time. The Fourier-SVD channel
    uses the solver quadrature order M. BLAS and OpenMP pools are limited to
    one thread for the whole run. Writes bench.csv.
    """
    methods = [method for method in BENCH_METHODS if method in config.methods] or list(BENCH_METHODS)
    rows = []
    with threadpool_limits(limits=1):
        for frequency in config.bench.frequencies:
            for area in config.bench.areas:
                point = apply_sweep(
                    apply_sweep(config, SweepVariable.FREQUENCY, frequency), SweepVariable.APERTURE, area
                )
                for method in methods:
                    row = {'frequency': frequency, 'area': area, 'method': method.value, **bench_cell(point, method)}
                    logger.info(
                        "Bench %s f=%.3g Hz A=%.3g m^2: %.2f ms (cv %.3f)",
                        method.value, frequency, area, row['median_ms'], row['cv'],
                    )
                    rows.append(row)

    write_csv(_output(config) / 'bench.csv', BENCH_COLUMNS, rows)
    return rows
