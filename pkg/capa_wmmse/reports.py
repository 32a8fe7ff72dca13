import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .exceptions import UnsupportedFormat

logger = logging.getLogger(__name__)

SOLVE_COLUMNS = (
    'method', 'rate_bits', 'iterations', 'wall_ms', 'streams', 'effective_rank', 'converged', 'status', 'message',
)
SWEEP_COLUMNS = ('sweep_var', 'value', 'method', 'rate_bits', 'iters', 'wall_ms', 'status', 'message')
DOF_COLUMNS = ('distance', 'fresnel_ratio', 'dof', 'dof_uniform', 'dof_closed_form', 'dof_nlos')
BENCH_COLUMNS = ('frequency', 'area', 'method', 'median_ms', 'cv', 'repeats')


@dataclass
class SolveReport:
    """Outcome of one solver run, shared by WMMSE and the baselines (tagged by method)."""
    method: str
    rate_bits: float
    iterations: int = 0
    rate_trace: List[float] = field(default_factory=list)
    wall_ms: float = 0.0
    effective_rank: int = 0
    streams: int = 0
    converged: bool = True
    max_iter_reached: bool = False
    transmit_power: Optional[float] = None
    stream_powers: List[float] = field(default_factory=list)
    config: Dict = field(default_factory=dict)
    extras: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_row(self, status: str = 'ok', message: str = '') -> dict:
        return {
            'method': self.method,
            'rate_bits': self.rate_bits,
            'iterations': self.iterations,
            'wall_ms': self.wall_ms,
            'streams': self.streams,
            'effective_rank': self.effective_rank,
            'converged': self.converged,
            'status': status,
            'message': message,
        }


def _plain(value):
    """Numpy scalars, tuples and enums to JSON-friendly Python values."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if hasattr(value, 'tolist'):
        return _plain(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, complex):
        return {'real': value.real, 'imag': value.imag}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(_plain(payload), f, indent=2, sort_keys=True)
        f.write('\n')


def write_msgpack(path: Path, payload: dict):
    import msgpack

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(msgpack.packb(_plain(payload)))


def write_report(path: Path, payload: dict):
    path = Path(path)
    if path.suffix == '.json':
        write_json(path, payload)
    elif path.suffix in ('.msgpack', '.mpk'):
        write_msgpack(path, payload)
    else:
        raise UnsupportedFormat(f"Unsupported report format '{path.suffix}'")
    logger.info("Report written to %s", path)


def write_csv(path: Path, columns: Iterable[str], rows: Iterable[dict]):
    """RFC-4180 CSV with a fixed column order; missing cells are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction='ignore', lineterminator='\r\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in columns})
    logger.info("Table written to %s", path)


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(float(value)) if math.isfinite(value) else ''
    return _plain(value)


def write_matrix_csv(path: Path, matrix):
    """N x N grid without header, one row per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\r\n')
        for row in matrix:
            writer.writerow([repr(float(item)) for item in row])
