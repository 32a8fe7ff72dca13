from importlib import import_module

from .exceptions import CapaException
from .exceptions import ConfigurationError
from .exceptions import DetailValidationError
from .exceptions import NumericalError
from .version import __version__

# numpy backed modules load on first access
_LAZY = {
    'ApertureGeometry': 'geometry',
    'PhysicalConstants': 'channel',
    'build_channel': 'channel',
    'SolverConfig': 'wmmse',
    'solve': 'wmmse',
    'solve_correlated': 'wmmse',
    'achievable_rate': 'analysis',
    'stream_correlation': 'analysis',
    'ExperimentConfig': 'config',
    'load_config': 'config',
    'dump_config': 'config',
}

__all__ = [
    'CapaException',
    'ConfigurationError',
    'DetailValidationError',
    'NumericalError',
    '__version__',
    *_LAZY,
]


def __getattr__(name):
    if name in _LAZY:
        return getattr(import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
