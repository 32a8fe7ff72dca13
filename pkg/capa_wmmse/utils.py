import logging
import os
from importlib import import_module

import numpy as np
import scipy.linalg as la

from .exceptions import SingularSystemError

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    0: 'WARNING',
    1: 'INFO',
    2: 'DEBUG',
}


def resolve_from_path(path: str):
    module_path, class_name = path.rsplit('.', 1)
    module = import_module(module_path)
    return getattr(module, class_name)


def hermitian(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def log2det(matrix: np.ndarray) -> float:
    """
    Base-2 log-determinant of a Hermitian positive definite matrix, through its
    Cholesky factor.
    """
    try:
        factor = la.cholesky(hermitian(matrix), lower=True)
    except la.LinAlgError as e:
        raise SingularSystemError("Matrix is not positive definite") from e
    return float(2.0 * np.sum(np.log2(np.real(np.diag(factor)))))


def cholesky_with_shift(matrix: np.ndarray, lower: bool = True):
    """
    Cholesky factorisation of a Hermitian matrix. If the plain factorisation
    fails, retries once with a Tikhonov shift of 1e-12 * trace / size.

    Returns a factor usable by scipy.linalg.cho_solve and the shift applied.
    """
    matrix = hermitian(matrix)
    try:
        return la.cho_factor(matrix, lower=lower), 0.0
    except la.LinAlgError:
        pass

    size = matrix.shape[0]
    shift = 1e-12 * float(np.real(np.trace(matrix))) / size
    logger.warning("Cholesky factorisation failed, retrying with Tikhonov shift %.3e", shift)
    try:
        return la.cho_factor(matrix + shift * np.eye(size), lower=lower), shift
    except la.LinAlgError as e:
        raise SingularSystemError("Matrix is not positive definite even after Tikhonov shift") from e


def configure(verbosity: int = 1):
    """
    Standalone Django setup for the command line and for worker processes. Does
    nothing when a settings module is already in charge.
    """
    import django
    from django.conf import settings

    if os.environ.get('DJANGO_SETTINGS_MODULE') or settings.configured:
        return

    level = LOG_LEVELS.get(max(0, min(verbosity, 2)))
    settings.configure(
        INSTALLED_APPS=[
            'capa_wmmse',
        ],
        LOGGING={
            'version': 1,
            'disable_existing_loggers': False,
            'formatters': {
                'simple': {
                    'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
                },
            },
            'handlers': {
                'console': {
                    'class': 'logging.StreamHandler',
                    'formatter': 'simple',
                },
            },
            'loggers': {
                'capa_wmmse': {
                    'handlers': ['console'],
                    'level': level,
                    'propagate': False,
                },
            },
        },
    )
    django.setup()
