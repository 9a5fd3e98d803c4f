"""Static-system Kalman filter over the four box boundaries.

The hidden state (the true box) does not evolve between measurements, so each
update only fuses a new measurement. Folding measurements one at a time with
``kalman_update`` gives the same posterior as the information-form batch
update in ``posterior_batch``, in any order.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy import linalg

from src.errors import CovarianceError

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-9
MAX_CONDITION = 1e12
EPSILON = 1e-12

_eigvalsh = np.linalg.eigvalsh


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray    # (4,) boundary coordinates, pixels
    cov: np.ndarray     # (4, 4) pixels^2

    @classmethod
    def create(cls, mean, cov) -> 'KalmanState':
        mean = np.asarray(mean, dtype=float).reshape(-1)
        cov = np.asarray(cov, dtype=float)
        _check_psd(cov, 'state covariance')
        if cov.shape != (mean.size, mean.size):
            raise CovarianceError(f'covariance shape {cov.shape} does not match mean of size {mean.size}')
        return cls(mean, cov)


def _check_psd(matrix: np.ndarray, name: str) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise CovarianceError(f'{name} must be square, got shape {matrix.shape}')
    if not np.all(np.isfinite(matrix)):
        raise CovarianceError(f'{name} has non-finite entries')
    if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(matrix))):
        raise CovarianceError(f'{name} is not symmetric')
    eigenvalues = _eigvalsh(matrix)
    if eigenvalues[0] < -PSD_TOL * max(1.0, eigenvalues[-1]):
        raise CovarianceError(f'{name} is not positive semi-definite (min eigenvalue {eigenvalues[0]:.3g})')
    return eigenvalues


def _regularize(matrix: np.ndarray, eigenvalues: Optional[np.ndarray] = None) -> np.ndarray:
    """Add EPSILON * I when the symmetric matrix is too ill-conditioned to invert."""
    if eigenvalues is None:
        eigenvalues = _eigvalsh(matrix)
    smallest = abs(eigenvalues[0])
    if smallest == 0 or abs(eigenvalues[-1]) / smallest > MAX_CONDITION:
        return matrix + EPSILON * np.eye(matrix.shape[0])
    return matrix


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def _inverse(matrix: np.ndarray, name: str, eigenvalues: Optional[np.ndarray] = None) -> np.ndarray:
    try:
        return linalg.inv(_regularize(matrix, eigenvalues))
    except linalg.LinAlgError as e:
        raise CovarianceError(f'{name} is singular: {e}') from e


def kalman_update(state: KalmanState, measurement_mean, measurement_cov) -> KalmanState:
    """One static-system update.

    K = P (P + R)^-1, mean' = mean + K (z - mean), P' = (I - K) P.

    The state is trusted: it comes from ``KalmanState.create`` or from a
    previous update. Only the measurement covariance is validated.
    """
    z = np.asarray(measurement_mean, dtype=float).reshape(-1)
    r = np.asarray(measurement_cov, dtype=float)
    _check_psd(r, 'measurement covariance')
    if z.shape != state.mean.shape or r.shape != state.cov.shape:
        raise CovarianceError('measurement and state dimensions differ')

    innovation_cov = _regularize(state.cov + r)
    try:
        # Solve (P + R) K^T = P^T rather than forming the inverse explicitly.
        gain = linalg.solve(innovation_cov, state.cov.T, assume_a='sym', check_finite=False).T
    except linalg.LinAlgError as e:
        raise CovarianceError(f'P + R is singular: {e}') from e

    mean = state.mean + gain @ (z - state.mean)
    cov = _symmetrize((np.eye(z.size) - gain) @ state.cov)
    return KalmanState(mean, cov)


def posterior_batch(prior_mean, prior_cov, measurements: Iterable[Tuple]) -> KalmanState:
    """Information-form posterior of a prior and any number of measurements.

    P^-1 = P*^-1 + sum R_i^-1 and mean = P (P*^-1 b* + sum R_i^-1 b_i).
    """
    prior = KalmanState.create(prior_mean, prior_cov)
    measurements = list(measurements)
    if not measurements:
        return KalmanState(prior.mean.copy(), prior.cov.copy())

    precision = _inverse(prior.cov, 'prior covariance')
    information = precision @ prior.mean
    for mean, cov in measurements:
        cov = np.asarray(cov, dtype=float)
        eigenvalues = _check_psd(cov, 'measurement covariance')
        r_inv = _inverse(cov, 'measurement covariance', eigenvalues)
        precision = precision + r_inv
        information = information + r_inv @ np.asarray(mean, dtype=float).reshape(-1)

    cov = _symmetrize(_inverse(_symmetrize(precision), 'accumulated precision'))
    return KalmanState(cov @ information, cov)


def fold_measurements(prior: KalmanState, measurements: Iterable[Tuple]) -> KalmanState:
    """Apply ``kalman_update`` for each measurement in order."""
    state = prior
    for mean, cov in measurements:
        state = kalman_update(state, mean, cov)
    return state
