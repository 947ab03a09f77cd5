"""Symmetric factorizations used to draw correlated Gaussian vectors."""

from __future__ import annotations

import numpy as np
from scipy import linalg

JITTER_START = 1e-12
JITTER_MAX = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a covariance matrix cannot be factorized within the jitter budget."""

    def __init__(self, min_eigenvalue: float, max_jitter: float) -> None:
        self.min_eigenvalue = float(min_eigenvalue)
        self.max_jitter = float(max_jitter)
        super().__init__(
            f"matrix is not positive semidefinite: min eigenvalue {self.min_eigenvalue:.6g} "
            f"below the jitter budget {self.max_jitter:.3g}"
        )


def jittered_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K`` with escalating diagonal jitter.

    Tries the plain factorization first, then adds ``eps * trace(K)/n`` to the
    diagonal for ``eps`` = 1e-12, 1e-11, ..., 1e-6.

    Returns
    -------
    L : ndarray
        Lower triangular factor with ``L @ L.T == K + jitter * I``.
    jitter : float
        The absolute jitter that was added (0.0 if none was needed).

    Raises
    ------
    FactorizationError
        If the factorization still fails at the largest jitter.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    scale = float(np.trace(K)) / n if n else 1.0
    if scale <= 0:
        scale = 1.0
    eps = 0.0
    next_eps = JITTER_START
    while True:
        try:
            L = linalg.cholesky(K + eps * scale * np.eye(n), lower=True, check_finite=False)
            return L, eps * scale
        except linalg.LinAlgError:
            if next_eps > JITTER_MAX * (1 + 1e-9):
                break
            eps, next_eps = next_eps, next_eps * 10
    min_eig = float(linalg.eigvalsh(K, subset_by_index=[0, 0])[0])
    raise FactorizationError(min_eig, JITTER_MAX * scale)


def clipped_factor(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Factor of the PSD projection of a unit-diagonal matrix.

    Negative eigenvalues of ``K`` are set to zero and the rows of the factor are
    rescaled so that ``F @ F.T`` keeps a unit diagonal. Returns the factor and the
    most negative eigenvalue that was removed (0.0 if ``K`` was already PSD).
    """
    K = np.asarray(K, dtype=float)
    evals, evecs = linalg.eigh(K, check_finite=False)
    min_eig = float(evals[0])
    keep = evals > 0
    F = evecs[:, keep] * np.sqrt(evals[keep])
    norms = np.sqrt(np.einsum("ij,ij->i", F, F))
    F /= norms[:, None]
    return F, min(min_eig, 0.0)
