"""Spatially dependent wild bootstrap.

Pseudo-observations are ``Y*(s_i) = Ybar + (Y(s_i) - Ybar) W(s_i)`` with a
Gaussian multiplier field ``W`` whose covariance is ``a(|s_i - s_j| / b)``. The
bootstrap variance of the scaled mean equals the lag-window estimator
``lambda^d / n^2 * sum_{l1,l2} (Y_l1 - Ybar)(Y_l2 - Ybar)' a(|s_l1 - s_l2| / b)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._linalg import FactorizationError, clipped_factor, jittered_cholesky
from ._seeding import derive_rng
from .fields import FieldSample
from .kernels import BARTLETT, TaperKernel, taper_gram
from .sampling import SiteSet, pairwise_distances

__all__ = [
    "BootstrapDraws",
    "CovEstimate",
    "MultiplierField",
    "SdwbConfig",
    "bootstrap_max_stats",
    "bootstrap_quantile",
    "pseudo_observations",
    "sdwb_cov",
    "simulate_multiplier_field",
]

PsdRepair = Literal["none", "clip"]

# bounds the p x chunk block of bootstrap deviations held in memory
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class SdwbConfig:
    """Bootstrap settings.

    ``psd_repair`` controls what happens when the taper Gram matrix is not
    positive semidefinite (isotropic Bartlett and Parzen tapers are not in
    dimension >= 2): ``"none"`` raises :class:`FactorizationError`, ``"clip"``
    draws the multipliers from the nearest unit-diagonal PSD matrix obtained by
    zeroing negative eigenvalues.
    """

    taper: TaperKernel = BARTLETT
    bandwidth: float = 5.0
    replicates: int = 1000
    seed: int | None = 0
    variance_floor: float = 1e-12
    psd_repair: PsdRepair = "clip"

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.replicates < 1:
            raise ValueError("need at least one bootstrap replicate")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")
        if self.psd_repair not in ("none", "clip"):
            raise ValueError(f"unknown psd_repair {self.psd_repair!r}")


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Lag-window estimate of the long-run covariance of ``sqrt(lambda^d) * Ybar``."""

    matrix: np.ndarray
    lambda_d: float

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.matrix).copy()


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    """Bootstrap max-statistics over the coordinates in ``active_set``."""

    stats: np.ndarray
    active_set: tuple[int, ...]
    degenerate: tuple[int, ...] = ()

    @property
    def B(self) -> int:
        return self.stats.size


class MultiplierField:
    """Factorized multiplier covariance ``G = [a(|s_i - s_j| / b)]`` for one site set.

    The factorization is computed once and reused for every batch of draws.
    """

    def __init__(
        self, sites: SiteSet, taper: TaperKernel, bandwidth: float, repair: PsdRepair = "clip"
    ) -> None:
        if not bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        self.sites = sites
        self.taper = taper
        self.bandwidth = float(bandwidth)
        self.repair = repair
        self.removed_eigenvalue = 0.0
        self.jitter = 0.0
        self.gram = taper_gram(taper, pairwise_distances(sites), bandwidth)
        n = sites.n
        if np.count_nonzero(self.gram) == n:
            self.factor = np.eye(n)
            return
        try:
            self.factor, self.jitter = jittered_cholesky(self.gram)
        except FactorizationError:
            if repair == "none":
                raise
            self.factor, self.removed_eigenvalue = clipped_factor(self.gram)

    @property
    def repaired(self) -> bool:
        return self.removed_eigenvalue < 0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``n x size`` matrix whose columns are independent multiplier fields.

        Normals are consumed replicate by replicate, so the k-th column depends
        only on the stream position and not on how draws are batched.
        """
        Z = rng.standard_normal((size, self.factor.shape[1]))
        return self.factor @ Z.T


def simulate_multiplier_field(
    s: SiteSet,
    taper: TaperKernel,
    b: float,
    seed: int | None = None,
    size: int | None = None,
    repair: PsdRepair = "none",
) -> np.ndarray:
    """Draw the multiplier field ``W`` at the sites.

    Returns an ``n``-vector, or an ``n x size`` matrix of independent draws when
    ``size`` is given. With the default ``repair="none"`` a taper Gram matrix
    that is not PSD within the jitter budget raises :class:`FactorizationError`.
    """
    field_ = MultiplierField(s, taper, b, repair)
    rng = derive_rng(seed, "multiplier")
    W = field_.draw(rng, 1 if size is None else size)
    return W[:, 0] if size is None else W


def pseudo_observations(y: FieldSample, w: np.ndarray) -> FieldSample:
    """``Y*(s_i) = Ybar + (Y(s_i) - Ybar) * W(s_i)``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != y.n:
        raise ValueError(f"multiplier length {w.size} does not match {y.n} sites")
    ybar = y.mean()
    return y.with_values(ybar + (y.values - ybar) * w[:, None])


def sdwb_cov(y: FieldSample, taper: TaperKernel, b: float, lambda_d: float) -> CovEstimate:
    """Lag-window covariance estimate with taper ``taper`` and bandwidth ``b``."""
    if not lambda_d > 0:
        raise ValueError("lambda_d must be positive")
    G = taper_gram(taper, pairwise_distances(y.sites), b)
    dev = y.values - y.mean()
    S = dev.T @ G @ dev
    S = 0.5 * (S + S.T) * (lambda_d / y.n**2)
    return CovEstimate(S, float(lambda_d))


def _studentizer(y: FieldSample, cfg: SdwbConfig, lambda_d: float, sigma_diag, cols):
    if sigma_diag is None:
        sigma_diag = sdwb_cov(y, cfg.taper, cfg.bandwidth, lambda_d).diag
    sigma_diag = np.asarray(sigma_diag, dtype=float)
    return np.sqrt(np.maximum(sigma_diag[cols], cfg.variance_floor))


def studentized_deviations(
    y: FieldSample,
    cfg: SdwbConfig,
    lambda_d: float,
    active_set: Sequence[int] | None = None,
    sigma_diag: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    multiplier: MultiplierField | None = None,
) -> np.ndarray:
    """``|active| x B`` matrix of ``sqrt(lambda^d) |Ybar*_j - Ybar_j| / sqrt(Sigma_jj)``."""
    cols = np.arange(y.p) if active_set is None else np.asarray(sorted(active_set), dtype=int)
    if cols.size == 0:
        raise ValueError("active set must be nonempty")
    if rng is None:
        rng = derive_rng(cfg.seed, "bootstrap")
    if multiplier is None:
        multiplier = MultiplierField(y.sites, cfg.taper, cfg.bandwidth, cfg.psd_repair)
    scale = math.sqrt(lambda_d) / y.n / _studentizer(y, cfg, lambda_d, sigma_diag, cols)
    # the product runs over every coordinate so a row's floating-point value does
    # not depend on which other rows are active (keeps nested maxima exact)
    dev = (y.values - y.mean()).T
    out = np.empty((cols.size, cfg.replicates))
    chunk = max(1, _CHUNK_ELEMENTS // max(y.p, y.n))
    for start in range(0, cfg.replicates, chunk):
        stop = min(start + chunk, cfg.replicates)
        W = multiplier.draw(rng, stop - start)
        out[:, start:stop] = np.abs((dev @ W)[cols]) * scale[:, None]
    return out


def bootstrap_max_stats(
    y: FieldSample,
    cfg: SdwbConfig,
    lambda_d: float,
    active_set: Sequence[int] | None = None,
    sigma_diag: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    multiplier: MultiplierField | None = None,
) -> BootstrapDraws:
    """Bootstrap draws of the max studentized deviation over ``active_set``.

    Each replicate uses ``Ybar* - Ybar = n^-1 sum_i (Y_i - Ybar) W_i`` directly.
    Coordinates whose studentizing variance is at or below ``variance_floor``
    are reported in ``degenerate``; their statistic is 0 because their
    deviations vanish.

    Parameters
    ----------
    y : FieldSample
    cfg : SdwbConfig
    lambda_d : float
        Volume scale ``lambda_n**d`` of the sampling region.
    active_set : sequence of int, optional
        Coordinates entering the maximum; all by default.
    sigma_diag : ndarray, optional
        Precomputed diagonal of :func:`sdwb_cov` with the same taper and bandwidth.
    rng : Generator, optional
        Stream for the multipliers; derived from ``cfg.seed`` when omitted.
    multiplier : MultiplierField, optional
        Reusable factorization for ``y.sites``.
    """
    cols = tuple(range(y.p)) if active_set is None else tuple(sorted(int(j) for j in active_set))
    if sigma_diag is None:
        sigma_diag = sdwb_cov(y, cfg.taper, cfg.bandwidth, lambda_d).diag
    degenerate = tuple(j for j in cols if sigma_diag[j] <= cfg.variance_floor)
    if degenerate:
        warnings.warn(
            f"coordinates {list(degenerate)} have (near) zero variance; their statistics are set by the floor",
            RuntimeWarning,
            stacklevel=2,
        )
    T = studentized_deviations(y, cfg, lambda_d, cols, sigma_diag, rng, multiplier)
    return BootstrapDraws(T.max(axis=0), cols, degenerate)


def order_statistic_index(B: int, level: float) -> int:
    """1-based index ``ceil(B * level)`` of the generalized-inverse quantile."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    # rounding absorbs binary representation error such as 0.07 * 100 = 7.000000000000001
    return max(1, math.ceil(round(B * level, 9)))


def bootstrap_quantile(d: BootstrapDraws | np.ndarray, level: float) -> float:
    """``inf{t : F_B(t) >= level}`` for the empirical distribution of the draws."""
    stats = d.stats if isinstance(d, BootstrapDraws) else np.asarray(d, dtype=float).reshape(-1)
    if stats.size < 1:
        raise ValueError("need at least one bootstrap draw")
    k = order_statistic_index(stats.size, level)
    return float(np.partition(stats, k - 1)[k - 1])
