"""Joint confidence intervals and stepdown change-point detection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._seeding import derive_rng
from .bootstrap import (
    MultiplierField,
    SdwbConfig,
    bootstrap_quantile,
    sdwb_cov,
    studentized_deviations,
)
from .fields import FieldModel, FieldSample, theoretical_moments
from .sampling import SamplingDesign

__all__ = [
    "JointCI",
    "StepRecord",
    "StepdownResult",
    "joint_ci",
    "limit_cov_oracle",
    "segments_from_rejections",
    "stack_adjacent_differences",
    "stepdown_changepoint",
]


@dataclass(frozen=True, eq=False)
class JointCI:
    """Simultaneous intervals ``Ybar_j +/- lambda^{-d/2} sqrt(Sigma_jj) q``."""

    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    q_hat: float
    level: float
    sigma_diag: np.ndarray
    lambda_d: float

    def contains(self, mu) -> bool:
        mu = np.asarray(mu, dtype=float)
        return bool(np.all((self.lower <= mu) & (mu <= self.upper)))

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def _intervals(ybar, sigma_diag, q_hat, lambda_d):
    half = np.sqrt(np.maximum(sigma_diag, 0.0)) * q_hat / math.sqrt(lambda_d)
    return ybar - half, ybar + half


def joint_ci(
    y: FieldSample,
    cfg: SdwbConfig,
    lambda_d: float,
    tau: float = 0.05,
    multiplier: MultiplierField | None = None,
) -> JointCI:
    """Joint ``100(1 - tau)%`` confidence intervals for the mean vector."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    sigma = sdwb_cov(y, cfg.taper, cfg.bandwidth, lambda_d).diag
    T = studentized_deviations(y, cfg, lambda_d, None, sigma, multiplier=multiplier)
    q = bootstrap_quantile(T.max(axis=0), 1.0 - tau)
    ybar = y.mean()
    lower, upper = _intervals(ybar, sigma, q, lambda_d)
    return JointCI(ybar, lower, upper, q, 1.0 - tau, sigma, float(lambda_d))


def joint_ci_levels(
    y: FieldSample,
    cfg: SdwbConfig,
    lambda_d: float,
    levels: Sequence[float],
    multiplier: MultiplierField | None = None,
) -> list[JointCI]:
    """Intervals at several levels computed from one shared set of bootstrap draws."""
    sigma = sdwb_cov(y, cfg.taper, cfg.bandwidth, lambda_d).diag
    stats = studentized_deviations(y, cfg, lambda_d, None, sigma, multiplier=multiplier).max(axis=0)
    ybar = y.mean()
    out = []
    for level in levels:
        q = bootstrap_quantile(stats, level)
        lower, upper = _intervals(ybar, sigma, q, lambda_d)
        out.append(JointCI(ybar, lower, upper, q, float(level), sigma, float(lambda_d)))
    return out


def stack_adjacent_differences(panel: FieldSample | np.ndarray) -> FieldSample | np.ndarray:
    """Column ``j`` of the result is column ``j+1`` minus column ``j``."""
    values = panel.values if isinstance(panel, FieldSample) else np.asarray(panel, dtype=float)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ValueError("need at least two time points to difference")
    diffs = np.diff(values, axis=1)
    return panel.with_values(diffs) if isinstance(panel, FieldSample) else diffs


@dataclass(frozen=True)
class StepRecord:
    active: tuple[int, ...]
    q_hat: float
    rejected: tuple[int, ...]


@dataclass(frozen=True)
class StepdownResult:
    """Outcome of the stepdown test on adjacent mean differences.

    Indices are 0-based difference indices: hypothesis ``j`` concerns the mean
    change between time points ``j`` and ``j + 1``. ``segments`` uses 1-based,
    inclusive time indices.
    """

    steps: tuple[StepRecord, ...]
    rejected: tuple[int, ...]
    segments: tuple[tuple[int, int], ...]
    statistics: tuple[float, ...]
    sigma_diag: tuple[float, ...]

    @property
    def n_changes(self) -> int:
        return len(self.rejected)

    def to_dict(self) -> dict:
        """JSON-ready dictionary with 1-based hypothesis indices."""
        return {
            "steps": [
                {
                    "step": i + 1,
                    "active": [j + 1 for j in st.active],
                    "q_hat": st.q_hat,
                    "rejected": [j + 1 for j in st.rejected],
                }
                for i, st in enumerate(self.steps)
            ],
            "rejected": [j + 1 for j in self.rejected],
            "segments": [list(seg) for seg in self.segments],
            "statistics": list(self.statistics),
        }


def segments_from_rejections(rejected: Sequence[int], n_times: int) -> tuple[tuple[int, int], ...]:
    """Constant-mean pieces implied by rejected change indices.

    ``rejected`` holds 1-based change indices ``k`` (a change between time points
    ``k`` and ``k + 1``); the result lists 1-based inclusive ``(start, end)`` pieces.
    """
    bounds = sorted(set(int(k) for k in rejected))
    if any(not 1 <= k < n_times for k in bounds):
        raise ValueError("change indices must lie in 1..n_times-1")
    starts = [1] + [k + 1 for k in bounds]
    ends = bounds + [n_times]
    return tuple(zip(starts, ends))


def stepdown_changepoint(
    diffs: FieldSample,
    cfg: SdwbConfig,
    lambda_d: float,
    tau: float = 0.05,
    reuse_draws: bool = False,
    multiplier: MultiplierField | None = None,
) -> StepdownResult:
    """Stepdown multiple test of ``H_j: mu_{j+1} - mu_j = 0`` on differenced data.

    At each step the critical value is the bootstrap ``(1 - tau)`` quantile of
    the max studentized deviation over the hypotheses not yet rejected, and
    every remaining hypothesis whose statistic strictly exceeds it is rejected.
    The procedure stops at the first step without rejections.

    By default each step draws a fresh bootstrap substream; ``reuse_draws``
    restricts the step-one draws to the shrinking active set instead.
    """
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    sigma = sdwb_cov(diffs, cfg.taper, cfg.bandwidth, lambda_d).diag
    if multiplier is None:
        multiplier = MultiplierField(diffs.sites, cfg.taper, cfg.bandwidth, cfg.psd_repair)
    stats = math.sqrt(lambda_d) * np.abs(diffs.mean()) / np.sqrt(np.maximum(sigma, cfg.variance_floor))

    shared = None
    if reuse_draws:
        shared = studentized_deviations(
            diffs, cfg, lambda_d, None, sigma, derive_rng(cfg.seed, "stepdown", 1), multiplier
        )

    active = list(range(diffs.p))
    rejected: list[int] = []
    steps = []
    step = 1
    while active:
        if shared is not None:
            draws = shared[active].max(axis=0)
        else:
            rng = derive_rng(cfg.seed, "stepdown", step)
            draws = studentized_deviations(diffs, cfg, lambda_d, active, sigma, rng, multiplier).max(axis=0)
        q = bootstrap_quantile(draws, 1.0 - tau)
        newly = [j for j in active if stats[j] > q]
        steps.append(StepRecord(tuple(active), q, tuple(newly)))
        if not newly:
            break
        rejected.extend(newly)
        active = [j for j in active if j not in set(newly)]
        step += 1

    rejected.sort()
    segments = segments_from_rejections([j + 1 for j in rejected], diffs.p + 1)
    return StepdownResult(
        tuple(steps), tuple(rejected), segments, tuple(float(t) for t in stats), tuple(float(v) for v in sigma)
    )


def limit_cov_oracle(model: FieldModel, design: SamplingDesign, density_l2: float | None = None) -> np.ndarray:
    """Diagonal of the limit covariance ``int Sigma * int f^2 + kappa^{-1} Sigma(0)``.

    ``density_l2`` overrides ``int f^2``; by default it is taken from the design
    (``1 / |R0|`` for a uniform density, ``sum w_c^2 / |cell|`` for piecewise
    constant ones).
    """
    mom = theoretical_moments(model, design.d)
    if density_l2 is None:
        density_l2 = design.density_l2()
    return mom.integrated_cov * density_l2 + design.kappa_inv * mom.sigma0
