"""Monte Carlo studies: joint-CI coverage, stepdown FWER and power, variance consistency.

Every replication draws its own sites, field and bootstrap multipliers from
seeds derived from ``(base_seed, replication, stage)``; bootstrap seeds also
include the bandwidth, so growing the bandwidth grid leaves existing cells
unchanged. Replications may run in worker processes; results are always
folded in replication order, so serial and parallel runs agree bit for bit.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import Callable, Sequence

import numpy as np

from ._seeding import seed_sequence
from .bootstrap import MultiplierField, SdwbConfig, sdwb_cov
from .fields import (
    CompoundPoissonMA,
    FactorModel,
    FieldModel,
    GaussianMatern,
    simulate,
    true_mean,
)
from .inference import joint_ci_levels, limit_cov_oracle, stack_adjacent_differences, stepdown_changepoint
from .kernels import BARTLETT, ExpKernelSum, MaternSpec, TaperKernel
from .sampling import SamplingDesign, generate_sites

__all__ = [
    "CoverageRow",
    "CoverageTable",
    "StudyConfig",
    "coverage_study",
    "fwer_study",
    "make_dgp",
    "power_study",
    "variance_consistency_check",
]

LARGE_P = 100


def make_dgp(name: str, p: int, seed: int = 0) -> FieldModel:
    """The three standard designs: ``dgp1`` (CP-CAR(1)), ``dgp2`` (Matérn), ``dgp3`` (factor)."""
    key = name.lower()
    if key in ("dgp1", "cp-car1", "cpcar1", "cp"):
        return CompoundPoissonMA(p, kernel=ExpKernelSum.single(1.0, 3.0), intensity=1.0)
    if key in ("dgp2", "matern"):
        return GaussianMatern(p, MaternSpec(1.5, 1.0 / math.sqrt(3.0), 1.0))
    if key in ("dgp3", "factor"):
        return FactorModel.random(p, k=5, seed=seed, factor=MaternSpec(1.5, 1.0 / math.sqrt(3.0), 1.0))
    raise ValueError(f"unknown DGP {name!r}; use dgp1/cp-car1, dgp2/matern or dgp3/factor")


@dataclass(frozen=True, eq=False)
class StudyConfig:
    """Configuration of a Monte Carlo study.

    ``levels`` are confidence levels ``1 - tau``. ``threads`` of 0 means the
    ``SDWB_THREADS`` environment variable or, failing that, all CPUs.
    """

    dgp: FieldModel
    design: SamplingDesign
    n: int = 100
    bandwidths: tuple[float, ...] = tuple(float(b) for b in range(1, 11))
    replications: int = 500
    bootstrap: int = 1000
    levels: tuple[float, ...] = (0.95, 0.99)
    taper: TaperKernel = BARTLETT
    base_seed: int = 0
    dgp_name: str = "custom"
    psd_repair: str = "clip"
    threads: int = 1
    allow_large_p: bool = False

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not self.bandwidths:
            raise ValueError("bandwidth grid must be nonempty")
        if any(not 0 < lv < 1 for lv in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        object.__setattr__(self, "levels", tuple(float(lv) for lv in self.levels))

    @property
    def p(self) -> int:
        return self.dgp.p

    @property
    def lambda_d(self) -> float:
        return self.design.lambda_d


@dataclass(frozen=True)
class CoverageRow:
    dgp: str
    n: int
    p: int
    lambda_n: float
    b: float
    level: float
    empirical_coverage: float
    mc_standard_error: float
    replications: int


COVERAGE_COLUMNS = tuple(CoverageRow.__dataclass_fields__)


@dataclass
class CoverageTable:
    rows: list[CoverageRow]
    repair_rate: dict[float, float] = field(default_factory=dict)

    def get(self, b: float, level: float) -> CoverageRow:
        for row in self.rows:
            if row.b == float(b) and math.isclose(row.level, level):
                return row
        raise KeyError((b, level))

    def best(self, level: float, bandwidths: Sequence[float] | None = None) -> CoverageRow:
        """Row whose coverage is closest to ``level``."""
        cands = [r for r in self.rows if math.isclose(r.level, level)]
        if bandwidths is not None:
            cands = [r for r in cands if r.b in {float(b) for b in bandwidths}]
        return min(cands, key=lambda r: (abs(r.empirical_coverage - level), r.b))


def mc_se(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def replication_seed(base_seed: int, rep: int, *stage) -> int:
    """Integer seed for one stage of one replication."""
    return int(seed_sequence(base_seed, rep, *stage).generate_state(1, np.uint64)[0] >> 1)


def resolve_threads(threads: int) -> int:
    if threads > 0:
        return threads
    env = os.environ.get("SDWB_THREADS", "")
    if env.strip():
        value = int(env)
        if value > 0:
            return value
    return os.cpu_count() or 1


def _limit_blas() -> None:
    from threadpoolctl import threadpool_limits

    threadpool_limits(1)


def run_replications(fn: Callable, cfg, reps: int, threads: int) -> list:
    """``[fn(cfg, r) for r in range(reps)]``, possibly in worker processes."""
    workers = min(resolve_threads(threads), reps)
    if workers <= 1:
        return [fn(cfg, r) for r in range(reps)]
    chunk = max(1, reps // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_limit_blas) as pool:
        return list(pool.map(fn, repeat(cfg), range(reps), chunksize=chunk))


def _draw(cfg: StudyConfig, rep: int):
    sites = generate_sites(cfg.design, cfg.n, seed=replication_seed(cfg.base_seed, rep, "sites"))
    y = simulate(sites, cfg.dgp, seed=replication_seed(cfg.base_seed, rep, "data"))
    return sites, y


def _sdwb(cfg: StudyConfig, rep: int, b: float, stage: str = "boot") -> SdwbConfig:
    return SdwbConfig(
        taper=cfg.taper,
        bandwidth=b,
        replicates=cfg.bootstrap,
        seed=replication_seed(cfg.base_seed, rep, stage, b),
        psd_repair=cfg.psd_repair,  # type: ignore[arg-type]
    )


def _check_size(cfg: StudyConfig) -> None:
    if cfg.p > LARGE_P:
        if not cfg.allow_large_p:
            raise ValueError(f"p={cfg.p} exceeds {LARGE_P}; set allow_large_p to run it")
        warnings.warn(f"running a p={cfg.p} study; expect long runtimes", RuntimeWarning, stacklevel=3)


def _coverage_replicate(cfg: StudyConfig, rep: int):
    sites, y = _draw(cfg, rep)
    mu = true_mean(cfg.dgp)
    covered = np.zeros((len(cfg.bandwidths), len(cfg.levels)), dtype=bool)
    repaired = np.zeros(len(cfg.bandwidths), dtype=bool)
    for i, b in enumerate(cfg.bandwidths):
        boot = _sdwb(cfg, rep, b)
        mult = MultiplierField(sites, boot.taper, b, boot.psd_repair)
        repaired[i] = mult.repaired
        cis = joint_ci_levels(y, boot, cfg.lambda_d, cfg.levels, multiplier=mult)
        covered[i] = [ci.contains(mu) for ci in cis]
    return covered, repaired


def coverage_study(cfg: StudyConfig) -> CoverageTable:
    """Empirical coverage of the joint intervals for every (bandwidth, level) cell.

    Any failing replication aborts the study, so every cell is over all
    ``cfg.replications`` replications.
    """
    _check_size(cfg)
    results = run_replications(_coverage_replicate, cfg, cfg.replications, cfg.threads)
    covered = np.stack([r[0] for r in results])
    repaired = np.stack([r[1] for r in results])
    R = cfg.replications
    rows = []
    for i, b in enumerate(cfg.bandwidths):
        for k, level in enumerate(cfg.levels):
            c = float(covered[:, i, k].mean())
            rows.append(CoverageRow(cfg.dgp_name, cfg.n, cfg.p, cfg.design.lambda_n, b, level, c, mc_se(c, R), R))
    rates = {b: float(repaired[:, i].mean()) for i, b in enumerate(cfg.bandwidths)}
    return CoverageTable(rows, rates)


@dataclass(frozen=True)
class FwerRow:
    dgp: str
    n: int
    p: int
    lambda_n: float
    b: float
    tau: float
    fwer: float
    mc_standard_error: float
    replications: int


def _null_diffs(cfg: StudyConfig, rep: int):
    _, y = _draw(cfg, rep)
    return stack_adjacent_differences(y)


def _fwer_replicate(cfg: StudyConfig, rep: int):
    diffs = _null_diffs(cfg, rep)
    mu = np.diff(true_mean(cfg.dgp))
    out = np.zeros((len(cfg.bandwidths), len(cfg.levels)), dtype=bool)
    for i, b in enumerate(cfg.bandwidths):
        boot = _sdwb(cfg, rep, b, "stepdown")
        mult = MultiplierField(diffs.sites, boot.taper, b, boot.psd_repair)
        for k, level in enumerate(cfg.levels):
            res = stepdown_changepoint(diffs, boot, cfg.lambda_d, 1.0 - level, multiplier=mult)
            out[i, k] = any(mu[j] == 0 for j in res.rejected)
    return out


def fwer_study(cfg: StudyConfig) -> list[FwerRow]:
    """Rate of replications in which the stepdown test rejects a true null.

    The model's columns are time points; the test runs on adjacent differences.
    All levels in ``cfg.levels`` share the same bootstrap draws.
    """
    _check_size(cfg)
    if cfg.p < 2:
        raise ValueError("need at least two time points")
    results = np.stack(run_replications(_fwer_replicate, cfg, cfg.replications, cfg.threads))
    rows = []
    for i, b in enumerate(cfg.bandwidths):
        for k, level in enumerate(cfg.levels):
            f = float(results[:, i, k].mean())
            rows.append(
                FwerRow(cfg.dgp_name, cfg.n, cfg.p, cfg.design.lambda_n, b, round(1.0 - level, 12), f,
                        mc_se(f, cfg.replications), cfg.replications)
            )
    return rows


@dataclass(frozen=True)
class PowerRow:
    b: float
    tau: float
    magnitude: float
    detection_rate: float
    localization: float
    spurious_rate: float
    mc_standard_error: float
    replications: int


@dataclass(frozen=True, eq=False)
class _PowerJob:
    cfg: StudyConfig
    change_index: int
    magnitudes: tuple[float, ...]


def _power_replicate(job: _PowerJob, rep: int):
    cfg = job.cfg
    _, y = _draw(cfg, rep)
    step = (np.arange(1, cfg.p + 1) > job.change_index).astype(float)
    true_j = job.change_index - 1
    out = np.zeros((len(cfg.bandwidths), len(cfg.levels), len(job.magnitudes), 3), dtype=bool)
    for i, b in enumerate(cfg.bandwidths):
        boot = _sdwb(cfg, rep, b, "stepdown")
        mult = MultiplierField(y.sites, boot.taper, b, boot.psd_repair)
        for m, mag in enumerate(job.magnitudes):
            diffs = stack_adjacent_differences(y.with_values(y.values + mag * step))
            for k, level in enumerate(cfg.levels):
                rej = set(stepdown_changepoint(diffs, boot, cfg.lambda_d, 1.0 - level, multiplier=mult).rejected)
                out[i, k, m] = (true_j in rej, rej == {true_j}, bool(rej - {true_j}))
    return out


def power_study(
    cfg: StudyConfig, change_index: int, magnitudes: Sequence[float]
) -> list[PowerRow]:
    """Detection of a single mean shift between time points ``change_index`` and ``change_index + 1``.

    ``cfg.dgp`` should have a constant mean; the shift of each magnitude is added
    to every time point after ``change_index`` (1-based). Magnitudes share the
    same data and bootstrap draws. ``localization`` is the fraction of
    replications with any rejection whose rejection set is exactly the true
    change; ``spurious_rate`` is the fraction rejecting any other index.
    """
    _check_size(cfg)
    if not 1 <= change_index < cfg.p:
        raise ValueError("change_index must lie in 1..p-1")
    job = _PowerJob(cfg, int(change_index), tuple(float(m) for m in magnitudes))
    res = np.stack(run_replications(_power_replicate, job, cfg.replications, cfg.threads))
    R = cfg.replications
    rows = []
    for i, b in enumerate(cfg.bandwidths):
        for k, level in enumerate(cfg.levels):
            for m, mag in enumerate(job.magnitudes):
                hit, exact, spurious = res[:, i, k, m, 0], res[:, i, k, m, 1], res[:, i, k, m, 2]
                any_rej = hit | spurious
                det = float(hit.mean())
                loc = float(exact[any_rej].mean()) if any_rej.any() else float("nan")
                rows.append(PowerRow(b, round(1.0 - level, 12), mag, det, loc, float(spurious.mean()), mc_se(det, R), R))
    return rows


@dataclass(frozen=True)
class VarianceRow:
    b: float
    j: int
    mean_sigma: float
    oracle: float
    relative_deviation: float
    mc_standard_error: float
    replications: int


def _variance_replicate(cfg: StudyConfig, rep: int):
    _, y = _draw(cfg, rep)
    return np.stack([sdwb_cov(y, cfg.taper, b, cfg.lambda_d).diag for b in cfg.bandwidths])


def variance_consistency_check(cfg: StudyConfig) -> list[VarianceRow]:
    """Compare the average lag-window variance with the limit covariance oracle."""
    oracle = limit_cov_oracle(cfg.dgp, cfg.design)
    sig = np.stack(run_replications(_variance_replicate, cfg, cfg.replications, cfg.threads))
    R = cfg.replications
    rows = []
    for i, b in enumerate(cfg.bandwidths):
        for j in range(cfg.p):
            vals = sig[:, i, j]
            mean = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
            rel = (mean - oracle[j]) / oracle[j] if oracle[j] != 0 else float("nan")
            rows.append(VarianceRow(b, j, mean, float(oracle[j]), rel, se, R))
    return rows
