"""Random-field simulators at irregular sites and their analytic moments.

Three families are provided, matching the usual simulation designs for spatial
mean inference:

* :class:`GaussianMatern` -- independent Gaussian components with a Matérn covariance,
* :class:`CompoundPoissonMA` -- compound-Poisson driven moving average (shot noise),
* :class:`FactorModel` -- ``A F(s) + R(s)`` with Matérn factors and white noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from ._linalg import jittered_cholesky
from ._seeding import derive_rng
from .kernels import ExpKernelSum, MaternSpec
from .sampling import SiteSet, pairwise_distances

__all__ = [
    "BoundedUniformJumps",
    "CompoundPoissonMA",
    "FactorModel",
    "FieldSample",
    "GaussianMatern",
    "Moments",
    "StandardNormalJumps",
    "simulate",
    "simulate_cp_ma",
    "simulate_factor",
    "simulate_gaussian_field",
    "theoretical_moments",
]

# truncation side relative to lambda_n: 35 / 15 for the lambda_n = 15 design
DEFAULT_TRUNCATION_RATIO = 35.0 / 15.0


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Observations ``Y(s_i)`` stored row-wise in an ``n x p`` matrix."""

    sites: SiteSet
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.sites.n:
            raise ValueError(f"values must have {self.sites.n} rows, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def with_values(self, values: np.ndarray) -> FieldSample:
        return FieldSample(self.sites, values)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FieldSample)
            and self.sites == other.sites
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class StandardNormalJumps:
    """Jump vectors ``J ~ N(0, I_p)``."""

    def draw(self, rng: np.random.Generator, size: int, p: int) -> np.ndarray:
        return rng.standard_normal((size, p))

    @property
    def variance(self) -> float:
        return 1.0


@dataclass(frozen=True)
class BoundedUniformJumps:
    """Jump vectors with i.i.d. ``Uniform[-h, h]`` entries."""

    half_width: float = 1.0

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def draw(self, rng: np.random.Generator, size: int, p: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=(size, p))

    @property
    def variance(self) -> float:
        return self.half_width**2 / 3.0


JumpDist = Union[StandardNormalJumps, BoundedUniformJumps]
RadialKernel = Union[ExpKernelSum, MaternSpec, Callable[[np.ndarray], np.ndarray]]


def _check_shift(mean_shift, p: int):
    if mean_shift is None:
        return None
    mu = np.array(mean_shift, dtype=float).reshape(-1)
    if mu.size != p:
        raise ValueError(f"mean_shift must have length p={p}, got {mu.size}")
    mu.setflags(write=False)
    return mu


@dataclass(frozen=True, eq=False)
class GaussianMatern:
    p: int
    matern: MaternSpec = field(default_factory=MaternSpec)
    mean_shift: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        object.__setattr__(self, "mean_shift", _check_shift(self.mean_shift, self.p))


@dataclass(frozen=True, eq=False)
class CompoundPoissonMA:
    """Shot-noise field ``Y(s) = sum_k g(|s - x_k|) J_k`` driven by a Poisson process.

    ``truncation_scale`` is the side of the centered cube in which Poisson points
    are placed; ``None`` uses ``(35/15) * lambda_n`` of the site set.
    """

    p: int
    kernel: RadialKernel = field(default_factory=lambda: ExpKernelSum.single(1.0, 3.0))
    intensity: float = 1.0
    jump: JumpDist = field(default_factory=StandardNormalJumps)
    truncation_scale: float | None = None
    mean_shift: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.intensity > 0:
            raise ValueError("Poisson intensity must be positive")
        if self.truncation_scale is not None and not self.truncation_scale > 0:
            raise ValueError("truncation_scale must be positive")
        object.__setattr__(self, "mean_shift", _check_shift(self.mean_shift, self.p))


@dataclass(frozen=True, eq=False)
class FactorModel:
    """``Y(s) = A F(s) + R(s)`` with ``k`` independent Matérn factors and i.i.d. noise."""

    loadings: np.ndarray
    factor: MaternSpec = field(default_factory=MaternSpec)
    noise_sd: float = 1.0
    mean_shift: np.ndarray | None = None

    def __post_init__(self) -> None:
        A = np.array(self.loadings, dtype=float)
        if A.ndim != 2:
            raise ValueError("loading matrix must be p x k")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        A.setflags(write=False)
        object.__setattr__(self, "loadings", A)
        object.__setattr__(self, "mean_shift", _check_shift(self.mean_shift, A.shape[0]))

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    @classmethod
    def random(
        cls, p: int, k: int = 5, seed: int | None = None, **kwargs
    ) -> FactorModel:
        """Loadings drawn once from ``Uniform[-1, 1]`` and kept fixed."""
        A = derive_rng(seed, "loadings").uniform(-1.0, 1.0, size=(p, k))
        return cls(A, **kwargs)


FieldModel = Union[GaussianMatern, CompoundPoissonMA, FactorModel]


def simulate_gaussian_field(
    s: SiteSet, cov: Callable[[np.ndarray], np.ndarray], p: int, seed: int | None = None
) -> FieldSample:
    """Draw ``p`` independent columns from ``N(0, K)`` with ``K_ij = cov(|s_i - s_j|)``."""
    K = np.asarray(cov(pairwise_distances(s)), dtype=float)
    L, _ = jittered_cholesky(K)
    Z = derive_rng(seed, "gaussian").standard_normal((s.n, p))
    return FieldSample(s, L @ Z)


def _truncation_side(s: SiteSet, m: CompoundPoissonMA) -> float:
    side = m.truncation_scale if m.truncation_scale is not None else DEFAULT_TRUNCATION_RATIO * s.lambda_n
    reach = 2.0 * float(np.max(np.abs(s.sites)))
    if side < reach:
        raise ValueError(
            f"truncation region of side {side:g} does not contain the sites (needs >= {reach:g})"
        )
    return side


def simulate_cp_ma(
    s: SiteSet, m: CompoundPoissonMA, seed: int | None = None, n_points: int | None = None
) -> FieldSample:
    """Truncated compound-Poisson moving-average field at the sites.

    Poisson points are placed uniformly in a centered cube of side
    ``truncation_scale``; their number is Poisson with mean
    ``intensity * volume`` unless ``n_points`` forces it.
    """
    rng = derive_rng(seed, "cp-ma")
    side = _truncation_side(s, m)
    d = s.d
    if n_points is None:
        n_points = int(rng.poisson(m.intensity * side**d))
    values = np.zeros((s.n, m.p))
    if n_points > 0:
        x = rng.uniform(-side / 2, side / 2, size=(n_points, d))
        J = m.jump.draw(rng, n_points, m.p)
        # chunk over Poisson points so the n x N weight matrix stays small
        chunk = max(1, 2_000_000 // max(s.n, 1))
        for start in range(0, n_points, chunk):
            xs = x[start : start + chunk]
            dist = np.sqrt(((s.sites[:, None, :] - xs[None, :, :]) ** 2).sum(axis=-1))
            values += np.asarray(m.kernel(dist)) @ J[start : start + chunk]
    return FieldSample(s, values)


def simulate_factor(s: SiteSet, m: FactorModel, seed: int | None = None) -> FieldSample:
    F = simulate_gaussian_field(s, m.factor, m.k, seed)
    noise = derive_rng(seed, "noise").standard_normal((s.n, m.p)) * m.noise_sd
    return FieldSample(s, F.values @ m.loadings.T + noise)


def simulate(s: SiteSet, model: FieldModel, seed: int | None = None) -> FieldSample:
    """Simulate any supported model and add its ``mean_shift`` to every row."""
    if isinstance(model, GaussianMatern):
        y = simulate_gaussian_field(s, model.matern, model.p, seed)
    elif isinstance(model, CompoundPoissonMA):
        y = simulate_cp_ma(s, model, seed)
    elif isinstance(model, FactorModel):
        y = simulate_factor(s, model, seed)
    else:
        raise TypeError(f"unsupported field model {type(model).__name__}")
    if model.mean_shift is not None:
        y = y.with_values(y.values + model.mean_shift)
    return y


def true_mean(model: FieldModel) -> np.ndarray:
    """Mean vector of the model (all supported drivers have zero-mean jumps)."""
    return np.zeros(model.p) if model.mean_shift is None else np.array(model.mean_shift)


@dataclass(frozen=True)
class Moments:
    """Marginal variances ``Sigma_jj(0)`` and integrated covariances ``int Sigma_jj``."""

    sigma0: np.ndarray
    integrated_cov: np.ndarray


def _sphere_area(d: int) -> float:
    return 2.0 * np.pi ** (d / 2) / special.gamma(d / 2)


def _radial_integral(fun: Callable[[float], float], d: int) -> float:
    val, _ = integrate.quad(lambda r: r ** (d - 1) * float(fun(r)), 0.0, np.inf, epsrel=1e-10, limit=200)
    return _sphere_area(d) * val


def _matern_integral(spec: MaternSpec, d: int) -> float:
    if d == 2:
        # int_{R^2} sigma2 * Matérn(|x|) dx = 2 pi sigma2 a^2 for every half-integer nu
        return 2.0 * np.pi * spec.sigma2 * spec.a_scale**2
    return _radial_integral(spec, d)


def _kernel_integrals(g: RadialKernel, d: int) -> tuple[float, float]:
    """``int g`` and ``int g^2`` over ``R^d``."""
    if isinstance(g, ExpKernelSum) and d == 2:
        c, rho = g.coefficients, g.rates
        int_g = float(np.sum(2.0 * np.pi * c / rho**2))
        int_g2 = float(np.sum(2.0 * np.pi * np.outer(c, c) / np.add.outer(rho, rho) ** 2))
        return int_g, int_g2
    if isinstance(g, MaternSpec) and d == 2:
        int_g = _matern_integral(g, 2)
        return int_g, _radial_integral(lambda r: g(r) ** 2, d)
    return _radial_integral(g, d), _radial_integral(lambda r: float(g(r)) ** 2, d)


def theoretical_moments(m: FieldModel, d: int = 2) -> Moments:
    """Analytic lag-zero variance and integrated covariance of every coordinate."""
    if isinstance(m, GaussianMatern):
        sigma0 = np.full(m.p, m.matern.sigma2)
        integrated = np.full(m.p, _matern_integral(m.matern, d))
    elif isinstance(m, CompoundPoissonMA):
        int_g, int_g2 = _kernel_integrals(m.kernel, d)
        v = m.intensity * m.jump.variance
        sigma0 = np.full(m.p, v * int_g2)
        integrated = np.full(m.p, v * int_g**2)
    elif isinstance(m, FactorModel):
        row_norm2 = np.sum(m.loadings**2, axis=1)
        sigma0 = row_norm2 * m.factor.sigma2 + m.noise_sd**2
        integrated = row_norm2 * _matern_integral(m.factor, d)
    else:
        raise TypeError(f"unsupported field model {type(m).__name__}")
    return Moments(sigma0=sigma0, integrated_cov=integrated)
