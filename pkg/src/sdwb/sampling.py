"""Sampling regions and irregular random sampling sites.

Sites are generated by the stochastic design ``s_i = lambda_n * z_i`` where the
``z_i`` are i.i.d. draws from a density on a prototype rectangle ``R0`` inside
the unit cube ``(-1/2, 1/2]^d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._seeding import derive_rng

__all__ = [
    "PiecewiseConstant",
    "SamplingDesign",
    "SiteSet",
    "Uniform",
    "generate_sites",
    "pairwise_distances",
]


@dataclass(frozen=True)
class Uniform:
    """Uniform site density on the prototype region."""


@dataclass(frozen=True)
class PiecewiseConstant:
    """Site density that is constant on the cells of a regular grid over ``R0``.

    ``weights`` holds the probability mass of every cell (array with one axis per
    spatial dimension). It is normalized to total mass one on construction.
    """

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim == 0 or w.size == 0:
            raise ValueError("piecewise-constant density needs a nonempty weight grid")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("cell weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("density has nonpositive total mass")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PiecewiseConstant) and np.array_equal(self.weights, other.weights)

    def __hash__(self) -> int:
        return hash(self.weights.tobytes())


Density = Union[Uniform, PiecewiseConstant]


def _unit_cube(d: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    return (-0.5,) * d, (0.5,) * d


@dataclass(frozen=True)
class SamplingDesign:
    """Stochastic sampling design on the region ``lambda_n * R0``.

    Parameters
    ----------
    lambda_n : float
        Scale of the sampling region.
    d : int
        Spatial dimension.
    region : tuple of (lower, upper), optional
        Corners of the axis-aligned prototype rectangle ``R0``; defaults to the
        unit cube ``(-1/2, 1/2]^d``.
    density : Uniform or PiecewiseConstant
        Site density on ``R0``.
    kappa_inv : float
        ``lambda_n**d / n`` for the sample size of interest, or 0 for the
        mixed increasing-domain limit. Only used by the limit covariance.
    """

    lambda_n: float
    d: int = 2
    region: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    density: Density = field(default_factory=Uniform)
    kappa_inv: float = 0.0

    def __post_init__(self) -> None:
        if not self.lambda_n > 0:
            raise ValueError(f"lambda_n must be positive, got {self.lambda_n}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.kappa_inv < 0:
            raise ValueError("kappa_inv must be nonnegative")
        region = self.region if self.region is not None else _unit_cube(self.d)
        lower = tuple(float(v) for v in region[0])
        upper = tuple(float(v) for v in region[1])
        if len(lower) != self.d or len(upper) != self.d:
            raise ValueError("region corners must have d coordinates")
        if any(lo < -0.5 or hi > 0.5 for lo, hi in zip(lower, upper)):
            raise ValueError("prototype region must lie inside (-1/2, 1/2]^d")
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise ValueError("prototype region must have positive volume")
        object.__setattr__(self, "region", (lower, upper))
        if isinstance(self.density, PiecewiseConstant) and self.density.weights.ndim != self.d:
            raise ValueError("cell weight grid must have one axis per spatial dimension")

    @classmethod
    def for_sample_size(cls, lambda_n: float, n: int, d: int = 2, **kwargs) -> SamplingDesign:
        """Design whose ``kappa_inv`` is ``lambda_n**d / n``."""
        return cls(lambda_n=lambda_n, d=d, kappa_inv=lambda_n**d / n, **kwargs)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.region[0])

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.region[1])

    @property
    def volume(self) -> float:
        """Volume of the prototype region ``R0``."""
        return float(np.prod(self.upper - self.lower))

    @property
    def lambda_d(self) -> float:
        return float(self.lambda_n**self.d)

    def cell_volume(self) -> float:
        assert isinstance(self.density, PiecewiseConstant)
        return self.volume / self.density.weights.size

    def density_l2(self) -> float:
        """Integral of the squared site density over ``R0``."""
        if isinstance(self.density, Uniform):
            return 1.0 / self.volume
        w = self.density.weights
        return float(np.sum(w**2) / self.cell_volume())


@dataclass(frozen=True, eq=False)
class SiteSet:
    """Ordered collection of ``n`` sampling sites in ``R^d``.

    Row order is the indexing contract for every downstream matrix.
    """

    sites: np.ndarray
    lambda_n: float
    d: int

    def __post_init__(self) -> None:
        s = np.array(self.sites, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, self.d)
        if s.ndim != 2 or s.shape[1] != self.d:
            raise ValueError(f"sites must be an (n, {self.d}) array, got shape {s.shape}")
        if s.shape[0] < 1:
            raise ValueError("a site set needs at least one site")
        if not np.all(np.isfinite(s)):
            raise ValueError("site coordinates must be finite")
        if not self.lambda_n > 0:
            raise ValueError(f"lambda_n must be positive, got {self.lambda_n}")
        half = 0.5 * self.lambda_n * (1.0 + 1e-12)
        if np.any(np.abs(s) > half):
            raise ValueError(f"sites must lie in the scaled region [-{self.lambda_n / 2:g}, {self.lambda_n / 2:g}]^{self.d}")
        s.setflags(write=False)
        object.__setattr__(self, "sites", s)

    def __len__(self) -> int:
        return self.sites.shape[0]

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SiteSet)
            and self.d == other.d
            and self.lambda_n == other.lambda_n
            and np.array_equal(self.sites, other.sites)
        )

    def __hash__(self) -> int:
        return hash((self.sites.tobytes(), self.lambda_n, self.d))

    def subset(self, index) -> SiteSet:
        return SiteSet(self.sites[index], self.lambda_n, self.d)


def generate_sites(design: SamplingDesign, n: int, seed: int | None = None) -> SiteSet:
    """Draw ``n`` i.i.d. sites from the design density scaled by ``lambda_n``.

    Piecewise-constant densities are sampled by choosing a cell with probability
    equal to its weight and then a uniform point inside that cell.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 sites, got {n}")
    rng = derive_rng(seed, "sites")
    lower, upper = design.lower, design.upper
    if isinstance(design.density, Uniform):
        z = rng.uniform(lower, upper, size=(n, design.d))
    else:
        w = design.density.weights
        shape = np.array(w.shape)
        cells = rng.choice(w.size, size=n, p=w.ravel())
        idx = np.stack(np.unravel_index(cells, w.shape), axis=1)
        width = (upper - lower) / shape
        z = lower + (idx + rng.uniform(size=(n, design.d))) * width
    return SiteSet(design.lambda_n * z, design.lambda_n, design.d)


def pairwise_distances(s: SiteSet) -> np.ndarray:
    """Symmetric ``n x n`` matrix of Euclidean distances between sites."""
    if s.n == 1:
        return np.zeros((1, 1))
    return squareform(pdist(s.sites))
