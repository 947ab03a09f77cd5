"""Taper kernels, Matérn covariances and exponential moving-average kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import linalg

from .sampling import SiteSet, pairwise_distances

__all__ = [
    "BARTLETT",
    "PARZEN",
    "ExpKernelSum",
    "MaternSpec",
    "TaperKernel",
    "carma21_kernel",
    "carma21_varsigma",
    "carma_kernel",
    "exp_kernel_eval",
    "matern_cov",
    "psd_check",
    "taper_eval",
    "taper_gram",
]

TaperKind = Literal["bartlett", "parzen"]


@dataclass(frozen=True)
class TaperKernel:
    """Compactly supported taper ``a`` with ``a(0) = 1`` and ``a(x) = 0`` for ``|x| >= 1``.

    * ``bartlett``: ``max(0, 1 - |x|)``
    * ``parzen``: ``1 - 6x^2 + 6|x|^3`` on ``|x| <= 1/2``, ``2(1 - |x|)^3`` on ``1/2 < |x| <= 1``
    """

    kind: TaperKind = "bartlett"

    def __post_init__(self) -> None:
        if self.kind not in ("bartlett", "parzen"):
            raise ValueError(f"unknown taper kernel {self.kind!r}; use 'bartlett' or 'parzen'")

    @classmethod
    def from_name(cls, name: str) -> TaperKernel:
        return cls(name.strip().lower())  # type: ignore[arg-type]

    def __call__(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        if self.kind == "bartlett":
            out = np.maximum(0.0, 1.0 - ax)
        else:
            out = np.where(
                ax <= 0.5,
                1.0 - 6.0 * ax**2 + 6.0 * ax**3,
                np.where(ax <= 1.0, 2.0 * (1.0 - ax) ** 3, 0.0),
            )
        return out if out.ndim else float(out)


BARTLETT = TaperKernel("bartlett")
PARZEN = TaperKernel("parzen")


def taper_eval(k: TaperKernel, x):
    return k(x)


_SUPPORTED_NU = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class MaternSpec:
    """Matérn covariance with half-integer smoothness ``nu``, range ``a_scale`` and variance ``sigma2``."""

    nu: float = 1.5
    a_scale: float = 1.0 / np.sqrt(3.0)
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        if float(self.nu) not in _SUPPORTED_NU:
            raise ValueError(f"unsupported Matérn smoothness nu={self.nu}; use one of {_SUPPORTED_NU}")
        if not self.a_scale > 0:
            raise ValueError("Matérn range a_scale must be positive")
        if not self.sigma2 > 0:
            raise ValueError("Matérn variance sigma2 must be positive")
        object.__setattr__(self, "nu", float(self.nu))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("distances must be nonnegative")
        t = np.sqrt(2.0 * self.nu) * r / self.a_scale
        if self.nu == 0.5:
            poly = 1.0
        elif self.nu == 1.5:
            poly = 1.0 + t
        else:
            poly = 1.0 + t + t**2 / 3.0
        out = self.sigma2 * poly * np.exp(-t)
        return out if out.ndim else float(out)


def matern_cov(spec: MaternSpec, r):
    return spec(r)


@dataclass(frozen=True)
class ExpKernelSum:
    """Isotropic kernel ``g(r) = sum_i xi_i * exp(-rho_i * r)`` with positive rates."""

    terms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(c), float(rho)) for c, rho in self.terms)
        if not terms:
            raise ValueError("an exponential kernel needs at least one term")
        if any(not rho > 0 for _, rho in terms):
            raise ValueError("all decay rates must be positive")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, coefficient: float = 1.0, rate: float = 3.0) -> ExpKernelSum:
        return cls(((coefficient, rate),))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def rates(self) -> np.ndarray:
        return np.array([rho for _, rho in self.terms])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c, rho in self.terms:
            out = out + c * np.exp(-rho * r)
        return out if out.ndim else float(out)


def exp_kernel_eval(g: ExpKernelSum, r):
    return g(r)


def carma_kernel(roots_lambda: Sequence[float], roots_xi: Sequence[float] = ()) -> ExpKernelSum:
    """Kernel of the isotropic CARMA(p0, q0) random field.

    With ``a(z) = prod(z^2 - lambda_i^2)`` and ``b(z) = prod(z^2 - xi_j^2)`` the
    kernel is ``sum_i b(lambda_i) / a'(lambda_i) * exp(lambda_i * r)``.
    """
    lam = np.asarray(roots_lambda, dtype=float)
    xi = np.asarray(roots_xi, dtype=float)
    p0, q0 = lam.size, xi.size
    if p0 == 0:
        raise ValueError("need at least one autoregressive root")
    if np.any(lam >= 0):
        raise ValueError("autoregressive roots must be negative")
    if np.unique(lam).size != p0:
        raise ValueError("autoregressive roots must be distinct")
    if q0 >= p0:
        raise ValueError("need q0 < p0")
    if q0 and np.any(np.isclose(lam[:, None] ** 2, xi[None, :] ** 2, rtol=0, atol=1e-14)):
        raise ValueError("lambda_i^2 must differ from xi_j^2 for all i, j")

    terms = []
    for i, li in enumerate(lam):
        b_val = np.prod(li**2 - xi**2)
        # a'(z) = 2z * sum_k prod_{m != k}(z^2 - lambda_m^2); only k = i survives at z = lambda_i
        others = np.delete(lam, i)
        a_prime = 2.0 * li * np.prod(li**2 - others**2)
        terms.append((b_val / a_prime, -li))
    return ExpKernelSum(tuple(terms))


def carma21_varsigma(lambda1: float, lambda2: float, xi: float) -> float:
    """Mixing weight of the normalized CARMA(2,1) kernel.

    Solves ``-(lambda2^2 - xi^2 lambda1) / (lambda1^2 - xi^2 lambda2) = w / (1 - w)`` for ``w``.
    """
    if not lambda1 < lambda2 < 0:
        raise ValueError("need lambda1 < lambda2 < 0")
    if xi > 0:
        raise ValueError("need xi <= 0")
    ratio = -(lambda2**2 - xi**2 * lambda1) / (lambda1**2 - xi**2 * lambda2)
    return ratio / (1.0 + ratio)


def carma21_kernel(lambda1: float, lambda2: float, varsigma: float) -> ExpKernelSum:
    """Normalized CARMA(2,1) kernel ``(1 - w) exp(lambda1 r) + w exp(lambda2 r)``."""
    if not lambda1 < lambda2 < 0:
        raise ValueError("need lambda1 < lambda2 < 0")
    return ExpKernelSum(((1.0 - varsigma, -lambda1), (varsigma, -lambda2)))


def taper_gram(k: TaperKernel, s: SiteSet | np.ndarray, b: float) -> np.ndarray:
    """Matrix ``[a(|s_i - s_j| / b)]``; ``s`` may be a site set or a distance matrix."""
    if not b > 0:
        raise ValueError(f"bandwidth must be positive, got {b}")
    dist = pairwise_distances(s) if isinstance(s, SiteSet) else np.asarray(s, dtype=float)
    return np.asarray(k(dist / b))


def psd_check(k: TaperKernel, s: SiteSet, b: float) -> float:
    """Smallest eigenvalue of the taper Gram matrix on ``s`` at bandwidth ``b``."""
    G = taper_gram(k, s, b)
    return float(linalg.eigvalsh(G, subset_by_index=[0, 0])[0])
