"""The scaled integer lattice, its discrete Gaussian, and bit-plane maps.

Lattice points are ``scale * m`` with integer ``m``.  Only the ``ell`` least
significant bits of ``m`` are ever coded; ``m`` is recovered as the centered
two's-complement representative of its residue mod ``2**ell``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightError, InvalidArgumentError, InvalidParameterError

# auto window half-width, in standard deviations
WINDOW_SIGMAS = 8.0
# centered ell-bit range must cover this many standard deviations
LEVEL_SIGMAS = 6.0


@dataclass(frozen=True)
class Lattice1D:
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise InvalidParameterError("t must be >= 1")

    @property
    def scale(self) -> float:
        return 2.0 ** (-self.t / 4.0)

    @classmethod
    def for_blocklength(cls, n: int) -> "Lattice1D":
        t = int(n).bit_length() - 1
        if n < 2 or 1 << t != n:
            raise InvalidParameterError(f"block length must be a power of two >= 2, got {n}")
        return cls(t)

    def to_int(self, v, atol: float = 1e-9) -> np.ndarray:
        """Integer coordinates of lattice vector ``v``; rejects off-lattice input."""
        q = np.asarray(v, dtype=float) / self.scale
        m = np.rint(q)
        if not np.all(np.abs(q - m) <= atol * np.maximum(1.0, np.abs(q))):
            raise InvalidArgumentError("vector has a coordinate outside the lattice")
        return m.astype(np.int64)


@dataclass(frozen=True)
class DiscreteGaussianSpec:
    """Discrete Gaussian over a lattice, truncated to ``center +- window`` steps.

    When ``window`` is omitted it is set to cover ``8 * sigma``.
    """

    lattice: Lattice1D
    sigma: float
    center: float = 0.0
    window: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        if self.window is None:
            w = math.ceil(WINDOW_SIGMAS * self.sigma / self.lattice.scale)
            object.__setattr__(self, "window", int(w))
        elif self.window < 0:
            raise InvalidParameterError("window must be >= 0")

    @property
    def support(self) -> np.ndarray:
        """Integer coordinates of the window, ascending."""
        c = int(round(self.center / self.lattice.scale))
        return np.arange(c - self.window, c + self.window + 1, dtype=np.int64)

    def pmf_table(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.support
        lam = m * self.lattice.scale
        logw = -((lam - self.center) ** 2) / (2.0 * self.sigma**2)
        w = np.exp(logw - logw.max())
        return m, w / w.sum()


@dataclass(frozen=True)
class BitPlanes:
    """``ell x n`` binary matrix; row ``i`` is bit ``i`` (least significant first)."""

    planes: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.planes, dtype=np.uint8)
        if p.ndim != 2 or np.any(p > 1):
            raise InvalidArgumentError("planes must be a binary ell x n matrix")
        object.__setattr__(self, "planes", p)

    @property
    def ell(self) -> int:
        return self.planes.shape[0]

    @property
    def n(self) -> int:
        return self.planes.shape[1]


def dg_pmf(spec: DiscreteGaussianSpec, lam: float) -> float:
    m = int(spec.lattice.to_int(lam))
    support, p = spec.pmf_table()
    pos = m - support[0]
    if pos < 0 or pos >= len(support):
        return 0.0
    return float(p[pos])


def dg_sample(spec: DiscreteGaussianSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. lattice points by inverse CDF over the window."""
    return dg_sample_int(spec, n, rng) * spec.lattice.scale


def dg_sample_int(spec: DiscreteGaussianSpec, size, rng: np.random.Generator) -> np.ndarray:
    support, p = spec.pmf_table()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return support[np.minimum(idx, len(support) - 1)]


def int_to_planes(m, ell: int) -> np.ndarray:
    r = np.mod(np.asarray(m, dtype=np.int64), 1 << ell)
    shifts = np.arange(ell, dtype=np.int64).reshape((ell,) + (1,) * r.ndim)
    return ((r[None] >> shifts) & 1).astype(np.uint8)


def planes_to_int(planes: np.ndarray) -> np.ndarray:
    """Centered integer representatives of the residues held in ``planes``."""
    planes = np.asarray(planes, dtype=np.int64)
    ell = planes.shape[0]
    weights = (1 << np.arange(ell, dtype=np.int64)).reshape((ell,) + (1,) * (planes.ndim - 1))
    m = (planes * weights).sum(axis=0)
    return m - (m >= (1 << (ell - 1))) * (1 << ell)


def point_to_planes(v, ell: int, lattice: Lattice1D) -> BitPlanes:
    if ell < 1:
        raise InvalidParameterError("ell must be >= 1")
    return BitPlanes(int_to_planes(lattice.to_int(np.atleast_1d(v)), ell))


def planes_to_point(planes: BitPlanes, lattice: Lattice1D) -> np.ndarray:
    return planes_to_int(planes.planes) * lattice.scale


def choose_levels(lattice: Lattice1D, max_std: float) -> int:
    """Smallest ``ell`` whose centered range covers ``6 * max_std``."""
    need = LEVEL_SIGMAS * max_std / lattice.scale
    ell = 1
    while 2 ** (ell - 1) < need:
        ell += 1
    return ell


def _normal_pdf(x, var):
    return np.exp(-(x**2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def level_channel_weights(obs: float, residue_class: int, level: int,
                          spec: DiscreteGaussianSpec, noise_var: float) -> tuple[float, float]:
    """Joint weights of bit ``level`` being 0/1 with observation ``obs``.

    Reference implementation: sums prior times Gaussian likelihood over every
    window point in the coset ``residue_class + b * 2**(level-1) (mod 2**level)``.
    """
    if level < 1 or not 0 <= residue_class < 1 << (level - 1):
        raise InvalidArgumentError("residue class must lie in [0, 2**(level-1))")
    if not noise_var > 0:
        raise InvalidParameterError("noise_var must be positive")
    support, p = spec.pmf_table()
    lam = support * spec.lattice.scale
    like = p * _normal_pdf(obs - lam, noise_var)
    res = np.mod(support, 1 << level)
    out = []
    for b in (0, 1):
        sel = res == residue_class + b * (1 << (level - 1))
        if not sel.any():
            raise DegenerateWeightError(f"coset of bit {b} is empty inside the window")
        out.append(float(like[sel].sum()))
    return out[0], out[1]


def _log_periodic_gauss(delta: np.ndarray, period: float, sigma: float) -> np.ndarray:
    """``log sum_n exp(-(delta + n*period)**2 / (2 sigma**2))`` up to a constant.

    The additive constant depends only on ``(period, sigma)``, so differences
    taken at equal ``(period, sigma)`` are exact.  Wide Gaussians use the
    Poisson-dual series, narrow ones the direct sum; both keep under a dozen
    terms.
    """
    ratio = sigma / period
    if ratio >= 0.6:
        kmax = max(1, math.ceil(1.5 / ratio))
        acc = np.zeros_like(delta)
        for k in range(1, kmax + 1):
            acc += math.exp(-2.0 * math.pi**2 * ratio**2 * k * k) * np.cos(2.0 * math.pi * k * delta / period)
        return np.log1p(2.0 * acc)
    d = delta - period * np.round(delta / period)
    kmax = math.ceil(9.0 * ratio) + 1
    terms = np.stack([-((d + n * period) ** 2) / (2.0 * sigma**2) for n in range(-kmax, kmax + 1)])
    top = terms.max(axis=0)
    return top + np.log(np.exp(terms - top).sum(axis=0))


def level_llrs(residues: np.ndarray, level: int, lattice: Lattice1D, prior_var: float,
               obs: np.ndarray | None = None, noise_var: float | None = None) -> np.ndarray:
    """``log(w0 / w1)`` for bit ``level`` given lower-bit residues.

    Vectorised counterpart of :func:`level_channel_weights` for a zero-centred
    prior with the truncation window taken to infinity.  With ``obs=None`` the
    weights are the prior coset masses alone.
    """
    s = lattice.scale
    if obs is None:
        mu, var = 0.0, prior_var
    else:
        mu = np.asarray(obs, dtype=float) * (prior_var / (prior_var + noise_var))
        var = prior_var * noise_var / (prior_var + noise_var)
    period = s * (1 << level)
    off0 = s * np.asarray(residues, dtype=float) - mu
    off1 = off0 + s * (1 << (level - 1))
    sigma = math.sqrt(var)
    return _log_periodic_gauss(off0, period, sigma) - _log_periodic_gauss(off1, period, sigma)
