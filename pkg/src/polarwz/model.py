"""Gaussian source model, guess schedule and the per-round closed forms.

The source is a pair ``(X, Y)`` with ``X = Y + Z``; ``var(X) = sigma_x2`` is
known to both endpoints while ``var(Z) = sigma_z2`` is not.  Round ``k`` of the
protocol guesses ``sigma_z2 = sigma2[k]`` and conveys one Gaussian *part* of
the auxiliary; the parts telescope so that after ``k`` rounds the endpoints
share the auxiliary that would be optimal for guess ``k``.

All rates are in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidParameterError


@dataclass(frozen=True)
class SourceParams:
    """Source statistics and target distortion.

    ``sigma_z2`` is only used to *simulate* side information; the codec never
    reads it.
    """

    sigma_x2: float
    sigma_z2: float
    delta: float

    def __post_init__(self):
        if not self.sigma_x2 > 0 or not self.delta > 0:
            raise InvalidParameterError("sigma_x2 and delta must be positive")
        if not 0 <= self.sigma_z2 < self.sigma_x2:
            raise InvalidParameterError(
                f"need 0 <= sigma_z2 < sigma_x2, got sigma_z2={self.sigma_z2}, "
                f"sigma_x2={self.sigma_x2}")
        if not self.delta < self.sigma_x2:
            raise InvalidParameterError("delta must be below sigma_x2")

    @property
    def covariance(self) -> np.ndarray:
        c = self.sigma_x2 - self.sigma_z2
        return np.array([[self.sigma_x2, c], [c, c]])


@dataclass(frozen=True)
class GuessSchedule:
    """Increasing guesses ``sigma2[0] < ... < sigma2[r]`` for the noise variance.

    ``sigma2[0]`` is the lower end of the universality interval; rounds
    ``1..r`` use guesses ``sigma2[1..r]``.
    """

    sigma2: tuple

    def __post_init__(self):
        s = tuple(float(v) for v in self.sigma2)
        if not s:
            raise InvalidParameterError("schedule needs at least one point")
        if s[0] <= 0:
            raise InvalidParameterError("guesses must be positive")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise InvalidParameterError("guesses must be strictly increasing")
        object.__setattr__(self, "sigma2", s)

    @property
    def r(self) -> int:
        return len(self.sigma2) - 1

    @property
    def omega(self) -> float:
        """Largest half-log2 ratio between consecutive guesses."""
        if self.r == 0:
            return 0.0
        return max(0.5 * math.log2(b / a) for a, b in zip(self.sigma2, self.sigma2[1:]))

    def validate(self, src: SourceParams) -> None:
        if self.sigma2[0] <= src.delta:
            raise InvalidParameterError("first guess must exceed the target distortion")
        if self.sigma2[-1] >= src.sigma_x2:
            raise InvalidParameterError("every guess must stay below sigma_x2")

    def first_covering_round(self, sigma_z2: float) -> int | None:
        """Smallest round ``k >= 1`` whose guess is at least ``sigma_z2``."""
        for k in range(1, self.r + 1):
            if self.sigma2[k] >= sigma_z2:
                return k
        return None


@dataclass(frozen=True)
class RoundParams:
    k: int
    sigma_k2: float
    delta_k: float
    alpha_k: float
    var_part: float
    var_t: float
    var_zprime: float
    ybar_scale: float

    @property
    def encoder_noise(self) -> float:
        """Noise variance between this round's part and the encoder residual."""
        return self.var_t

    @property
    def decoder_noise(self) -> float:
        """Noise variance between this round's part and the decoder residual."""
        return self.var_t + self.var_zprime


def make_schedule(interval_lo: float, interval_hi: float, omega: float) -> GuessSchedule:
    """Geometric grid from ``interval_lo`` with ratio ``2**(2*omega)``.

    The grid is extended upward until it covers ``interval_hi``.
    """
    if interval_lo <= 0 or interval_hi <= 0 or omega <= 0:
        raise InvalidParameterError("schedule parameters must be positive")
    if interval_hi < interval_lo:
        raise InvalidParameterError("interval_hi must be >= interval_lo")
    ratio = 2.0 ** (2.0 * omega)
    steps = math.ceil(math.log(interval_hi / interval_lo) / math.log(ratio) - 1e-12)
    steps = max(steps, 0)
    return GuessSchedule(tuple(interval_lo * ratio ** i for i in range(steps + 1)))


def distortion_at(sigma2: float, delta: float) -> float:
    if sigma2 <= delta:
        raise InvalidParameterError(f"guess {sigma2} must exceed delta {delta}")
    return sigma2 * delta / (sigma2 - delta)


def residual_variance(j: int, sched: GuessSchedule, src: SourceParams) -> float:
    """``alpha_j * Delta_j``: variance of X left after subtracting ``A_j``.

    ``j = 0`` means nothing has been subtracted yet, i.e. ``sigma_x2``.
    """
    if j == 0:
        return src.sigma_x2
    dj = distortion_at(sched.sigma2[j], src.delta)
    return src.sigma_x2 * dj / (src.sigma_x2 + dj)


def zprime_variance(sigma2: float, sigma_x2: float) -> float:
    if sigma2 >= sigma_x2:
        raise InvalidParameterError("guess must be below sigma_x2")
    return sigma_x2 * sigma2 / (sigma_x2 - sigma2)


def round_params(k: int, sched: GuessSchedule, src: SourceParams) -> RoundParams:
    if not 1 <= k <= sched.r:
        raise InvalidParameterError(f"round {k} outside 1..{sched.r}")
    s2 = sched.sigma2[k]
    if s2 <= src.delta:
        raise InvalidParameterError(f"guess {s2} <= delta: pole in Delta_k")
    if s2 >= src.sigma_x2:
        raise InvalidParameterError(f"guess {s2} >= sigma_x2: pole in the side-information scale")
    delta_k = distortion_at(s2, src.delta)
    alpha_k = src.sigma_x2 / (src.sigma_x2 + delta_k)
    var_t = alpha_k * delta_k
    var_part = residual_variance(k - 1, sched, src) - var_t
    return RoundParams(
        k=k,
        sigma_k2=s2,
        delta_k=delta_k,
        alpha_k=alpha_k,
        var_part=var_part,
        var_t=var_t,
        var_zprime=zprime_variance(s2, src.sigma_x2),
        ybar_scale=src.sigma_x2 / (src.sigma_x2 - s2),
    )


def sample_source(n: int, src: SourceParams, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` i.i.d. pairs with covariance ``src.covariance``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rng = np.random.default_rng(seed)
    y = math.sqrt(src.sigma_x2 - src.sigma_z2) * rng.standard_normal(n)
    z = math.sqrt(src.sigma_z2) * rng.standard_normal(n)
    return y + z, y


def scaled_side_info(y: np.ndarray, src: SourceParams, rp: RoundParams) -> np.ndarray:
    return np.asarray(y, dtype=float) * rp.ybar_scale


def mmse_gain(src: SourceParams, rp: RoundParams) -> float:
    s2 = rp.sigma_k2
    return (src.sigma_x2 - s2) * src.delta / (src.sigma_x2 * s2)


def mmse_reconstruct(a_hat, ybar, src: SourceParams, rp: RoundParams) -> np.ndarray:
    a_hat = np.asarray(a_hat, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if a_hat.shape != ybar.shape:
        raise InvalidArgumentError("a_hat and ybar must have equal length")
    return a_hat + mmse_gain(src, rp) * (ybar - a_hat)


def _gaussian_cmi(cov: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """``I(a; b | c)`` in bits for linear functionals of a Gaussian vector.

    ``a``, ``b``, ``c`` are row matrices mapping the underlying vector (with
    covariance ``cov``) to the three variables.
    """
    def logdet(*rows):
        m = np.vstack(rows)
        sign, val = np.linalg.slogdet(m @ cov @ m.T)
        return val

    return 0.5 * (logdet(a, c) + logdet(b, c) - logdet(c) - logdet(a, b, c)) / math.log(2)


def mi_decomposition(k: int, sched: GuessSchedule, src: SourceParams) -> tuple[float, float]:
    """Both sides of the per-part decomposition of ``I(A_k; X | Ybar)``.

    Ybar is the side information rescaled for guess ``k``.  The left side is
    the information the first ``k`` parts carry about X; the right side sums,
    part by part, the information part ``j`` carries about the residual
    ``X - A_j`` given ``Ybar - A_j``.
    """
    if not 1 <= k <= sched.r:
        raise InvalidParameterError(f"round {k} outside 1..{sched.r}")
    r = sched.r
    parts = [round_params(j, sched, src).var_part for j in range(1, r + 1)]
    tail = residual_variance(r, sched, src)
    vz = zprime_variance(sched.sigma2[k], src.sigma_x2)
    # underlying independent coordinates: parts 0..r-1, tail residual, Z'
    cov = np.diag(parts + [tail, vz])
    dim = r + 2
    x = np.ones(dim)
    x[-1] = 0.0
    ybar = np.ones(dim)

    def acc(j):
        v = np.zeros(dim)
        v[:j] = 1.0
        return v

    lhs = _gaussian_cmi(cov, acc(k)[None], x[None], ybar[None])
    rhs = 0.0
    for j in range(k):
        part = np.zeros(dim)
        part[j] = 1.0
        rhs += _gaussian_cmi(cov, part[None], (x - acc(j))[None], (ybar - acc(j))[None])
    return lhs, rhs


def part_rate(k: int, sched: GuessSchedule, src: SourceParams, guess: int | None = None) -> float:
    """Closed-form bits/sample needed to convey round ``k``'s part.

    The side information is taken at guess ``guess`` (defaults to ``k``).
    """
    rp = round_params(k, sched, src)
    vz = zprime_variance(sched.sigma2[k if guess is None else guess], src.sigma_x2)
    t_prev = rp.var_part + rp.var_t
    return 0.5 * (math.log2(t_prev / rp.var_t) - math.log2((t_prev + vz) / (rp.var_t + vz)))
