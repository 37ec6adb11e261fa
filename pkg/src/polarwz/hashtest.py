"""Quantized random-projection closeness test.

Before round 1 the encoder sends ``Q(R.T @ x)``: ``m`` Gaussian projections
of its source, each quantized to one of ``q`` levels on ``[-T, T]`` or to the
overflow symbol.  After every round the decoder projects its reconstruction
with the same ``R`` and compares: the mean squared gap estimates
``||x - x_hat||**2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidParameterError, TestDegenerateError

ACK_FACTOR = 2.84


class Feedback(enum.Enum):
    ACK = "ACK"
    NACK = "NACK"


@dataclass(frozen=True)
class HashParams:
    m: int
    q: int
    t_range: float
    seed_r: int

    def __post_init__(self):
        if self.m < 1 or self.q < 2 or not self.t_range > 0:
            raise InvalidParameterError("need m >= 1, q >= 2 and T > 0")

    @property
    def symbol_bits(self) -> int:
        return math.ceil(math.log2(self.q + 1))

    @property
    def bits(self) -> int:
        return self.m * self.symbol_bits

    @property
    def step(self) -> float:
        return 2.0 * self.t_range / (self.q - 1)

    def separable(self, n: int, delta: float) -> bool:
        return 6.0 * self.t_range**2 / (self.q - 1) ** 2 <= n * delta * (1 + 1e-12)


@dataclass(frozen=True)
class QuantizedHash:
    """Level indices in ``[0, q-1]``; the value ``q`` marks overflow."""

    values: np.ndarray
    q: int

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def valid(self) -> np.ndarray:
        return self.values < self.q


def choose_hash_params(n: int, delta: float, sigma_x2: float, m: int, seed_r: int = 0) -> HashParams:
    """Clip at four standard deviations of a projection; fewest levels that separate."""
    if n <= 0 or not delta > 0 or not sigma_x2 > 0:
        raise InvalidParameterError("n, delta and sigma_x2 must be positive")
    t_range = 4.0 * math.sqrt(sigma_x2 * n)
    q = math.ceil(1.0 + t_range * math.sqrt(6.0 / (n * delta)) - 1e-12)
    q = max(q, 2)
    while 6.0 * t_range**2 / (q - 1) ** 2 > n * delta:
        q += 1
    return HashParams(m=m, q=q, t_range=t_range, seed_r=seed_r)


def quantize_index(v, params: HashParams) -> np.ndarray:
    """Level index of each entry, or ``q`` for entries outside ``[-T, T]``."""
    v = np.asarray(v, dtype=float)
    T, q = params.t_range, params.q
    idx = np.floor((v + T) * (q - 1) / (2.0 * T)).astype(np.int64)
    idx = np.minimum(idx, q - 1)
    return np.where(np.abs(v) <= T, idx, q)


def dequantize(idx, params: HashParams) -> np.ndarray:
    idx = np.asarray(idx)
    return np.where(idx < params.q, -params.t_range + idx * params.step, np.nan)


def quantize(v: float, params: HashParams):
    """``(index, level)`` for ``v`` in range, ``None`` for the overflow symbol."""
    i = int(quantize_index(v, params))
    if i == params.q:
        return None
    return i, float(dequantize(i, params))


def projection_matrix(params: HashParams, n: int) -> np.ndarray:
    return np.random.default_rng(params.seed_r).standard_normal((n, params.m))


def make_hash(x, params: HashParams, R: np.ndarray | None = None) -> QuantizedHash:
    x = np.asarray(x, dtype=float)
    R = projection_matrix(params, len(x)) if R is None else R
    return QuantizedHash(quantize_index(R.T @ x, params), params.q)


def closeness_statistic(h: QuantizedHash, proj_xhat: np.ndarray, params: HashParams) -> float:
    """Mean squared gap between dequantized hash and the projections of ``x_hat``.

    Overflowed entries are skipped.
    """
    ok = h.valid
    if not ok.any():
        raise TestDegenerateError("every hash entry overflowed")
    gap = dequantize(h.values[ok], params) - np.asarray(proj_xhat)[ok]
    return float(np.mean(gap**2))


def closeness_test(h: QuantizedHash, x_hat, params: HashParams, delta: float,
                   R: np.ndarray | None = None) -> Feedback:
    x_hat = np.asarray(x_hat, dtype=float)
    if h.m != params.m:
        raise InvalidArgumentError("hash length does not match params.m")
    R = projection_matrix(params, len(x_hat)) if R is None else R
    gamma = closeness_statistic(h, R.T @ x_hat, params)
    return Feedback.ACK if gamma <= ACK_FACTOR * len(x_hat) * delta else Feedback.NACK


def pack_hash(h: QuantizedHash, params: HashParams) -> bytes:
    """``m`` fields of ``ceil(log2(q+1))`` bits, MSB first, zero-padded to a byte."""
    b = params.symbol_bits
    shifts = np.arange(b - 1, -1, -1)
    bits = ((np.asarray(h.values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_hash(data: bytes, params: HashParams) -> QuantizedHash:
    b = params.symbol_bits
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: params.m * b]
    if bits.size != params.m * b:
        raise InvalidArgumentError("hash payload too short")
    vals = bits.reshape(params.m, b).astype(np.int64) @ (1 << np.arange(b - 1, -1, -1))
    return QuantizedHash(vals, params.q)


# --------------------------------------------------------------- simulation
#
# Only the Gram matrix of (x, x_hat) matters for the test: every column r of
# R gives an independent bivariate normal pair (r.x, r.x_hat).  Sampling the
# pairs directly avoids forming the N x m matrix.

def _pair_draws(x_norm2: float, cross: float, e_norm2: float, m: int, rng: np.random.Generator,
                tilt: float = 1.0):
    """Projections ``(r.x, r.x_hat)`` for ``m`` columns and the log weight.

    ``cross = x . e`` with ``e = x - x_hat``.  With ``tilt != 1`` the part of
    ``r.e`` independent of ``r.x`` is drawn with variance scaled by ``tilt``;
    the returned log likelihood ratio re-weights to the true law.
    """
    w = math.sqrt(x_norm2) * rng.standard_normal(m)
    beta = cross / x_norm2
    s2 = max(e_norm2 - beta * cross, 0.0)
    z = rng.standard_normal(m)
    v = beta * w + math.sqrt(s2 * tilt) * z
    if tilt == 1.0:
        logw = 0.0
    else:
        # log N(v; beta*w, s2) - log N(v; beta*w, tilt*s2) at v = beta*w + sqrt(tilt*s2)*z
        logw = float(np.sum(0.5 * math.log(tilt) - 0.5 * z**2 * (tilt - 1.0)))
    return w, w - v, logw


def _random_pair(n: int, sigma_x2: float, dist2: float, rng: np.random.Generator):
    """Gram entries for ``x ~ N(0, sigma_x2 I)`` and a uniformly oriented error of norm^2 ``dist2``."""
    x = math.sqrt(sigma_x2) * rng.standard_normal(n)
    e = rng.standard_normal(n)
    e *= math.sqrt(dist2) / np.linalg.norm(e)
    return float(x @ x), float(x @ e), float(e @ e)


def simulate_test(n: int, delta: float, sigma_x2: float, m: int, dist_factor: float, trials: int,
                  rng: np.random.Generator) -> np.ndarray:
    """ACK outcome of ``trials`` closeness tests with ``||x - x_hat||**2 = dist_factor * n * delta``."""
    params = choose_hash_params(n, delta, sigma_x2, m)
    out = np.empty(trials, dtype=bool)
    for t in range(trials):
        px, pxh, _ = _pair_draws(*_random_pair(n, sigma_x2, dist_factor * n * delta, rng), m, rng)
        h = QuantizedHash(quantize_index(px, params), params.q)
        try:
            out[t] = closeness_statistic(h, pxh, params) <= ACK_FACTOR * n * delta
        except TestDegenerateError:
            out[t] = False
    return out


def log10_error_rate(n: int, delta: float, sigma_x2: float, m: int, dist_factor: float, samples: int,
                     rng: np.random.Generator, tilt: float | None = None) -> float:
    """Importance-sampling estimate of ``log10`` of the test's error probability.

    The error is a false ACK when ``dist_factor > ACK_FACTOR`` and a false
    NACK otherwise.  The error-direction component of every projection is
    drawn with variance scaled by ``tilt`` (default: moves the mean statistic
    onto the threshold) and re-weighted.
    """
    params = choose_hash_params(n, delta, sigma_x2, m)
    quant = params.step**2 / 3.0 / (n * delta)
    false_ack = dist_factor > ACK_FACTOR
    if tilt is None:
        tilt = max(ACK_FACTOR - quant, 1e-3) / dist_factor
    logs = []
    for _ in range(samples):
        gram = _random_pair(n, sigma_x2, dist_factor * n * delta, rng)
        px, pxh, logw = _pair_draws(*gram, m, rng, tilt=tilt)
        h = QuantizedHash(quantize_index(px, params), params.q)
        try:
            ack = closeness_statistic(h, pxh, params) <= ACK_FACTOR * n * delta
        except TestDegenerateError:
            ack = False
        if ack == false_ack:
            logs.append(logw)
    if not logs:
        return -math.inf
    top = max(logs)
    total = top + math.log(sum(math.exp(v - top) for v in logs))
    return (total - math.log(samples)) / math.log(10)
