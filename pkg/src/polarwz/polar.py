"""Polar transform, successive cancellation and multilevel part coding.

Each coded lattice vector is split into ``ell`` bit-planes.  Plane ``i`` is
coded with its own polar transform, processed after planes ``1..i-1`` so its
bit-channels condition on the lower planes.  Every index of every plane is in
exactly one class of a :class:`CodeSets`:

* ``f1``: both endpoints draw the bit from shared randomness;
* ``df``: the encoder sends the bit;
* ``i2``: the decoder recovers the bit by MAP decision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateWeightError, InvalidArgumentError, ProtocolViolationError
from .lattice import Lattice1D, level_llrs

SAMPLE = _kernels.SAMPLE
ARGMAX = _kernels.ARGMAX
FIXED = _kernels.FIXED
SHARED = _kernels.SHARED


def _check_pow2(n: int) -> int:
    t = int(n).bit_length() - 1
    if n < 1 or 1 << t != n:
        raise InvalidArgumentError(f"length {n} is not a power of two")
    return t


def transform(u) -> np.ndarray:
    """``u @ G_N`` over GF(2) along the last axis; an involution."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    _check_pow2(n)
    lead = x.shape[:-1]
    half = 1
    while half < n:
        v = x.reshape(lead + (n // (2 * half), 2, half))
        v[..., 0, :] ^= v[..., 1, :]
        half *= 2
    return x


@dataclass(frozen=True)
class SCResult:
    u: np.ndarray
    x: np.ndarray
    posteriors: np.ndarray  # (n, 2) normalized (p0, p1) from the observation tree
    prior_posteriors: np.ndarray


def sc_llr(llr, policy, *, llr_prior=None, fixed=None, uniforms=None,
           shared_uniforms=None) -> SCResult:
    """LLR-domain successive cancellation; see :func:`sc_pass`."""
    llr = np.ascontiguousarray(llr, dtype=float)
    n = llr.shape[0]
    _check_pow2(n)
    policy = np.ascontiguousarray(policy, dtype=np.int8)
    if policy.shape != (n,):
        raise InvalidArgumentError("policy length must match the block")
    zeros = np.zeros(n)
    llr_prior = zeros if llr_prior is None else np.ascontiguousarray(llr_prior, dtype=float)
    fixed = np.zeros(n, np.uint8) if fixed is None else np.ascontiguousarray(fixed, dtype=np.uint8)
    if uniforms is None:
        if np.any(policy == SAMPLE):
            raise InvalidArgumentError("SAMPLE indices need uniforms")
        uniforms = zeros
    if shared_uniforms is None:
        if np.any(policy == SHARED):
            raise InvalidArgumentError("SHARED indices need shared uniforms")
        shared_uniforms = zeros
    u = np.empty(n, np.uint8)
    x = np.empty(n, np.uint8)
    p1 = np.empty(n)
    p1p = np.empty(n)
    bad = _kernels.sc_run(llr, llr_prior, policy, fixed, np.asarray(uniforms, dtype=float),
                          np.asarray(shared_uniforms, dtype=float), u, x, p1, p1p)
    if bad >= 0:
        raise DegenerateWeightError(f"posterior undefined at index {bad}")
    return SCResult(u, x, np.column_stack([1.0 - p1, p1]), np.column_stack([1.0 - p1p, p1p]))


def _weights_to_llr(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2:
        raise InvalidArgumentError("weights must be an (n, 2) array")
    if np.any(w < 0) or np.any(w.sum(axis=1) <= 0) or not np.all(np.isfinite(w)):
        raise DegenerateWeightError("every coordinate needs finite, non-negative weights with positive total")
    with np.errstate(divide="ignore"):
        return np.log(w[:, 0]) - np.log(w[:, 1])


def sc_pass(weights, policy, rng: np.random.Generator | None = None, *, fixed=None,
            prior_weights=None, shared_uniforms=None) -> tuple[np.ndarray, np.ndarray]:
    """Successive cancellation over per-coordinate ``(w0, w1)`` weights.

    ``weights[j]`` is the joint weight of coded bit ``x_j`` with its
    observation.  ``policy[j]`` is one of ``SAMPLE`` (draw from the posterior
    using ``rng``), ``ARGMAX`` (ties to 0), ``FIXED`` (take ``fixed[j]``) or
    ``SHARED`` (compare ``shared_uniforms[j]`` with the prior-only posterior
    of bit 1, computed from ``prior_weights``).

    Returns the decided ``u`` and the exact posteriors ``(p0, p1)`` of every
    ``u_j`` given the observation and ``u_1..u_{j-1}``.
    """
    llr = _weights_to_llr(weights)
    n = llr.shape[0]
    uniforms = rng.random(n) if rng is not None else None
    res = sc_llr(llr, policy,
                 llr_prior=None if prior_weights is None else _weights_to_llr(prior_weights),
                 fixed=fixed, uniforms=uniforms, shared_uniforms=shared_uniforms)
    return res.u, res.posteriors


def shared_uniforms(shared_seed: int, k: int, level: int, n: int) -> np.ndarray:
    """The uniform variates both endpoints use for frozen bits of (round, level)."""
    return np.random.default_rng([int(shared_seed), int(k), int(level)]).random(n)


def shared_frozen_bit(shared_seed: int, k: int, level: int, j: int, prior_posterior, n: int) -> int:
    """Frozen bit ``j``: 1 iff the shared variate falls below ``P(1 | prefix)``."""
    p0, p1 = prior_posterior
    return int(shared_uniforms(shared_seed, k, level, n)[j] < p1)


@dataclass(frozen=True)
class CodeSets:
    """Index classes of one part, as ``ell x n`` boolean masks."""

    f1: np.ndarray
    i2: np.ndarray

    def __post_init__(self):
        f1 = np.asarray(self.f1, dtype=bool)
        i2 = np.asarray(self.i2, dtype=bool)
        if f1.shape != i2.shape or f1.ndim != 2:
            raise InvalidArgumentError("f1 and i2 must be equal-shape ell x n masks")
        if np.any(f1 & i2):
            raise InvalidArgumentError("an index cannot be both frozen and MAP-decoded")
        f1.setflags(write=False)
        i2.setflags(write=False)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "i2", i2)

    @property
    def ell(self) -> int:
        return self.f1.shape[0]

    @property
    def n(self) -> int:
        return self.f1.shape[1]

    @property
    def f2(self) -> np.ndarray:
        return ~self.i2

    @property
    def i1(self) -> np.ndarray:
        return ~self.f1

    @property
    def df(self) -> np.ndarray:
        return self.f2 & ~self.f1

    @property
    def payload_bits(self) -> int:
        return int(self.df.sum())


def _residues(planes: np.ndarray, level: int) -> np.ndarray:
    """Integer value of planes ``1..level-1`` (``level`` is 1-based)."""
    if level == 1:
        return np.zeros(planes.shape[1], dtype=np.int64)
    w = (1 << np.arange(level - 1, dtype=np.int64))[:, None]
    return (planes[: level - 1].astype(np.int64) * w).sum(axis=0)


@dataclass(frozen=True)
class PartChannel:
    """Statistics of one coded part: its prior and the two observation noises."""

    lattice: Lattice1D
    ell: int
    part_var: float
    noise_var: float


def code_part(obs: np.ndarray, channel: PartChannel, policies: np.ndarray, *,
              fixed: np.ndarray | None = None, shared_seed: int, round_tag: int,
              rng: np.random.Generator | None = None, trace: list | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
    """Run the multilevel SC chain over all planes of one part.

    ``policies`` and ``fixed`` are ``ell x n``.  Returns ``(u, x)``: the
    transform-domain bits and the bit-planes of the coded lattice vector.
    The per-level :class:`SCResult` objects are appended to ``trace`` if given.
    """
    ell, n = policies.shape
    u = np.zeros((ell, n), np.uint8)
    x = np.zeros((ell, n), np.uint8)
    for i in range(1, ell + 1):
        res = _residues(x, i)
        llr = level_llrs(res, i, channel.lattice, channel.part_var, obs, channel.noise_var)
        llr_p = level_llrs(res, i, channel.lattice, channel.part_var)
        pol = policies[i - 1]
        out = sc_llr(
            llr, pol, llr_prior=llr_p,
            fixed=None if fixed is None else fixed[i - 1],
            uniforms=rng.random(n) if np.any(pol == SAMPLE) else None,
            shared_uniforms=shared_uniforms(shared_seed, round_tag, i, n) if np.any(pol == SHARED) else None,
        )
        u[i - 1] = out.u
        x[i - 1] = out.x
        if trace is not None:
            trace.append(out)
    return u, x


def covering_encode(x_k: np.ndarray, sets: CodeSets, channel: PartChannel, shared_seed: int,
                    round_tag: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Randomized-MAP quantization of ``x_k`` to a lattice part.

    Returns ``(u, planes, sent)`` where ``sent`` lists the bits at ``df``,
    levels ascending and indices ascending within a level.
    """
    x_k = np.asarray(x_k, dtype=float)
    if x_k.shape != (sets.n,):
        raise InvalidArgumentError("encoder input length must equal the block length")
    policies = np.where(sets.f1, SHARED, SAMPLE).astype(np.int8)
    u, planes = code_part(x_k, channel, policies, shared_seed=shared_seed, round_tag=round_tag, rng=rng)
    return u, planes, u[sets.df]


def packing_decode(y_k: np.ndarray, sets: CodeSets, channel: PartChannel, received: np.ndarray,
                   shared_seed: int, round_tag: int, known: np.ndarray | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """MAP recovery of a part from ``y_k`` and the received bits.

    ``known`` (default ``sets.df``) marks the indices whose bits arrive in
    ``received``, in level-then-index order.  Returns ``(u, planes)``.
    """
    y_k = np.asarray(y_k, dtype=float)
    known = sets.df if known is None else known
    received = np.asarray(received, dtype=np.uint8).ravel()
    if received.size != int(known.sum()):
        raise ProtocolViolationError(
            f"expected {int(known.sum())} payload bits, received {received.size}")
    if y_k.shape != (sets.n,):
        raise InvalidArgumentError("decoder input length must equal the block length")
    policies = np.full(sets.f1.shape, ARGMAX, np.int8)
    policies[sets.f1] = SHARED
    policies[known] = FIXED
    fixed = np.zeros(sets.f1.shape, np.uint8)
    fixed[known] = received
    return code_part(y_k, channel, policies, fixed=fixed, shared_seed=shared_seed, round_tag=round_tag)
