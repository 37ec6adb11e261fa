"""Monte-Carlo Bhattacharyya estimates and code-set construction.

Every index of every plane gets three reliability estimates:

* ``prior``: no observation, only the lower planes and earlier bits;
* ``x``:     observation through the encoder noise;
* ``y``:     observation through encoder noise plus side-information noise,
  once for each guess under which the part may be decoded.

Estimates are genie-aided: the true bits are fed back instead of decisions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .lattice import DiscreteGaussianSpec, Lattice1D, dg_sample_int, level_llrs
from .model import GuessSchedule, SourceParams, round_params, zprime_variance
from .polar import CodeSets, transform

_CHUNK = 125
# LLRs below this magnitude everywhere mean the plane is uniform noise
_FLAT_LLR = 1e-12


@dataclass(frozen=True)
class ConstructionConfig:
    mc_samples: int = 2000
    z_low: float = 0.05
    z_high: float = 0.95
    # require a uniform prior for MAP-decoded indices; False keeps only the
    # reliability test, which moves fewer bits into the payload
    prior_gate: bool = True

    def __post_init__(self):
        if self.mc_samples < 1:
            raise InvalidParameterError("mc_samples must be >= 1")
        if not 0 <= self.z_low < self.z_high <= 1:
            raise InvalidParameterError("need 0 <= z_low < z_high <= 1")

    def low(self, z: np.ndarray) -> np.ndarray:
        # z_low = 0 disables the test
        return (z <= self.z_low) if self.z_low > 0 else np.zeros(z.shape, bool)

    def high(self, z: np.ndarray) -> np.ndarray:
        # z_high = 1 disables the test
        return (z >= self.z_high) if self.z_high < 1 else np.zeros(z.shape, bool)


@dataclass(frozen=True)
class PartContext:
    """What the construction needs to know about one part."""

    lattice: Lattice1D
    ell: int
    n: int
    part_var: float
    encoder_noise: float
    decoder_noises: tuple = ()


@dataclass
class PartEstimates:
    z_prior: np.ndarray          # (ell, n)
    z_x: np.ndarray              # (ell, n)
    z_y: np.ndarray              # (len(decoder_noises), ell, n)


def _accumulate(llr: np.ndarray, ubits: np.ndarray, zsum: np.ndarray) -> None:
    if np.all(np.abs(llr) < _FLAT_LLR):
        zsum += llr.shape[0]
        return
    _kernels.genie_z_accumulate(np.ascontiguousarray(llr), ubits, zsum)


def estimate_part(ctx: PartContext, mc_samples: int, rng: np.random.Generator) -> PartEstimates:
    """Bhattacharyya estimates for every plane and conditioning of a part."""
    if mc_samples < 1:
        raise InvalidParameterError("mc_samples must be >= 1")
    ell, n = ctx.ell, ctx.n
    spec = DiscreteGaussianSpec(ctx.lattice, math.sqrt(ctx.part_var))
    s = ctx.lattice.scale
    zp = np.zeros((ell, n))
    zx = np.zeros((ell, n))
    zy = np.zeros((len(ctx.decoder_noises), ell, n))
    sd_x = math.sqrt(ctx.encoder_noise)
    extra = [math.sqrt(v - ctx.encoder_noise) for v in ctx.decoder_noises]
    done = 0
    while done < mc_samples:
        m = min(_CHUNK, mc_samples - done)
        lam_int = dg_sample_int(spec, (m, n), rng)
        obs_x = lam_int * s + sd_x * rng.standard_normal((m, n))
        obs_y = [obs_x + e * rng.standard_normal((m, n)) for e in extra]
        resid = np.mod(lam_int, 1 << ell)
        for i in range(1, ell + 1):
            low = resid & ((1 << (i - 1)) - 1)
            xbits = ((resid >> (i - 1)) & 1).astype(np.uint8)
            ubits = transform(xbits)
            table = level_llrs(np.arange(1 << (i - 1)), i, ctx.lattice, ctx.part_var)
            _accumulate(table[low], ubits, zp[i - 1])
            _accumulate(level_llrs(low, i, ctx.lattice, ctx.part_var, obs_x, ctx.encoder_noise),
                        ubits, zx[i - 1])
            for g, (obs, v) in enumerate(zip(obs_y, ctx.decoder_noises)):
                _accumulate(level_llrs(low, i, ctx.lattice, ctx.part_var, obs, v), ubits, zy[g, i - 1])
        done += m
    scale = 1.0 / mc_samples
    return PartEstimates(np.clip(zp * scale, 0, 1), np.clip(zx * scale, 0, 1), np.clip(zy * scale, 0, 1))


def estimate_bhattacharyya(channel, n: int, cfg: ConstructionConfig, rng: np.random.Generator) -> np.ndarray:
    """Genie-aided estimate of ``Z`` for each of the ``n`` synthesized channels.

    ``channel(rng, m)`` must return ``(xbits, llr)``: ``m x n`` coded bits and
    the per-coordinate channel LLRs observed for them.
    """
    zsum = np.zeros(n)
    done = 0
    while done < cfg.mc_samples:
        m = min(_CHUNK, cfg.mc_samples - done)
        xbits, llr = channel(rng, m)
        _accumulate(np.asarray(llr, dtype=float), transform(xbits), zsum)
        done += m
    return np.clip(zsum / cfg.mc_samples, 0.0, 1.0)


def level_channel(ctx: PartContext, level: int, conditioning: str, guess: int = 0):
    """Sampler for :func:`estimate_bhattacharyya` on one plane of a part.

    ``conditioning`` is ``"prior"``, ``"x"`` or ``"y"``; for ``"y"`` the
    decoder noise ``ctx.decoder_noises[guess]`` is used.
    """
    if conditioning not in ("prior", "x", "y"):
        raise InvalidParameterError(f"unknown conditioning {conditioning!r}")
    spec = DiscreteGaussianSpec(ctx.lattice, math.sqrt(ctx.part_var))

    def sample(rng, m):
        lam_int = dg_sample_int(spec, (m, ctx.n), rng)
        resid = np.mod(lam_int, 1 << ctx.ell)
        low = resid & ((1 << (level - 1)) - 1)
        xbits = ((resid >> (level - 1)) & 1).astype(np.uint8)
        if conditioning == "prior":
            return xbits, level_llrs(low, level, ctx.lattice, ctx.part_var)
        noise = ctx.encoder_noise if conditioning == "x" else ctx.decoder_noises[guess]
        obs = lam_int * ctx.lattice.scale + math.sqrt(noise) * rng.standard_normal(lam_int.shape)
        return xbits, level_llrs(low, level, ctx.lattice, ctx.part_var, obs, noise)

    return sample


def sets_from_estimates(est: PartEstimates, cfg: ConstructionConfig, guess: int = 0,
                        within: np.ndarray | None = None) -> CodeSets:
    """Apply the two-threshold rule.

    ``f1``: unreliable given x, or already determined by the prior.
    ``i2``: reliable given y and, if ``cfg.prior_gate``, uniform under the
    prior; never in ``f1`` and,
    when ``within`` is given, restricted to it so decoder sets stay nested
    across guesses.
    """
    f1 = cfg.high(est.z_x) | cfg.low(est.z_prior)
    i2 = cfg.low(est.z_y[guess]) & ~f1
    if cfg.prior_gate:
        i2 &= cfg.high(est.z_prior)
    if within is not None:
        i2 &= within
    return CodeSets(f1, i2)


def construct_sets(k: int, ell: int, cfg: ConstructionConfig, sched: GuessSchedule,
                   src: SourceParams, n: int, rng: np.random.Generator) -> CodeSets:
    """Code sets for the part sent in round ``k``, decoded at guess ``k``."""
    rp = round_params(k, sched, src)
    ctx = PartContext(Lattice1D.for_blocklength(n), ell, n, rp.var_part, rp.encoder_noise,
                      (rp.decoder_noise,))
    return sets_from_estimates(estimate_part(ctx, cfg.mc_samples, rng), cfg)


@dataclass
class RoundCode:
    """Everything both endpoints need for round ``k``.

    ``sets`` covers the new part.  ``redecode[p]`` is the ``i2`` mask used at
    this round's guess for the earlier part ``p`` (0-based, sent in round
    ``p + 1``).
    """

    k: int
    sets: CodeSets
    redecode: dict = field(default_factory=dict)
    z_prior: np.ndarray | None = None
    z_x: np.ndarray | None = None
    z_y: np.ndarray | None = None
    redecode_z: dict = field(default_factory=dict)


@dataclass
class Codebook:
    n: int
    ell: int
    sched: GuessSchedule
    sigma_x2: float
    delta: float
    cfg: ConstructionConfig
    seed: int
    rounds: list  # RoundCode for k = 1..r, index k-1

    @property
    def lattice(self) -> Lattice1D:
        return Lattice1D.for_blocklength(self.n)

    @property
    def r(self) -> int:
        return len(self.rounds)

    def round(self, k: int) -> RoundCode:
        return self.rounds[k - 1]

    def f1(self, part: int) -> np.ndarray:
        return self.rounds[part].sets.f1

    def i2(self, part: int, k: int) -> np.ndarray:
        """Decoder MAP mask for ``part`` when decoding at guess ``k``."""
        rc = self.round(k)
        return rc.sets.i2 if part == k - 1 else rc.redecode[part]

    def refresh_mask(self, part: int, k: int) -> np.ndarray:
        """Bits of an earlier part that round ``k`` must add."""
        return self.i2(part, k - 1) & ~self.i2(part, k)

    def known_mask(self, part: int, k: int) -> np.ndarray:
        return ~self.i2(part, k) & ~self.f1(part)


def default_ell(n: int, sched: GuessSchedule, src: SourceParams) -> int:
    from .lattice import choose_levels
    top = max(round_params(k, sched, src).var_part for k in range(1, sched.r + 1))
    return choose_levels(Lattice1D.for_blocklength(n), math.sqrt(top))


def build_codebook(n: int, sched: GuessSchedule, sigma_x2: float, delta: float,
                   cfg: ConstructionConfig, seed: int, ell: int | None = None) -> Codebook:
    """Construct sets for every round, including re-decoding masks.

    Part ``p`` is estimated once, with decoder noises for every guess
    ``k >= p + 1``; the decoder mask at guess ``k`` is intersected with the
    one at guess ``k - 1``.
    """
    src = SourceParams(sigma_x2, 0.0, delta)
    sched.validate(src)
    if sched.r < 1:
        raise InvalidParameterError("schedule needs at least one round")
    lattice = Lattice1D.for_blocklength(n)
    ell = default_ell(n, sched, src) if ell is None else ell
    rounds = []
    later_masks = {}  # (later round, part) -> (i2 mask, z_y)
    for k in range(1, sched.r + 1):
        rp = round_params(k, sched, src)
        noises = tuple(rp.var_t + zprime_variance(sched.sigma2[g], sigma_x2) for g in range(k, sched.r + 1))
        ctx = PartContext(lattice, ell, n, rp.var_part, rp.encoder_noise, noises)
        est = estimate_part(ctx, cfg.mc_samples, np.random.default_rng([seed, k]))
        sets = sets_from_estimates(est, cfg)
        rounds.append(RoundCode(k, sets, z_prior=est.z_prior, z_x=est.z_x, z_y=est.z_y[0]))
        prev = sets.i2
        for g in range(1, len(noises)):
            prev = sets_from_estimates(est, cfg, guess=g, within=prev).i2
            later_masks[(k + g, k - 1)] = (prev, est.z_y[g])
    for (later, part), (mask, z) in later_masks.items():
        rounds[later - 1].redecode[part] = mask
        rounds[later - 1].redecode_z[part] = z
    return Codebook(n, ell, sched, sigma_x2, delta, cfg, seed, rounds)
