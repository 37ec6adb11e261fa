"""Oracle checks run by ``polarwz verify`` and by the test suite.

Each suite returns a list of :class:`Check` records.  Oracles are computed
independently of the code under test: exhaustive enumeration for SC,
exact pmf tables for the sampler, covariance algebra for the Gaussian
identities, and exact-law Monte Carlo for the closeness test.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .hashtest import log10_error_rate, simulate_test
from .lattice import DiscreteGaussianSpec, Lattice1D, dg_sample_int
from .model import (GuessSchedule, SourceParams, mi_decomposition, mmse_gain, residual_variance,
                    round_params, zprime_variance)
from .polar import ARGMAX, PartChannel, code_part, transform


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.suite}: {self.name}  {self.detail}".rstrip()


# ---------------------------------------------------------------- SC oracle

def residue_weights(obs: np.ndarray, lattice: Lattice1D, prior_var: float, noise_var: float,
                    ell: int, reach: int = 400) -> np.ndarray:
    """Joint weight of each residue mod ``2**ell`` with each observation, by direct summation."""
    m = np.arange(-reach, reach + 1)
    lam = m * lattice.scale
    logp = -(lam**2) / (2 * prior_var) - (obs[:, None] - lam[None, :]) ** 2 / (2 * noise_var)
    w = np.exp(logp - logp.max(axis=1, keepdims=True))
    out = np.zeros((len(obs), 1 << ell))
    np.add.at(out, (slice(None), np.mod(m, 1 << ell)), w)
    return out


@functools.lru_cache(maxsize=4)
def _enumeration(ell: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Every transform-domain configuration and the residue it maps to at each index."""
    total = ell * n
    codes = np.arange(1 << total, dtype=np.int64)
    u = ((codes[:, None] >> np.arange(total)) & 1).astype(np.uint8).reshape(-1, ell, n)
    x = transform(u)
    res = (x.astype(np.int64) * (1 << np.arange(ell))[None, :, None]).sum(axis=1)
    return u, res


def brute_force_conditionals(W: np.ndarray, path: np.ndarray) -> np.ndarray:
    """``P(u_i(j) = 1 | every earlier decision of path)`` by full enumeration.

    ``W`` is ``n x 2**ell`` residue weights, ``path`` the ``ell x n`` decided
    transform-domain bits.  Decisions run level by level, index ascending.
    """
    ell, n = path.shape
    u, res = _enumeration(ell, n)
    prob = np.prod(W[np.arange(n)[None, :], res], axis=1)
    keep = np.ones(len(u), dtype=bool)
    p1 = np.empty((ell, n))
    for i in range(ell):
        for j in range(n):
            mass = prob[keep].sum()
            one = prob[keep & (u[:, i, j] == 1)].sum()
            p1[i, j] = one / mass
            keep &= u[:, i, j] == path[i, j]
    return p1


def sc_oracle_checks(shapes, trials: int = 100, seed: int = 0) -> list:
    """Multilevel SC posteriors against enumeration for every ``(n, ell)`` in ``shapes``."""
    rng = np.random.default_rng(seed)
    lattice = Lattice1D(2)
    out = []
    for n, ell in shapes:
        worst = 0.0
        for _ in range(trials):
            prior_var = rng.uniform(0.2, 2.0)
            noise_var = rng.uniform(0.05, 1.0)
            obs = rng.normal(0.0, math.sqrt(prior_var + noise_var), n)
            trace = []
            u, _ = code_part(obs, PartChannel(lattice, ell, prior_var, noise_var),
                             np.full((ell, n), ARGMAX, np.int8), shared_seed=0, round_tag=0, trace=trace)
            got = np.stack([t.posteriors[:, 1] for t in trace])
            ref = brute_force_conditionals(residue_weights(obs, lattice, prior_var, noise_var, ell), u)
            worst = max(worst, float(np.max(np.abs(got - ref))))
        out.append(Check("sc-oracle", f"N={n} ell={ell}", worst <= 1e-9, f"max err {worst:.2e}"))
    return out


def oracle_shapes(max_product: int = 16, max_n: int | None = None) -> list:
    shapes = []
    n = 1
    while n <= max_product:
        if max_n is None or n <= max_n:
            shapes += [(n, ell) for ell in range(1, max_product // n + 1)]
        n *= 2
    return shapes


# ------------------------------------------------------------- DG sampler

def tv_noise_floor(p: np.ndarray, samples: int) -> float:
    """Expected TV between a pmf and the histogram of ``samples`` exact draws (normal approximation)."""
    return 0.5 * float(np.sum(np.sqrt(2.0 * p * (1.0 - p) / (math.pi * samples))))


# (t, sigma) pairs whose sampling noise floor stays well below the 0.01 budget
DG_GRID = ((2, 0.5), (2, 1.0), (2, 2.0), (4, 0.5), (4, 1.0), (4, 2.0), (12, 0.25), (12, 0.5))


def dg_checks(samples: int = 100_000, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for t, sigma in DG_GRID:
        lat = Lattice1D(t)
        spec = DiscreteGaussianSpec(lat, sigma)
        support, p = spec.pmf_table()
        # oracle pmf straight from the density, normalized in extended precision
        lam = support.astype(np.longdouble) * np.longdouble(lat.scale)
        w = np.exp(-(lam**2) / (2 * np.longdouble(sigma) ** 2))
        ref = w / w.sum()
        norm_err = abs(float(np.sum(p)) - 1.0)
        draws = dg_sample_int(spec, samples, rng)
        counts = np.bincount(draws - support[0], minlength=len(support))
        tv = 0.5 * float(np.abs(counts / samples - ref.astype(float)).sum())
        pmf_err = float(np.max(np.abs(p - ref.astype(float))))
        floor = tv_noise_floor(ref.astype(float), samples)
        ok = tv <= 0.01 and norm_err <= 1e-12 and pmf_err <= 1e-12
        out.append(Check("dg-sampler", f"t={t} sigma={sigma}", ok,
                         f"TV {tv:.4f} (exact-sampler floor {floor:.4f}) "
                         f"norm err {norm_err:.1e} pmf err {pmf_err:.1e}"))
    return out


# ------------------------------------------------------ Gaussian identities

def random_setup(rng: np.random.Generator) -> tuple[SourceParams, GuessSchedule]:
    """A valid source and schedule with 1 to 5 rounds."""
    delta = rng.uniform(0.05, 2.0)
    sigma_x2 = delta * rng.uniform(3.0, 40.0)
    r = int(rng.integers(1, 6))
    pts = np.sort(rng.uniform(delta, sigma_x2, r + 1))
    pts = np.maximum(pts, delta * (1 + 1e-3))
    if np.any(np.diff(pts) <= 0) or pts[-1] >= sigma_x2:
        return random_setup(rng)
    return SourceParams(sigma_x2, 0.0, delta), GuessSchedule(tuple(pts))


def covariance_gain(k: int, sched: GuessSchedule, src: SourceParams) -> float:
    """Weight on ``Ybar`` in ``E[X | A_k, Ybar]`` from the joint covariance."""
    r = sched.r
    parts = [round_params(j, sched, src).var_part for j in range(1, r + 1)]
    cov = np.diag(parts + [residual_variance(r, sched, src), zprime_variance(sched.sigma2[k], src.sigma_x2)])
    x = np.r_[np.ones(r + 1), 0.0]
    a = np.r_[np.ones(k), np.zeros(r + 2 - k)]
    ybar = np.ones(r + 2)
    obs = np.vstack([a, ybar])
    coef = np.linalg.solve(obs @ cov @ obs.T, obs @ cov @ x)
    return float(coef[1])


def identity_checks(draws: int = 1000, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    worst_mi = worst_gain = worst_rate = 0.0
    for _ in range(draws):
        src, sched = random_setup(rng)
        k = int(rng.integers(1, sched.r + 1))
        lhs, rhs = mi_decomposition(k, sched, src)
        worst_mi = max(worst_mi, abs(lhs - rhs))
        worst_rate = max(worst_rate, abs(lhs - 0.5 * math.log2(sched.sigma2[k] / src.delta)))
        g = mmse_gain(src, round_params(k, sched, src))
        worst_gain = max(worst_gain, abs(g - covariance_gain(k, sched, src)))
    return [
        Check("mi-identity", f"{draws} draws, per-part sum", worst_mi <= 1e-9, f"max |lhs-rhs| {worst_mi:.1e}"),
        Check("mi-identity", f"{draws} draws, total rate", worst_rate <= 1e-9,
              f"max |lhs - log2(s_k/D)/2| {worst_rate:.1e}"),
        Check("mmse-identity", f"{draws} draws", worst_gain <= 1e-9, f"max gain err {worst_gain:.1e}"),
    ]


# ---------------------------------------------------------- closeness test

def closeness_checks(trials: int = 10_000, is_samples: int = 2000, seed: int = 0,
                     n: int = 4096, delta: float = 1.0, sigma_x2: float = 4.0) -> list:
    rng = np.random.default_rng(seed)
    h0 = simulate_test(n, delta, sigma_x2, 2048, 1.0, trials, rng)
    h1 = simulate_test(n, delta, sigma_x2, 2048, 8.0, trials, rng)
    false_nack = 1.0 - float(h0.mean())
    false_ack = float(h1.mean())
    out = [
        Check("closeness-test", "false NACK at |x-x_hat|^2 = N*Delta, m=2048", false_nack <= 1e-3,
              f"rate {false_nack:.4f} over {trials}"),
        Check("closeness-test", "false ACK at |x-x_hat|^2 = 8N*Delta, m=2048", false_ack <= 1e-3,
              f"rate {false_ack:.4f} over {trials}"),
    ]
    est = {}
    for m in (288, 2048):
        for d in (1.0, 8.0):
            est[m, d] = log10_error_rate(n, delta, sigma_x2, m, d, is_samples, rng)
    for d, label in ((1.0, "false NACK"), (8.0, "false ACK")):
        ok = est[288, d] > est[2048, d]
        out.append(Check("closeness-test", f"{label} rate falls with m", ok,
                         f"log10 P: m=288 {est[288, d]:.1f}, m=2048 {est[2048, d]:.1f}"))
    return out


SUITES = {
    "sc-oracle": lambda seed: sc_oracle_checks(oracle_shapes(16, max_n=8), seed=seed),
    "dg-sampler": lambda seed: dg_checks(seed=seed),
    "mi-identity": lambda seed: [c for c in identity_checks(seed=seed) if c.suite == "mi-identity"],
    "mmse-identity": lambda seed: [c for c in identity_checks(seed=seed) if c.suite == "mmse-identity"],
    "closeness-test": lambda seed: closeness_checks(seed=seed),
}


def run_suites(names=None, seed: int = 0) -> list:
    names = list(SUITES) if names is None else list(names)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    checks = []
    for name in names:
        checks += SUITES[name](seed)
    return checks
