"""Experiment configuration, code cache, and the run / sweep / verify commands.

Config files are YAML (JSON is valid YAML) with flat keys matching the
fields of :class:`ExperimentConfig`.  The code cache is a JSON document with
one record per (round, level); index sets are stored as base64 bitsets and
Bhattacharyya estimates as base64 float64 arrays.

CSV columns of ``run`` (one row per trial), in order::

    sigma_z2, trial, tau, rate_bits_per_sample, feedback_bits, mse_per_sample, success, seed
"""
from __future__ import annotations

import base64
import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .construction import Codebook, ConstructionConfig, RoundCode, build_codebook
from .errors import CacheMissError, InvalidParameterError
from .hashtest import choose_hash_params
from .model import GuessSchedule, SourceParams, make_schedule
from .polar import CodeSets
from .protocol import SessionSeeds, run_session

log = logging.getLogger(__name__)

CACHE_VERSION = 1
CSV_COLUMNS = ("sigma_z2", "trial", "tau", "rate_bits_per_sample", "feedback_bits",
               "mse_per_sample", "success", "seed")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# ------------------------------------------------------------------ config

@dataclass
class ExperimentConfig:
    n: int = 4096
    ell: int | None = None            # None: derived from the largest part variance
    sigma0_2: float = 2.0             # schedule: lower end, upper end, spacing
    sigmar_2: float = 8.0
    omega: float = 0.5
    schedule: list | None = None      # explicit guesses, overrides the three above
    sigma_x2: float = 16.0
    delta: float = 1.0
    sigma_z2: list = field(default_factory=lambda: [2.2])
    hash_m: int | None = None         # None: ceil(16 log2 n)
    mc_samples: int = 2000
    z_low: float = 0.05
    z_high: float = 0.95
    prior_gate: bool = True
    redecode: bool = True
    trials: int = 200
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.sigma_z2, (int, float)):
            self.sigma_z2 = [float(self.sigma_z2)]
        self.sigma_z2 = [float(v) for v in self.sigma_z2]
        try:
            if self.n < 2 or self.n & (self.n - 1):
                raise ConfigError(f"n must be a power of two >= 2, got {self.n}")
            if self.trials < 0 or self.threads < 1:
                raise ConfigError("trials must be >= 0 and threads >= 1")
            if self.hash_m is not None and self.hash_m < 1:
                raise ConfigError("hash_m must be >= 1")
            if self.ell is not None and self.ell < 1:
                raise ConfigError("ell must be >= 1")
            src = SourceParams(self.sigma_x2, 0.0, self.delta)
            self.guess_schedule.validate(src)
            self.construction
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def guess_schedule(self) -> GuessSchedule:
        if self.schedule is not None:
            return GuessSchedule(tuple(self.schedule))
        return make_schedule(self.sigma0_2, self.sigmar_2, self.omega)

    @property
    def construction(self) -> ConstructionConfig:
        return ConstructionConfig(self.mc_samples, self.z_low, self.z_high, self.prior_gate)

    @property
    def m(self) -> int:
        return self.hash_m if self.hash_m is not None else math.ceil(16 * math.log2(self.n))

    def source(self, sigma_z2: float) -> SourceParams:
        return SourceParams(self.sigma_x2, sigma_z2, self.delta)

    def digest(self) -> str:
        """Hash of every field that changes the constructed code."""
        key = {
            "version": CACHE_VERSION, "n": self.n, "ell": self.ell,
            "schedule": list(self.guess_schedule.sigma2), "sigma_x2": self.sigma_x2,
            "delta": self.delta, "mc_samples": self.mc_samples, "z_low": self.z_low,
            "z_high": self.z_high, "prior_gate": self.prior_gate, "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a YAML/JSON config and apply non-``None`` overrides."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping of flat keys")
    data.update({k: v for k, v in overrides.items() if v is not None})
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------- cache

def _pack_mask(mask: np.ndarray) -> str:
    return base64.b64encode(np.packbits(np.asarray(mask, bool)).tobytes()).decode()


def _unpack_mask(text: str, n: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(base64.b64decode(text), np.uint8))[:n].astype(bool)


def _pack_floats(z: np.ndarray) -> str:
    return base64.b64encode(np.asarray(z, "<f8").tobytes()).decode()


def _unpack_floats(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), "<f8").copy()


def codebook_to_dict(code: Codebook, digest: str) -> dict:
    records = []
    for rc in code.rounds:
        for lv in range(code.ell):
            rec = {
                "round": rc.k, "level": lv + 1,
                "f1": _pack_mask(rc.sets.f1[lv]), "i2": _pack_mask(rc.sets.i2[lv]),
                "z_prior": _pack_floats(rc.z_prior[lv]), "z_x": _pack_floats(rc.z_x[lv]),
                "z_y": _pack_floats(rc.z_y[lv]),
                "redecode": {str(p): _pack_mask(m[lv]) for p, m in sorted(rc.redecode.items())},
                "redecode_z_y": {str(p): _pack_floats(z[lv]) for p, z in sorted(rc.redecode_z.items())},
            }
            records.append(rec)
    return {
        "format": "polarwz-code-cache", "version": CACHE_VERSION, "digest": digest,
        "n": code.n, "ell": code.ell, "schedule": list(code.sched.sigma2), "sigma_x2": code.sigma_x2,
        "delta": code.delta, "seed": code.seed, "construction": dataclasses.asdict(code.cfg),
        "records": records,
    }


def codebook_from_dict(doc: dict) -> Codebook:
    if doc.get("format") != "polarwz-code-cache" or doc.get("version") != CACHE_VERSION:
        raise CacheMissError("not a code cache of a supported version")
    n, ell = doc["n"], doc["ell"]
    sched = GuessSchedule(tuple(doc["schedule"]))
    by_round = {}
    for rec in doc["records"]:
        by_round.setdefault(rec["round"], {})[rec["level"]] = rec
    rounds = []
    for k in range(1, sched.r + 1):
        recs = [by_round[k][lv] for lv in range(1, ell + 1)]

        def stack(key, recs=recs):
            return np.stack([_unpack_mask(r[key], n) for r in recs])

        def fstack(key, recs=recs):
            return np.stack([_unpack_floats(r[key]) for r in recs])

        parts = sorted(int(p) for p in recs[0]["redecode"])
        redecode = {p: np.stack([_unpack_mask(r["redecode"][str(p)], n) for r in recs]) for p in parts}
        redecode_z = {p: np.stack([_unpack_floats(r["redecode_z_y"][str(p)]) for r in recs]) for p in parts}
        rounds.append(RoundCode(k, CodeSets(stack("f1"), stack("i2")), redecode,
                                fstack("z_prior"), fstack("z_x"), fstack("z_y"), redecode_z))
    return Codebook(n, ell, sched, doc["sigma_x2"], doc["delta"],
                    ConstructionConfig(**doc["construction"]), doc["seed"], rounds)


def write_cache(code: Codebook, digest: str, path) -> None:
    text = json.dumps(codebook_to_dict(code, digest), sort_keys=True, indent=1)
    Path(path).write_text(text + "\n")


def read_cache(path, cfg: ExperimentConfig | None = None) -> Codebook:
    """Load a cache; with ``cfg`` the stored digest must match the config's."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise CacheMissError(f"cannot read code cache {path}: {exc}; run `polarwz construct` first") from exc
    if cfg is not None and doc.get("digest") != cfg.digest():
        raise CacheMissError(
            f"code cache {path} was built for a different configuration; "
            f"run `polarwz construct --config <file> --out {path}` first")
    return codebook_from_dict(doc)


# ---------------------------------------------------------------- commands

def cmd_construct(cfg: ExperimentConfig, out) -> Codebook:
    """Build the code for ``cfg`` and write it to ``out`` (skipped if already current)."""
    out = Path(out)
    if out.exists():
        try:
            code = read_cache(out, cfg)
            log.info("cache %s is current", out)
            return code
        except CacheMissError:
            pass
    t0 = time.perf_counter()
    code = build_codebook(cfg.n, cfg.guess_schedule, cfg.sigma_x2, cfg.delta, cfg.construction,
                          cfg.seed, cfg.ell)
    log.info("constructed %d rounds x %d levels in %.1f s", code.r, code.ell, time.perf_counter() - t0)
    write_cache(code, cfg.digest(), out)
    return code


@dataclass(frozen=True)
class TrialResult:
    sigma_z2: float
    trial: int
    tau: int
    rate_bits_per_sample: float
    feedback_bits: int
    mse_per_sample: float
    success: bool
    seed: int
    wall_time: float

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _one_trial(args) -> TrialResult:
    code, cfg, sigma_z2, trial = args
    seeds = SessionSeeds.from_master(cfg.seed, trial)
    hp = choose_hash_params(cfg.n, cfg.delta, cfg.sigma_x2, cfg.m)
    t0 = time.perf_counter()
    tr = run_session(cfg.source(sigma_z2), code, hp, seeds, redecode=cfg.redecode)
    return TrialResult(sigma_z2, trial, tr.tau, tr.total_rate, tr.feedback_bits, tr.mse, tr.success,
                       seeds.source, time.perf_counter() - t0)


def run_trials(code: Codebook, cfg: ExperimentConfig, sigma_z2: float) -> list:
    jobs = [(code, cfg, sigma_z2, t) for t in range(cfg.trials)]
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.threads) as pool:
            return list(pool.map(_one_trial, jobs))
    return [_one_trial(j) for j in jobs]


def summarize(results: list) -> dict:
    if not results:
        return {"trials": 0}
    rate = np.array([r.rate_bits_per_sample for r in results])
    mse = np.array([r.mse_per_sample for r in results])
    ok = np.array([r.success for r in results])
    return {
        "trials": len(results),
        "mean_tau": float(np.mean([r.tau for r in results])),
        "mean_rate": float(rate.mean()),
        "rate_quantiles": [float(v) for v in np.quantile(rate, [0.1, 0.5, 0.9])],
        "mean_mse": float(mse.mean()),
        "mean_mse_successful": float(mse[ok].mean()) if ok.any() else None,
        "mse_quantiles": [float(v) for v in np.quantile(mse, [0.1, 0.5, 0.9])],
        "success_fraction": float(ok.mean()),
    }


def write_trials_csv(results: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow(r.row())


def cmd_run(cfg: ExperimentConfig, cache, out) -> list:
    """Run ``cfg.trials`` sessions per configured ``sigma_z2``; CSV plus a JSON summary."""
    code = read_cache(cache, cfg)
    results = []
    for sz2 in cfg.sigma_z2:
        results += run_trials(code, cfg, sz2)
    write_trials_csv(results, out)
    summary = {str(sz2): summarize([r for r in results if r.sigma_z2 == sz2]) for sz2 in cfg.sigma_z2}
    Path(out).with_suffix(".summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return results


SWEEP_COLUMNS = ("sigma_z2", "trials", "mean_tau", "mean_rate", "target_rate", "mean_mse",
                 "success_fraction")


def cmd_sweep(cfg: ExperimentConfig, cache, out, plot=None) -> list:
    """One aggregate row per ``sigma_z2``; optional rate plot."""
    code = read_cache(cache, cfg)
    lo, hi = code.sched.sigma2[0], code.sched.sigma2[-1]
    rows = []
    for sz2 in cfg.sigma_z2:
        if not lo <= sz2 <= hi:
            warnings.warn(f"sigma_z2={sz2} lies outside the schedule interval [{lo}, {hi}]", stacklevel=2)
        s = summarize(run_trials(code, cfg, sz2))
        rows.append({
            "sigma_z2": sz2, "trials": s["trials"], "mean_tau": s.get("mean_tau", math.nan),
            "mean_rate": s.get("mean_rate", math.nan),
            "target_rate": 0.5 * math.log2(sz2 / cfg.delta) if sz2 > 0 else math.nan,
            "mean_mse": s.get("mean_mse", math.nan), "success_fraction": s.get("success_fraction", math.nan),
        })
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    if plot is not None:
        plot_sweep(rows, plot, omega=code.sched.omega)
    return rows


def plot_sweep(rows: list, path, omega: float = 0.0) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    target = np.array([r["target_rate"] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(target, [r["mean_rate"] for r in rows], "o-", label="measured rate")
    ax.plot(target, target, "k--", label="rate-distortion bound")
    ax.plot(target, target + omega, "k:", label="bound + omega")
    ax.set_xlabel("(1/2) log2(sigma_z2 / Delta)  [bits/sample]")
    ax.set_ylabel("total rate  [bits/sample]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
