"""
One session, round by round
===========================

Drives the encoder and decoder by hand for a single block, printing what
crosses the link at each step.  Pass a config path to use a different code
(default: the small N = 256 code, built on first use).
"""
import sys
from pathlib import Path

import numpy as np

from polarwz.harness import cmd_construct, load_config
from polarwz.hashtest import Feedback, choose_hash_params, make_hash, projection_matrix
from polarwz.model import sample_source
from polarwz.protocol import (Round0Hash, decoder_round, encoder_round, initial_decoder_state,
                              initial_encoder_state)

here = Path(__file__).parent
config = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "configs" / "smoke.yaml"
cfg = load_config(config)
(here / "_cache").mkdir(exist_ok=True)
code = cmd_construct(cfg, here / "_cache" / f"{config.stem}.json")

# %%
# The true side-information noise is the largest value in the config; the
# encoder never sees it.
sigma_z2 = max(cfg.sigma_z2)
x, y = sample_source(cfg.n, cfg.source(sigma_z2), seed=11)
print(f"N={cfg.n}, guesses {code.sched.sigma2[1:]}, true sigma_z2={sigma_z2}")

# %%
# Round 0: the hash of x.
hp = choose_hash_params(cfg.n, cfg.delta, cfg.sigma_x2, cfg.m)
R = projection_matrix(hp, cfg.n)
hmsg = Round0Hash(make_hash(x, hp, R), hp)
print(f"round 0: hash of m={hp.m} entries, q={hp.q} levels, {hp.bits} bits")

# %%
# Rounds 1..r: one new lattice part per round until the decoder is satisfied.
enc, dec = initial_encoder_state(x), initial_decoder_state(y)
rng = np.random.default_rng(12)
sent = hp.bits
for k in range(1, code.r + 1):
    msg, enc = encoder_round(enc, code, shared_seed=13, rng=rng)
    reply, dec = decoder_round(dec, code, msg, 13, hmsg, R)
    sent += msg.bits
    mse = np.mean((x - dec.x_hat) ** 2)
    print(f"round {k}: {msg.bits} payload bits, auxiliaries equal: {np.allclose(enc.a, dec.a_hat)}, "
          f"mse/N {mse:.3f}, reply {reply.flag.value}")
    if reply.flag is Feedback.ACK:
        break
print(f"total forward rate {sent / cfg.n:.3f} bits/sample, "
      f"bound (1/2)log2(sigma_z2/Delta) = {0.5 * np.log2(sigma_z2 / cfg.delta):.3f}")
