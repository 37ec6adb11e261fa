"""
What the closeness test costs and buys
======================================

The round-0 hash is pure overhead.  Its size grows like log N while the
payload grows like N; its error rates fall exponentially in m.
"""
import math

import numpy as np

from polarwz.hashtest import choose_hash_params, log10_error_rate, simulate_test

# %%
# Overhead per sample for m = ceil(16 log2 N).
print("N        m    q   bits   bits/sample")
for t in range(10, 21, 2):
    n = 1 << t
    p = choose_hash_params(n, 1.0, 4.0, math.ceil(16 * math.log2(n)))
    print(f"{n:<8d} {p.m:<4d} {p.q:<3d} {p.bits:<6d} {p.bits / n:.4f}")

# %%
# Error rates at N = 4096.  Direct simulation sees no errors at all, so the
# tail is estimated by importance sampling.
rng = np.random.default_rng(0)
n = 4096
for m in (48, 96, 192, 288):
    ok = simulate_test(n, 1.0, 4.0, m, 1.0, 500, rng).mean()
    bad = simulate_test(n, 1.0, 4.0, m, 8.0, 500, rng).mean()
    fn = log10_error_rate(n, 1.0, 4.0, m, 1.0, 500, rng)
    fa = log10_error_rate(n, 1.0, 4.0, m, 8.0, 500, rng)
    print(f"m={m:<4d} ACK at distance N*Delta: {ok:.3f}, at 8N*Delta: {bad:.3f}; "
          f"log10 false NACK {fn:6.1f}, log10 false ACK {fa:6.1f}")
