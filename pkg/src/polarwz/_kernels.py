"""Compiled successive-cancellation loops.

LLRs are ``log(P(bit=0) / P(bit=1))`` and may be infinite.  The butterfly
convention matches ``x = u @ G_N`` with ``G_N`` the plain Kronecker power (no
bit reversal): a block ``(a, b)`` of coded bits comes from child codewords
``(c_left ^ c_right, c_right)``.
"""
import math

import numpy as np
from numba import njit

SAMPLE = 0
ARGMAX = 1
FIXED = 2
SHARED = 3


@njit(cache=True, inline="always")
def _boxplus(a, b):
    if math.isinf(a):
        return b if a > 0 else -b
    if math.isinf(b):
        return a if b > 0 else -a
    m = min(abs(a), abs(b))
    if (a < 0) != (b < 0):
        m = -m
    return m + math.log1p(math.exp(-abs(a + b))) - math.log1p(math.exp(-abs(a - b)))


@njit(cache=True, inline="always")
def _prob_one(llr):
    if llr >= 0:
        e = math.exp(-llr)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(llr))


@njit(cache=True)
def _log2(n):
    t = 0
    while (1 << t) < n:
        t += 1
    return t


@njit(cache=True)
def sc_run(llr, llr_prior, policy, fixed, uni, shared_uni, out_u, out_x, out_p1, out_p1_prior):
    """One successive-cancellation pass with per-index decision policy.

    Two trees run in lock step on the same decided bits: one driven by the
    observation LLRs, one by prior-only LLRs (used by SHARED indices).
    Returns -1 on success or the first index whose posterior is undefined.
    """
    n = llr.shape[0]
    t = _log2(n)
    A = np.empty((t + 1, n))
    Ap = np.empty((t + 1, n))
    B = np.zeros((t + 1, n), dtype=np.uint8)
    tmp = np.empty(n, dtype=np.uint8)
    tmp2 = np.empty(n, dtype=np.uint8)
    A[0, :] = llr
    Ap[0, :] = llr_prior
    for j in range(n):
        if j == 0:
            start = 0
        else:
            k = 0
            while (j >> k) & 1 == 0:
                k += 1
            d0 = t - k - 1
            h = n >> (d0 + 1)
            for m in range(h):
                sgn = 1.0 - 2.0 * B[d0 + 1, m]
                A[d0 + 1, m] = A[d0, h + m] + sgn * A[d0, m]
                Ap[d0 + 1, m] = Ap[d0, h + m] + sgn * Ap[d0, m]
            start = d0 + 1
        for d in range(start, t):
            h = n >> (d + 1)
            for m in range(h):
                A[d + 1, m] = _boxplus(A[d, m], A[d, h + m])
                Ap[d + 1, m] = _boxplus(Ap[d, m], Ap[d, h + m])
        L = A[t, 0]
        Lp = Ap[t, 0]
        if math.isnan(L) or math.isnan(Lp):
            return j
        p1 = _prob_one(L)
        p1p = _prob_one(Lp)
        out_p1[j] = p1
        out_p1_prior[j] = p1p
        pol = policy[j]
        if pol == SAMPLE:
            bit = 1 if uni[j] < p1 else 0
        elif pol == ARGMAX:
            bit = 1 if L < 0 else 0
        elif pol == FIXED:
            bit = fixed[j]
        else:
            bit = 1 if shared_uni[j] < p1p else 0
        out_u[j] = bit
        # fold the decided bit into the partial-sum stack
        cur = 1
        tmp[0] = bit
        d = t
        idx = j
        while idx & 1 == 1 and d > 0:
            for m in range(cur):
                tmp2[m] = B[d, m] ^ tmp[m]
                tmp2[cur + m] = tmp[m]
            for m in range(2 * cur):
                tmp[m] = tmp2[m]
            cur *= 2
            d -= 1
            idx >>= 1
        for m in range(cur):
            B[d, m] = tmp[m]
    for m in range(n):
        out_x[m] = B[0, m]
    return -1


@njit(cache=True)
def genie_z_accumulate(llr, ubits, zsum):
    """Add ``2*sqrt(p0*p1)`` of every bit-channel, for each sample row.

    Genie-aided: the true bits ``ubits`` stand in for past decisions, so every
    tree level can be evaluated breadth-first.
    """
    M, n = llr.shape
    t = _log2(n)
    ps = np.empty((max(t, 1), n), dtype=np.uint8)
    L = np.empty(n)
    L2 = np.empty(n)
    for s in range(M):
        for m in range(n):
            ps[0, m] = ubits[s, m]
        for lv in range(1, t):
            half = 1 << (lv - 1)
            size = 2 * half
            for o in range(0, n, size):
                for m in range(half):
                    ps[lv, o + m] = ps[lv - 1, o + m] ^ ps[lv - 1, o + half + m]
                    ps[lv, o + half + m] = ps[lv - 1, o + half + m]
        for m in range(n):
            L[m] = llr[s, m]
        size = n
        lv = t - 1
        while size > 1:
            h = size // 2
            for o in range(0, n, size):
                for m in range(h):
                    a = L[o + m]
                    b = L[o + h + m]
                    L2[o + m] = _boxplus(a, b)
                    L2[o + h + m] = b + (1.0 - 2.0 * ps[lv, o + m]) * a
            for m in range(n):
                L[m] = L2[m]
            size = h
            lv -= 1
        for m in range(n):
            a = abs(L[m])
            if math.isinf(a):
                continue
            e = math.exp(-0.5 * a)
            zsum[m] += 2.0 * e / (1.0 + e * e)
