"""Compiled inner loops for path sampling.

Kernels consume pre-drawn uniforms (two per jump: waiting time, then
direction) from a buffer supplied by the caller and return when the
buffer runs out, so the caller can refill and resume.  This keeps the
stream of random numbers a pure function of the replica's generator, no
matter how many times a kernel is re-entered.

Status codes returned by the kernels:
    0  uniform buffer exhausted (resume with a fresh buffer)
    1  reached the time horizon
    2  killed (single chain) / merged and horizon reached (triple)
    3  envelope or ordering violation (triple; abort)
"""

import math

import numpy as np
from numba import njit

__all__ = ["endpoint_kernel", "record_kernel", "triple_kernel"]


@njit(cache=True, nogil=True)
def endpoint_kernel(i, t, t_end, up, down, kill_below, stop_on_kill,
                    first_kill, uni):
    """Advance a birth-death chain, keeping only the current state.

    Returns (i, t, first_kill, status, used).  `first_kill` is the first
    time the chain jumped below `kill_below` (-1.0 while it has not);
    with stop_on_kill the kernel stops there with status 2.
    """
    ptr = 0
    nu = uni.shape[0]
    while True:
        rate = up[i] + down[i]
        if rate <= 0.0:
            return i, t_end, first_kill, 1, ptr
        if ptr + 2 > nu:
            return i, t, first_kill, 0, ptr
        w = -math.log(uni[ptr]) / rate
        ptr += 1
        if t + w >= t_end:
            return i, t_end, first_kill, 1, ptr
        t += w
        if uni[ptr] * rate < up[i]:
            i += 1
        else:
            i -= 1
        ptr += 1
        if i < kill_below and first_kill < 0.0:
            first_kill = t
            if stop_on_kill:
                return i, t, first_kill, 2, ptr


@njit(cache=True, nogil=True)
def record_kernel(i, t, t_end, up, down, kill_below, stop_on_kill,
                  first_kill, uni, out_t, out_i, n_rec):
    """Like endpoint_kernel but appends every jump to (out_t, out_i)
    starting at slot n_rec.  Also stops when the record arrays fill."""
    ptr = 0
    nu = uni.shape[0]
    cap = out_t.shape[0]
    while True:
        rate = up[i] + down[i]
        if rate <= 0.0:
            return i, t_end, first_kill, 1, ptr, n_rec
        if ptr + 2 > nu or n_rec >= cap:
            return i, t, first_kill, 0, ptr, n_rec
        w = -math.log(uni[ptr]) / rate
        ptr += 1
        if t + w >= t_end:
            return i, t_end, first_kill, 1, ptr, n_rec
        t += w
        if uni[ptr] * rate < up[i]:
            i += 1
        else:
            i -= 1
        ptr += 1
        out_t[n_rec] = t
        out_i[n_rec] = i
        n_rec += 1
        if i < kill_below and first_kill < 0.0:
            first_kill = t
            if stop_on_kill:
                return i, t, first_kill, 2, ptr, n_rec


@njit(cache=True, nogil=True)
def triple_kernel(i1, i2, i3, t, t_end, lp, lm, linf, lsup, kmin, kmax,
                  merge_time, exit_time, uni):
    """Ordered triple of chains sharing the reflection structure.

    The outer pair reflects with envelope rates (linf, lsup); the middle
    chain carries the original rates and is glued to whichever outer
    chain it touches.  After the outer pair merges, the triple continues
    as a single chain so the exit time from the index window
    [kmin, kmax] keeps being tracked.

    Returns (i1, i2, i3, t, merge_time, exit_time, status, used); the
    times are -1.0 while unresolved.  Status 3 flags a negative residual
    rate or an ordering breach; the caller aborts.
    """
    ptr = 0
    nu = uni.shape[0]
    r = np.empty(4)
    d1 = np.empty(4, dtype=np.int64)
    d2 = np.empty(4, dtype=np.int64)
    d3 = np.empty(4, dtype=np.int64)
    while True:
        # Envelope must dominate the rates at the outer states while they
        # are inside the window.
        if exit_time < 0.0:
            for j in (i1, i3):
                if kmin <= j <= kmax:
                    if lp[j] < linf - 1e-9 or lm[j] < linf - 1e-9 \
                       or lp[j] > lsup + 1e-9 or lm[j] > lsup + 1e-9:
                        return i1, i2, i3, t, merge_time, exit_time, 3, ptr
        if i1 == i3:
            nev = 2
            r[0] = lp[i1]
            d1[0], d2[0], d3[0] = 1, 1, 1
            r[1] = lm[i1]
            d1[1], d2[1], d3[1] = -1, -1, -1
        elif i2 == i3 and i1 < i2:
            nev = 4
            r[0] = lp[i3]
            d1[0], d2[0], d3[0] = -1, 1, 1
            r[1] = linf
            d1[1], d2[1], d3[1] = 1, -1, -1
            r[2] = lm[i3] - linf
            d1[2], d2[2], d3[2] = 0, -1, 0
            r[3] = lsup - lm[i3]
            d1[3], d2[3], d3[3] = -1, 0, 1
        elif i1 == i2 and i2 < i3:
            nev = 4
            r[0] = lm[i1]
            d1[0], d2[0], d3[0] = -1, -1, 1
            r[1] = linf
            d1[1], d2[1], d3[1] = 1, 1, -1
            r[2] = lp[i1] - linf
            d1[2], d2[2], d3[2] = 0, 1, 0
            r[3] = lsup - lm[i1]
            d1[3], d2[3], d3[3] = -1, 0, 1
        elif i1 < i2 < i3:
            nev = 4
            r[0] = lsup
            d1[0], d2[0], d3[0] = -1, 0, 1
            r[1] = linf
            d1[1], d2[1], d3[1] = 1, 0, -1
            r[2] = lm[i2]
            d1[2], d2[2], d3[2] = 0, -1, 0
            r[3] = lp[i2]
            d1[3], d2[3], d3[3] = 0, 1, 0
        else:
            return i1, i2, i3, t, merge_time, exit_time, 3, ptr
        total = 0.0
        for k in range(nev):
            if r[k] < -1e-9:
                return i1, i2, i3, t, merge_time, exit_time, 3, ptr
            if r[k] < 0.0:
                r[k] = 0.0
            total += r[k]
        if total <= 0.0:
            status = 2 if merge_time >= 0.0 else 1
            return i1, i2, i3, t_end, merge_time, exit_time, status, ptr
        if ptr + 2 > nu:
            return i1, i2, i3, t, merge_time, exit_time, 0, ptr
        w = -math.log(uni[ptr]) / total
        ptr += 1
        if t + w >= t_end:
            status = 2 if merge_time >= 0.0 else 1
            return i1, i2, i3, t_end, merge_time, exit_time, status, ptr
        t += w
        x = uni[ptr] * total
        ptr += 1
        k = 0
        acc = r[0]
        while k < nev - 1 and x >= acc:
            k += 1
            acc += r[k]
        i1 += d1[k]
        i2 += d2[k]
        i3 += d3[k]
        if not (i1 <= i2 <= i3):
            return i1, i2, i3, t, merge_time, exit_time, 3, ptr
        if merge_time < 0.0 and i1 == i3:
            merge_time = t
        if exit_time < 0.0 and (i1 < kmin or i1 > kmax
                                or i3 < kmin or i3 > kmax):
            exit_time = t
        if exit_time >= 0.0:
            # Outcome is resolved either way once the window is left.
            status = 2 if merge_time >= 0.0 else 1
            return i1, i2, i3, t, merge_time, exit_time, status, ptr
