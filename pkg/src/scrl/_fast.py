"""Compiled coupled-DE loop using the explicit forms of f and g.

Checked against the generic maps of ``dd_core`` in the test suite.
"""

import math

import numba
import numpy as np

PRIMAL, DUAL = 0, 1


@numba.njit(cache=True)
def _g(flavor, dl, dr, dg, beta, x1, x2, eps):
    if flavor == PRIMAL:
        y1 = 1.0 - (1.0 - x1) ** (dr - 1)
        y2 = 1.0 - (1.0 - eps) * (1.0 - x2) ** (dg - 1)
    else:
        lam = math.exp(-beta * x2)
        y1 = 1.0 - (1.0 - x1) ** (dl - 1) * lam
        y2 = 1.0 - (1.0 - x1) ** dl * lam
    return min(max(y1, 0.0), 1.0), min(max(y2, 0.0), 1.0)


@numba.njit(cache=True)
def _f(flavor, dl, dr, dg, beta, y1, y2, eps):
    if flavor == PRIMAL:
        lam = math.exp(-beta * (1.0 - y2))
        x1 = y1 ** (dl - 1) * lam
        x2 = y1**dl * lam
    else:
        x1 = y1 ** (dr - 1)
        x2 = eps * y2 ** (dg - 1)
    return min(max(x1, 0.0), 1.0), min(max(x2, 0.0), 1.0)


@numba.njit(cache=True)
def coupled_iterate(flavor, dl, dr, dg, beta, eps_pos, w, x0, tol, zero_tol, max_iter, slack):
    """Returns (x, iterations, peak, stopped_early, monotone)."""
    n = x0.shape[0]
    pad = w - 1
    m = n + 2 * pad
    x = x0.copy()
    gv = np.zeros((m, 2))
    fv = np.zeros((n + pad, 2))
    ep = np.zeros(m)
    for r in range(n):
        ep[r + pad] = eps_pos[r]
    nxt = np.zeros((n, 2))
    it = 0
    peak = 1.0
    early = False
    monotone = True
    while it < max_iter:
        for q in range(m):
            r = q - pad
            if 0 <= r < n:
                a, b = _g(flavor, dl, dr, dg, beta, x[r, 0], x[r, 1], ep[q])
            else:
                a, b = _g(flavor, dl, dr, dg, beta, 0.0, 0.0, ep[q])
            gv[q, 0] = a
            gv[q, 1] = b
        for q in range(n + pad):
            s0 = 0.0
            s1 = 0.0
            for j in range(w):
                s0 += gv[q + j, 0]
                s1 += gv[q + j, 1]
            a, b = _f(flavor, dl, dr, dg, beta, s0 / w, s1 / w, ep[q])
            fv[q, 0] = a
            fv[q, 1] = b
        delta = 0.0
        peak = 0.0
        for r in range(n):
            s0 = 0.0
            s1 = 0.0
            for k in range(w):
                s0 += fv[r + k, 0]
                s1 += fv[r + k, 1]
            s0 /= w
            s1 /= w
            if s0 > x[r, 0] + slack or s1 > x[r, 1] + slack:
                monotone = False
            delta = max(delta, abs(s0 - x[r, 0]), abs(s1 - x[r, 1]))
            peak = max(peak, s0, s1)
            nxt[r, 0] = s0
            nxt[r, 1] = s1
        x[:, :] = nxt
        it += 1
        if not monotone:
            break
        if peak < zero_tol or delta < tol:
            early = True
            break
    return x, it, peak, early, monotone


@numba.njit(cache=True)
def peel(n_bits, fac_ptr, fac_idx, acc0):
    """Round-based peeling over factors given in CSR form (odd-multiplicity supports).

    Returns (values, rounds, bad_factor); bad_factor is -1 unless some factor
    ends with no unknowns but nonzero parity.
    """
    n_fac = fac_ptr.shape[0] - 1
    count = np.empty(n_fac, np.int64)
    xr = np.zeros(n_fac, np.int64)
    acc = acc0.copy()
    deg = np.zeros(n_bits + 1, np.int64)
    for f in range(n_fac):
        count[f] = fac_ptr[f + 1] - fac_ptr[f]
        for k in range(fac_ptr[f], fac_ptr[f + 1]):
            xr[f] ^= fac_idx[k]
            deg[fac_idx[k] + 1] += 1
    bit_ptr = np.cumsum(deg)
    fill = bit_ptr[:-1].copy()
    bit_fac = np.empty(fac_idx.shape[0], np.int64)
    for f in range(n_fac):
        for k in range(fac_ptr[f], fac_ptr[f + 1]):
            b = fac_idx[k]
            bit_fac[fill[b]] = f
            fill[b] += 1
    values = np.full(n_bits, -1, np.int8)
    cur = np.empty(n_fac, np.int64)
    nxt = np.empty(n_fac, np.int64)
    nc = 0
    for f in range(n_fac):
        if count[f] == 0 and acc[f] != 0:
            return values, 0, f
        if count[f] == 1:
            cur[nc] = f
            nc += 1
    rounds = 0
    while nc > 0:
        rounds += 1
        nn = 0
        for q in range(nc):
            f = cur[q]
            if count[f] != 1:
                continue
            b = xr[f]
            v = acc[f]
            values[b] = v
            for k in range(bit_ptr[b], bit_ptr[b + 1]):
                h = bit_fac[k]
                acc[h] ^= v
                xr[h] ^= b
                count[h] -= 1
                if count[h] == 1:
                    nxt[nn] = h
                    nn += 1
                elif count[h] == 0 and acc[h] != 0:
                    return values, rounds, h
        cur, nxt = nxt, cur
        nc = nn
    return values, rounds, -1
