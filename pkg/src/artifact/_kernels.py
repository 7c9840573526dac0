"""Compiled max-plus scans shared by the DP modules."""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def forward_scan(B, i0, i1, V, argL, argR):
    # B: rows for levels m..top; fills V[k, i0..i1] and the prefix argmax of V[k-1] - B[k]
    n_lv = B.shape[0]
    for j in range(i0, i1 + 1):
        V[0, j] = B[0, j] - B[0, i0]
        argL[0, j] = i0
        argR[0, j] = i0
    for k in range(1, n_lv):
        run = -np.inf
        aL = i0
        aR = i0
        for j in range(i0, i1 + 1):
            h = V[k - 1, j] - B[k, j]
            if h > run:
                run = h
                aL = j
                aR = j
            elif h == run:
                aR = j
            V[k, j] = B[k, j] + run
            argL[k, j] = aL
            argR[k, j] = aR


@nb.njit(cache=True)
def seeded_forward_scan(B, phi, i1, V):
    # V_0(t) = B_0(t) + max_{z <= t} (phi(z) - B_0(z)), then the usual recursion
    n_lv = B.shape[0]
    run = -np.inf
    for j in range(0, i1 + 1):
        h = phi[j] - B[0, j]
        if h > run:
            run = h
        V[0, j] = B[0, j] + run
    for k in range(1, n_lv):
        run = -np.inf
        for j in range(0, i1 + 1):
            h = V[k - 1, j] - B[k, j]
            if h > run:
                run = h
            V[k, j] = B[k, j] + run


@nb.njit(cache=True)
def reverse_scan(B, iT, W):
    # B: rows for levels lo..K (last row is the target level); W[k, j] for j <= iT
    n_lv = B.shape[0]
    top = n_lv - 1
    for j in range(iT + 1):
        W[top, j] = B[top, iT] - B[top, j]
    for k in range(top - 1, -1, -1):
        run = -np.inf
        for j in range(iT, -1, -1):
            h = B[k, j] + W[k + 1, j]
            if h > run:
                run = h
            W[k, j] = run - B[k, j]


@nb.njit(cache=True)
def suffix_argmax(g, tauL, tauR):
    # leftmost / rightmost maximizer of g over [i, end] for every i
    n = g.shape[0]
    best = -np.inf
    aL = n - 1
    aR = n - 1
    for i in range(n - 1, -1, -1):
        v = g[i]
        if v > best:
            best = v
            aL = i
            aR = i
        elif v == best:
            aL = i
        tauL[i] = aL
        tauR[i] = aR


@nb.njit(cache=True)
def paths_touch(tA, tB, lvl0, la, ia, lb, ib, top):
    # Paths follow tau arrays (rows from lvl0) from (la, ia) and (lb, ib), la <= lb.
    # True when they share a point on levels lb..top; a common origin alone does not count.
    a = ia
    k = la
    while k < lb:
        a = tA[k - lvl0, a]
        k += 1
    a_in = a if la < lb else ia
    b_in = ib
    same_origin = la == lb and ia == ib
    for k in range(lb, top + 1):
        a_out = tA[k - lvl0, a_in]
        b_out = tB[k - lvl0, b_in]
        lo = max(a_in, b_in)
        hi = min(a_out, b_out)
        if lo <= hi:
            if not (same_origin and k == lb and hi == ia):
                return True
        a_in = a_out
        b_in = b_out
    return False


@nb.njit(cache=True)
def geometric_flags(tLg, tRd, lvl0, m_lo, m_hi, i_lo, i_hi, top):
    # edge flag: L(gamma) climbs at t, R(delta) moves right, and they never meet again
    # point flag: R(delta) from (m, t) and L(gamma) from (m+1, t) are disjoint
    nm = m_hi - m_lo + 1
    ni = i_hi - i_lo + 1
    edge = np.zeros((nm, ni), dtype=np.bool_)
    point = np.zeros((nm, ni), dtype=np.bool_)
    for mm in range(nm):
        m = m_lo + mm
        for ii in range(ni):
            t = i_lo + ii
            if tLg[m - lvl0, t] == t and tRd[m - lvl0, t] > t:
                edge[mm, ii] = not paths_touch(tLg, tRd, lvl0, m, t, m, t, top)
            if m + 1 <= top:
                point[mm, ii] = not paths_touch(tRd, tLg, lvl0, m, t, m + 1, t, top)
    return edge, point
