"""Pure-Python kernels. Operation order mirrors ``_fast.pyx`` exactly so both
backends produce bit-identical floats."""
from __future__ import annotations

import itertools
import math

_PERMS = {n: tuple(itertools.permutations(range(n))) for n in range(1, 9)}


def lex_violation(U, dists) -> int:
    """Index of the first distance whose image under U is not lex-positive, or -1."""
    n = len(U)
    for idx, v in enumerate(dists):
        sign = 0
        for i in range(n):
            row = U[i]
            c = 0
            for j in range(n):
                c += row[j] * v[j]
            if c != 0:
                sign = 1 if c > 0 else -1
                break
        if sign <= 0:
            return idx
    return -1


def _det(M) -> int:
    n = len(M)
    if n == 1:
        return M[0][0]
    total = 0
    for j in range(n):
        a = M[0][j]
        if a:
            minor = [r[:j] + r[j + 1:] for r in M[1:]]
            term = a * _det(minor)
            total += -term if j % 2 else term
    return total


def _inverse_last_column(U) -> list[int]:
    n = len(U)
    det = _det([list(r) for r in U])
    col = []
    for i in range(n):
        M = [list(r) for r in U]
        for k in range(n):
            M[k][i] = 1 if k == n - 1 else 0
        col.append(_det(M) // det)
    return col


def nest_terms(U, extents, band_lo, band_hi, sizes, unroll, parallel,
               stmt_cost, n_refs, n_arrays, mc):
    """Cost terms (work, memory, loop, spawn, skew, spill) of one nest.

    ``mc`` is the machine tuple (P, C, L, elem_bytes, miss_penalty, c_loop,
    c_spawn, c_skew, R, g_max, gamma, sigma, beta). ``band_lo`` is -1 when
    the nest is not tiled; ``parallel`` is -1 when no loop is parallel.
    """
    P, C, L, elem_bytes, m, c_loop, c_spawn, c_skew, R, g_max, gamma, sigma, beta = mc
    n = len(U)

    best = None
    best_score = -1
    for perm in _PERMS[n]:
        score = 1
        for k in range(n):
            score *= abs(U[k][perm[k]])
        if score > best_score:
            best, best_score = perm, score
    lev = [float(extents[best[k]]) for k in range(n)]

    col = _inverse_last_column(U)
    stride = 0
    lam = 1
    for j in range(n - 1, -1, -1):
        stride += lam * col[j]
        lam *= extents[j]
    stride = abs(stride)
    rate = 0.0 if stride == 0 else min(1.0, stride / L)

    if band_lo >= 0:
        loops = lev[:band_lo]
        points = []
        footprint = float(n_arrays) * elem_bytes
        for k in range(band_lo, band_hi + 1):
            s = sizes[k - band_lo]
            nt = float(math.ceil(lev[k] / s))
            loops.append(nt)
            points.append(lev[k] / nt)
            footprint *= s
        loops += points
        for k in range(band_hi + 1, n):
            loops.append(lev[k])
            footprint *= lev[k]
        if footprint <= C:
            rate = rate * beta
    else:
        loops = lev

    mem = n_refs * rate * m
    base = stmt_cost + mem
    u = unroll if unroll > 1 else 1
    if u > 1:
        ilp = min(g_max, gamma * math.log2(u))
        spill_f = sigma * max(0.0, float(u * (n_refs + 1)) - R) / R
    else:
        ilp = 0.0
        spill_f = 0.0
    g = 1.0 - ilp

    depth = len(loops)
    W = 1.0
    loop_t = 0.0
    spawn = 0.0
    for k in range(depth):
        e = loops[k]
        if k == parallel:
            spawn = c_spawn * W
            c = float(math.ceil(e / min(float(P), e)))
        else:
            c = e
        W = W * c
        o = c_loop / u if k == depth - 1 else c_loop
        loop_t = loop_t + W * o

    work = W * stmt_cost * g
    memory = W * mem * g
    spill = W * base * g * spill_f

    skewed = False
    for i in range(n):
        nz = 0
        for j in range(n):
            if U[i][j] != 0:
                nz += 1
        if nz != 1:
            skewed = True
    skew = 0.0
    if skewed:
        N = 1.0
        for e in extents:
            N = N * e
        skew = c_skew * N
    return (work, memory, loop_t, spawn, skew, spill)
