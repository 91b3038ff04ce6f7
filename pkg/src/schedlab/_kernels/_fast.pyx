# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; keep every floating-point step in the same order as
``_pure.py`` so both backends agree bit for bit."""
from libc.math cimport ceil, log2

cdef enum:
    MAXN = 8


cdef inline void _load_matrix(U, int n, long long M[MAXN][MAXN]):
    cdef int i, j
    for i in range(n):
        row = U[i]
        for j in range(n):
            M[i][j] = row[j]


def lex_violation(U, dists):
    cdef int n = len(U)
    cdef long long M[MAXN][MAXN]
    cdef long long v[MAXN]
    cdef long long c
    cdef int i, j, idx, sign
    if n > MAXN:
        raise ValueError("matrix too large")
    _load_matrix(U, n, M)
    idx = 0
    for vec in dists:
        for j in range(n):
            v[j] = vec[j]
        sign = 0
        for i in range(n):
            c = 0
            for j in range(n):
                c += M[i][j] * v[j]
            if c != 0:
                sign = 1 if c > 0 else -1
                break
        if sign <= 0:
            return idx
        idx += 1
    return -1


cdef long long _det(long long A[MAXN][MAXN], int n):
    # Bareiss fraction-free elimination on a private copy
    cdef long long M[MAXN][MAXN]
    cdef long long prev = 1, tmp
    cdef int i, j, k, r, sgn = 1
    for i in range(n):
        for j in range(n):
            M[i][j] = A[i][j]
    for k in range(n - 1):
        if M[k][k] == 0:
            r = -1
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    r = i
                    break
            if r < 0:
                return 0
            for j in range(n):
                tmp = M[k][j]
                M[k][j] = M[r][j]
                M[r][j] = tmp
            sgn = -sgn
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sgn * M[n - 1][n - 1]


cdef bint _next_perm(int *a, int n):
    cdef int i = n - 2, j, t
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = n - 1
    while a[j] <= a[i]:
        j -= 1
    t = a[i]; a[i] = a[j]; a[j] = t
    i += 1
    j = n - 1
    while i < j:
        t = a[i]; a[i] = a[j]; a[j] = t
        i += 1
        j -= 1
    return True


def nest_terms(U, extents, int band_lo, int band_hi, sizes, int unroll, int parallel,
               int stmt_cost, int n_refs, int n_arrays, mc):
    cdef int n = len(U)
    cdef long long M[MAXN][MAXN]
    cdef long long A[MAXN][MAXN]
    cdef long long ext[MAXN]
    cdef double lev[MAXN]
    cdef double loops[2 * MAXN]
    cdef double points[MAXN]
    cdef int perm[MAXN]
    cdef int best[MAXN]
    cdef long long score, best_score, det, stride, lam
    cdef long long col[MAXN]
    cdef int i, j, k, depth, npts, u, nz
    cdef double rate, footprint, s, nt, mem, base, ilp, spill_f, g
    cdef double W, loop_t, spawn, e, c, o, work, memory, spill, skew, N
    cdef bint skewed

    cdef double P = mc[0], C = mc[1], L = mc[2], elem_bytes = mc[3], m = mc[4]
    cdef double c_loop = mc[5], c_spawn = mc[6], c_skew = mc[7], R = mc[8]
    cdef double g_max = mc[9], gamma = mc[10], sigma = mc[11], beta = mc[12]

    if n > MAXN:
        raise ValueError("matrix too large")
    _load_matrix(U, n, M)
    for j in range(n):
        ext[j] = extents[j]

    for k in range(n):
        perm[k] = k
    best_score = -1
    while True:
        score = 1
        for k in range(n):
            score *= M[k][perm[k]] if M[k][perm[k]] >= 0 else -M[k][perm[k]]
        if score > best_score:
            best_score = score
            for k in range(n):
                best[k] = perm[k]
        if not _next_perm(perm, n):
            break
    for k in range(n):
        lev[k] = <double>ext[best[k]]

    det = _det(M, n)
    for i in range(n):
        for k in range(n):
            for j in range(n):
                A[k][j] = M[k][j]
            A[k][i] = 1 if k == n - 1 else 0
        col[i] = _det(A, n) // det
    stride = 0
    lam = 1
    for j in range(n - 1, -1, -1):
        stride += lam * col[j]
        lam *= ext[j]
    if stride < 0:
        stride = -stride
    if stride == 0:
        rate = 0.0
    else:
        rate = <double>stride / L
        if rate > 1.0:
            rate = 1.0

    depth = 0
    if band_lo >= 0:
        for k in range(band_lo):
            loops[depth] = lev[k]
            depth += 1
        npts = 0
        footprint = <double>n_arrays * elem_bytes
        for k in range(band_lo, band_hi + 1):
            s = sizes[k - band_lo]
            nt = ceil(lev[k] / s)
            loops[depth] = nt
            depth += 1
            points[npts] = lev[k] / nt
            npts += 1
            footprint = footprint * s
        for k in range(npts):
            loops[depth] = points[k]
            depth += 1
        for k in range(band_hi + 1, n):
            loops[depth] = lev[k]
            depth += 1
            footprint = footprint * lev[k]
        if footprint <= C:
            rate = rate * beta
    else:
        for k in range(n):
            loops[depth] = lev[k]
            depth += 1

    mem = <double>n_refs * rate * m
    base = <double>stmt_cost + mem
    u = unroll if unroll > 1 else 1
    if u > 1:
        ilp = gamma * log2(<double>u)
        if g_max < ilp:
            ilp = g_max
        spill_f = <double>(u * (n_refs + 1)) - R
        if spill_f < 0.0:
            spill_f = 0.0
        spill_f = sigma * spill_f / R
    else:
        ilp = 0.0
        spill_f = 0.0
    g = 1.0 - ilp

    W = 1.0
    loop_t = 0.0
    spawn = 0.0
    for k in range(depth):
        e = loops[k]
        if k == parallel:
            spawn = c_spawn * W
            c = ceil(e / (P if P < e else e))
        else:
            c = e
        W = W * c
        o = c_loop / <double>u if k == depth - 1 else c_loop
        loop_t = loop_t + W * o

    work = W * <double>stmt_cost * g
    memory = W * mem * g
    spill = W * base * g * spill_f

    skewed = False
    for i in range(n):
        nz = 0
        for j in range(n):
            if M[i][j] != 0:
                nz += 1
        if nz != 1:
            skewed = True
    skew = 0.0
    if skewed:
        N = 1.0
        for k in range(n):
            N = N * <double>ext[k]
        skew = c_skew * N
    return (work, memory, loop_t, spawn, skew, spill)
