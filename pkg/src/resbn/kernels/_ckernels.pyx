# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; semantics mirror resbn.kernels._pykernels exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport lgamma, log, fabs, isnan
from libc.stdlib cimport calloc, malloc, free, qsort

cnp.import_array()

cdef int K2 = 0
cdef int BIC = 1
cdef int MI = 2


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef long long x = (<long long*>a)[0]
    cdef long long y = (<long long*>b)[0]
    return (x > y) - (x < y)


# tables up to this many cells are counted directly instead of sorted
cdef long long DENSE_LIMIT = 1 << 16


cdef double _dense_score(long long* keys, Py_ssize_t n, long long q, long long r, double* nk,
                         int kind) except? -1.0:
    cdef long long cells = q * r
    cdef double* counts = <double*>calloc(cells, sizeof(double))
    cdef long long c, k
    cdef Py_ssize_t i
    cdef double nij, nijk, total = 0.0, ll = 0.0
    if counts == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            counts[keys[i]] += 1.0
        for c in range(q):
            nij = 0.0
            for k in range(r):
                nij += counts[c * r + k]
            if nij == 0.0:
                continue
            if kind == K2:
                total += lgamma(<double>r) - lgamma(nij + r)
            for k in range(r):
                nijk = counts[c * r + k]
                if nijk == 0.0:
                    continue
                if kind == K2:
                    total += lgamma(nijk + 1.0)
                elif kind == BIC:
                    ll += nijk * log(nijk / nij)
                else:
                    ll += nijk * log(nijk * n / (nij * nk[k]))
        if kind == K2:
            return total
        if kind == BIC:
            return ll - 0.5 * log(<double>n) * q * (r - 1)
        return ll
    finally:
        free(counts)


def discrete_family_score(const int[:, ::1] codes, int child, parents, const int[::1] arities, int kind):
    cdef long long[::1] par = np.ascontiguousarray(parents, dtype=np.int64)
    cdef Py_ssize_t n_rows = codes.shape[0]
    cdef Py_ssize_t n_par = par.shape[0]
    cdef Py_ssize_t i, j, n = 0, start
    cdef long long r = arities[child]
    cdef long long cfg, key, cur_cfg
    cdef int v
    cdef bint ok
    cdef double q = 1.0, total = 0.0, nij, nijk
    cdef double ll = 0.0
    cdef long long* keys
    cdef double* nk
    cdef Py_ssize_t run_start, k

    if kind != K2 and kind != BIC and kind != MI:
        raise ValueError(f"unknown score kind {kind}")
    for j in range(n_par):
        q *= arities[par[j]]
    keys = <long long*>malloc(n_rows * sizeof(long long)) if n_rows > 0 else NULL
    nk = <double*>malloc((r if r > 0 else 1) * sizeof(double))
    try:
        for k in range(r):
            nk[k] = 0.0
        for i in range(n_rows):
            v = codes[i, child]
            if v < 0:
                continue
            ok = True
            cfg = 0
            for j in range(n_par):
                if codes[i, par[j]] < 0:
                    ok = False
                    break
                cfg = cfg * arities[par[j]] + codes[i, par[j]]
            if not ok:
                continue
            keys[n] = cfg * r + v
            nk[v] += 1.0
            n += 1
        if n == 0:
            return 0.0
        if kind == MI and n_par == 0:
            return 0.0
        if q * r <= DENSE_LIMIT:
            return _dense_score(keys, n, <long long>q, r, nk, kind)
        qsort(keys, n, sizeof(long long), _cmp_i64)

        # walk runs of equal config (outer) and equal key (inner)
        i = 0
        while i < n:
            cur_cfg = keys[i] // r
            start = i
            while i < n and keys[i] // r == cur_cfg:
                i += 1
            nij = <double>(i - start)
            if kind == K2:
                total += lgamma(<double>r) - lgamma(nij + r)
            run_start = start
            while run_start < i:
                key = keys[run_start]
                k = run_start
                while k < i and keys[k] == key:
                    k += 1
                nijk = <double>(k - run_start)
                if kind == K2:
                    total += lgamma(nijk + 1.0)
                elif kind == BIC:
                    ll += nijk * log(nijk / nij)
                else:
                    ll += nijk * log(nijk * n / (nij * nk[key % r]))
                run_start = k
        if kind == K2:
            return total
        if kind == BIC:
            return ll - 0.5 * log(<double>n) * q * (r - 1)
        return ll
    finally:
        free(keys)
        free(nk)


def mixed_dissimilarity(const int[:, ::1] cat, const double[:, ::1] num,
                        const int[::1] tcat, const double[::1] tnum,
                        const double[::1] wcat, const double[::1] wnum,
                        const double[::1] scale):
    cdef Py_ssize_t n = cat.shape[0] if cat.shape[1] > 0 else num.shape[0]
    cdef Py_ssize_t pc = cat.shape[1], pn = num.shape[1]
    cdef Py_ssize_t i, j
    cdef double[::1] sd = np.zeros(n)
    cdef double[::1] sw = np.zeros(n)
    cdef double d, w, x, t
    with nogil:
        for i in range(n):
            d = 0.0
            w = 0.0
            for j in range(pc):
                if cat[i, j] < 0 or tcat[j] < 0:
                    continue
                w += wcat[j]
                if cat[i, j] != tcat[j]:
                    d += wcat[j]
            for j in range(pn):
                x = num[i, j]
                t = tnum[j]
                if isnan(x) or isnan(t):
                    continue
                w += wnum[j]
                if scale[j] > 0:
                    d += wnum[j] * (fabs(x - t) / scale[j])
            sd[i] = d
            sw[i] = w
    return np.asarray(sd), np.asarray(sw)
