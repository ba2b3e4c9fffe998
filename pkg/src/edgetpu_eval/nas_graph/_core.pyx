# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cell canonicalization kernel. Must agree bit-for-bit with _pycore.py."""

from libc.stdint cimport uint64_t, int64_t

cdef enum:
    MAXV = 7
    MAXP = 21

cdef uint64_t IN_SALT = 0x51AF2D3C8E4B6A17ULL
cdef uint64_t OUT_SALT = 0x2C6F0E9D4B7A3185ULL


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    x = x + 0x9E3779B97F4A7C15ULL
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef struct Cell:
    int n
    int nedges
    int ei[MAXP]
    int ej[MAXP]
    int labels[MAXV]
    uint64_t col[MAXV]
    int pred[MAXV]
    int pos[MAXV]
    uint64_t best
    int has_best


cdef inline int pair_index(int i, int j, int n) noexcept nogil:
    return i * n - i * (i + 1) // 2 + (j - i - 1)


cdef void load_edges(Cell* c, int n, uint64_t bits) noexcept nogil:
    cdef int i, j, k = 0
    c.n = n
    c.nedges = 0
    for i in range(n):
        c.pred[i] = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (bits >> k) & 1:
                c.ei[c.nedges] = i
                c.ej[c.nedges] = j
                c.nedges += 1
                c.pred[j] |= 1 << i
            k += 1


cdef void compute_colors(Cell* c) noexcept nogil:
    cdef int n = c.n
    cdef int v, e, it
    cdef int indeg[MAXV]
    cdef int outdeg[MAXV]
    cdef uint64_t s_in[MAXV]
    cdef uint64_t s_out[MAXV]
    cdef uint64_t h
    for v in range(n):
        indeg[v] = 0
        outdeg[v] = 0
    for e in range(c.nedges):
        outdeg[c.ei[e]] += 1
        indeg[c.ej[e]] += 1
    for v in range(n):
        c.col[v] = mix64(<uint64_t>(c.labels[v] * 64 + indeg[v] * 8 + outdeg[v]))
    for it in range(n):
        for v in range(n):
            s_in[v] = 0
            s_out[v] = 0
        for e in range(c.nedges):
            s_in[c.ej[e]] += c.col[c.ei[e]]
            s_out[c.ei[e]] += c.col[c.ej[e]]
        for v in range(n):
            h = mix64(c.col[v] ^ mix64(s_in[v] + IN_SALT))
            c.col[v] = mix64(h ^ mix64(s_out[v] + OUT_SALT))


cdef void leaf(Cell* c) noexcept nogil:
    cdef int e, v
    cdef uint64_t adj = 0
    cdef uint64_t lab = 0
    cdef uint64_t code
    for e in range(c.nedges):
        adj |= (<uint64_t>1) << pair_index(c.pos[c.ei[e]], c.pos[c.ej[e]], c.n)
    for v in range(c.n):
        lab |= (<uint64_t>c.labels[v]) << (3 * c.pos[v])
    code = ((<uint64_t>c.n) << 42) | (lab << 21) | adj
    if not c.has_best or code < c.best:
        c.best = code
        c.has_best = 1


cdef void search(Cell* c, int placed, int depth) noexcept nogil:
    cdef int v
    cdef int found = 0
    cdef uint64_t cmin = 0
    if depth == c.n:
        leaf(c)
        return
    for v in range(c.n):
        if not ((placed >> v) & 1) and (c.pred[v] & ~placed) == 0:
            if not found or c.col[v] < cmin:
                cmin = c.col[v]
                found = 1
    for v in range(c.n):
        if not ((placed >> v) & 1) and (c.pred[v] & ~placed) == 0 and c.col[v] == cmin:
            c.pos[v] = depth
            search(c, placed | (1 << v), depth + 1)


cdef uint64_t canon(Cell* c) noexcept nogil:
    compute_colors(c)
    c.has_best = 0
    c.best = 0
    search(c, 0, 0)
    return c.best


def canonical_code(int n, unsigned long long bits, labels):
    cdef Cell c
    cdef int v
    load_edges(&c, n, bits)
    for v in range(n):
        c.labels[v] = labels[v]
    return canon(&c)


cdef int is_full_dag(int n, uint64_t bits) noexcept nogil:
    cdef int i, j, k = 0
    cdef int outdeg[MAXV]
    cdef int indeg[MAXV]
    for i in range(n):
        outdeg[i] = 0
        indeg[i] = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (bits >> k) & 1:
                outdeg[i] += 1
                indeg[j] += 1
            k += 1
    for i in range(n - 1):
        if outdeg[i] == 0:
            return 0
    for i in range(1, n):
        if indeg[i] == 0:
            return 0
    return 1


cdef int popcount(uint64_t x) noexcept nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


def valid_matrices(int n, int max_edges):
    cdef int npairs = n * (n - 1) // 2
    cdef uint64_t bits
    cdef uint64_t limit = (<uint64_t>1) << npairs
    out = []
    bits = 0
    while bits < limit:
        if popcount(bits) <= max_edges and is_full_dag(n, bits):
            out.append(bits)
        bits += 1
    return out


def fill_matrix_codes(int n, const long long[::1] matrices, unsigned long long[::1] out):
    """Write canonical codes for all (matrix, labeling) pairs into ``out``, matrix-major."""
    cdef Cell c
    cdef Py_ssize_t m, nmat = matrices.shape[0]
    cdef int li, v, nlab = 1, idx
    cdef Py_ssize_t k = 0
    for v in range(n - 2):
        nlab *= 3
    if out.shape[0] < nmat * nlab:
        raise ValueError("output buffer too small")
    with nogil:
        for m in range(nmat):
            load_edges(&c, n, <uint64_t>matrices[m])
            for li in range(nlab):
                c.labels[0] = 0
                c.labels[n - 1] = 4
                idx = li
                for v in range(n - 2, 0, -1):
                    c.labels[v] = 1 + idx % 3
                    idx = idx // 3
                out[k] = canon(&c)
                k += 1
