# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3, initializedcheck=False
"""Compiled hot loops.  ``_pycore`` implements the same functions in numpy /
plain Python and is used when this extension is not built."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int8_t, uint8_t, uint32_t

cnp.import_array()

BACKEND = "compiled"

cdef extern from *:
    """
    static inline int hc_ctz(unsigned int x) { return __builtin_ctz(x); }
    static inline int hc_popcount(unsigned int x) { return __builtin_popcount(x); }
    static inline unsigned long long hc_mulmod(unsigned long long a, unsigned long long b,
                                               unsigned long long p) {
        /* p < 2^62: the long double quotient is off by at most one */
        unsigned long long q = (unsigned long long)((long double)a * (long double)b / (long double)p);
        long long r = (long long)(a * b - q * p);
        if (r < 0) r += (long long)p;
        else if (r >= (long long)p) r -= (long long)p;
        return (unsigned long long)r;
    }
    """
    int hc_ctz(unsigned int x) nogil
    int hc_popcount(unsigned int x) nogil
    uint64_t hc_mulmod(uint64_t a, uint64_t b, uint64_t p) nogil

MAX_MOD = 1 << 62


cdef inline uint64_t submod(uint64_t a, uint64_t b, uint64_t p) nogil:
    return a - b if a >= b else a + (p - b)


cdef uint64_t powmod(uint64_t a, uint64_t e, uint64_t p) nogil:
    cdef uint64_t r = 1
    a %= p
    while e:
        if e & 1:
            r = hc_mulmod(r, a, p)
        a = hc_mulmod(a, a, p)
        e >>= 1
    return r


cdef inline int64_t rank_partner(int* partner, int n) nogil:
    cdef unsigned int mask = (1u << n) - 1
    cdef int64_t idx = 0
    cdef int m = n // 2, k, a, b, d
    for k in range(m):
        a = hc_ctz(mask)
        b = partner[a]
        d = hc_popcount(mask & ((1u << b) - 1)) - 1
        idx = idx * (2 * (m - k) - 1) + d
        mask &= ~((1u << a) | (1u << b))
    return idx


def matching_rank(partner):
    """Lexicographic rank of a perfect matching given as a partner array."""
    cdef int buf[32]
    cdef int n = len(partner), i
    if n > 32:
        raise ValueError("at most 32 points")
    for i in range(n):
        buf[i] = partner[i]
    return rank_partner(buf, n)


def mulmod(uint64_t a, uint64_t b, uint64_t p):
    return hc_mulmod(a % p, b % p, p)


# --- contraction of words against all matchings -------------------------------

cdef struct WordCtx:
    int n
    int m
    int apos[16]      # a-positions, in order
    int bpos[16][16]  # per a-position: candidate b-positions
    int nb[16]
    int partner[32]
    int used
    int64_t coef
    int64_t* out


cdef void _enum(WordCtx* ctx, int k, int sign) nogil:
    cdef int j, a, b
    if k == ctx.m:
        ctx.out[rank_partner(ctx.partner, ctx.n)] += sign * ctx.coef
        return
    a = ctx.apos[k]
    for j in range(ctx.nb[k]):
        b = ctx.bpos[k][j]
        if ctx.used & (1 << b):
            continue
        ctx.used |= (1 << b)
        ctx.partner[a] = b
        ctx.partner[b] = a
        _enum(ctx, k + 1, sign if a < b else -sign)
        ctx.used &= ~(1 << b)


def contraction_counts(const uint8_t[:, ::1] words, const int64_t[::1] coefs, int64_t[::1] out):
    """out[rank(M)] += coef * mu_M(word) for every word and every matching M
    with nonzero contraction (a_i paired with b_i)."""
    cdef Py_ssize_t r, nrows = words.shape[0]
    cdef int n = words.shape[1], s, x, k, j, bad
    cdef WordCtx ctx
    cdef int cnt[32]
    cdef int pos[32][16]
    if n % 2 or n > 16:
        raise ValueError("words must have even length <= 16")
    ctx.n = n
    ctx.m = n // 2
    ctx.out = &out[0]
    with nogil:
        for r in range(nrows):
            if coefs[r] == 0:
                continue
            for x in range(32):
                cnt[x] = 0
            for s in range(n):
                x = words[r, s]
                pos[x][cnt[x]] = s
                cnt[x] += 1
            bad = 0
            for x in range(0, 32, 2):
                if cnt[x] != cnt[x + 1]:
                    bad = 1
                    break
            if bad:
                continue
            k = 0
            for x in range(0, 32, 2):
                for s in range(cnt[x]):
                    ctx.apos[k] = pos[x][s]
                    for j in range(cnt[x]):
                        ctx.bpos[k][j] = pos[x + 1][j]
                    ctx.nb[k] = cnt[x]
                    k += 1
            ctx.used = 0
            ctx.coef = coefs[r]
            _enum(&ctx, 0, 1)


def symbolic_accumulate(const int8_t[:, ::1] perms, const int64_t[::1] signs,
                        const int64_t[::1] legids, int pleg, int qleg, int npoints,
                        const int8_t[:, ::1] match_pairs, const int64_t[::1] coeffs,
                        int64_t[::1] out):
    """Formal contraction of a tree expansion against weighted matchings.

    perms[r, s] is the local leg in slot s; legids maps local legs to global
    formal symbols.  For each row and each matching k (pairs of slots in
    match_pairs[k] = s0 t0 s1 t1 ...) the mu-monomial over all ``npoints``
    symbols, including the fixed factor mu(pleg, qleg), gets
    sign * orientation * coeffs[k] added at its matching rank.
    """
    cdef Py_ssize_t r, nrows = perms.shape[0], k, K = match_pairs.shape[0]
    cdef int n = perms.shape[1], j, s, t, x, y, sg
    cdef int partner[32]
    cdef int64_t base
    if npoints > 32 or npoints % 2:
        raise ValueError("bad npoints")
    with nogil:
        for r in range(nrows):
            for k in range(K):
                if coeffs[k] == 0:
                    continue
                sg = 1
                for j in range(0, n, 2):
                    s = match_pairs[k, j]
                    t = match_pairs[k, j + 1]
                    x = <int>legids[perms[r, s]]
                    y = <int>legids[perms[r, t]]
                    if x > y:
                        sg = -sg
                    partner[x] = y
                    partner[y] = x
                partner[pleg] = qleg
                partner[qleg] = pleg
                if pleg > qleg:
                    sg = -sg
                out[rank_partner(partner, npoints)] += sg * signs[r] * coeffs[k]


# --- Gram values of matchings ---------------------------------------------------

def chord_gram_rows(const int8_t[:, ::1] rot_partner, const int64_t[::1] rot_class,
                    const int64_t[::1] rot_sign, const int8_t[:, ::1] all_partner,
                    int64_t twog, int64_t[:, ::1] out):
    """out[class, M] += sign * mu_D(omega_M) for each rotated diagram D.

    mu_D(omega_M) = prod over cycles of (M u D) of (-1)^(backward + L) * 2g,
    where omega_M places sum a_i b_i - b_i a_i on the pairs of M.
    """
    cdef Py_ssize_t i, j, R = rot_partner.shape[0], K = all_partner.shape[0]
    cdef int n = rot_partner.shape[1], start, v, w, seen, back, length, sgn
    cdef int64_t val
    with nogil:
        for i in range(R):
            for j in range(K):
                seen = 0
                val = rot_sign[i]
                for start in range(n):
                    if seen & (1 << start):
                        continue
                    v = start
                    back = 0
                    length = 0
                    while True:
                        seen |= (1 << v)
                        w = all_partner[j, v]
                        if w < v:
                            back += 1
                        seen |= (1 << w)
                        v = rot_partner[i, w]
                        if v < w:
                            back += 1
                        length += 1
                        if v == start:
                            break
                    sgn = -1 if (back + length) & 1 else 1
                    val *= sgn * twog
                out[rot_class[i], j] += val


# --- dense linear algebra over F_p ------------------------------------------------

def reduce_rows_mod(uint64_t[:, ::1] M, uint64_t p):
    cdef Py_ssize_t i, j
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            M[i, j] %= p


cdef void _axpy(uint64_t* x, const uint64_t* row, uint64_t f, Py_ssize_t start,
                Py_ssize_t n, uint64_t p) nogil:
    cdef Py_ssize_t j
    for j in range(start, n):
        if row[j]:
            x[j] = submod(x[j], hc_mulmod(f, row[j], p), p)


def rref_mod(uint64_t[:, ::1] M, uint64_t p, Py_ssize_t max_col=-1):
    """In-place reduced row echelon form over F_p; returns pivot columns.
    Pivots are searched only in columns < max_col when given."""
    cdef Py_ssize_t m = M.shape[0], n = M.shape[1], r = 0, c, i, j, piv
    cdef uint64_t inv, f
    cdef uint64_t tmp
    if p >= MAX_MOD:
        raise ValueError("prime must be below 2^62")
    pivots = []
    if max_col < 0:
        max_col = n
    with nogil:
        for c in range(max_col):
            if r == m:
                break
            piv = -1
            for i in range(r, m):
                if M[i, c]:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != r:
                for j in range(n):
                    tmp = M[r, j]
                    M[r, j] = M[piv, j]
                    M[piv, j] = tmp
            inv = powmod(M[r, c], p - 2, p)
            for j in range(c, n):
                if M[r, j]:
                    M[r, j] = hc_mulmod(M[r, j], inv, p)
            for i in range(m):
                if i != r and M[i, c]:
                    f = M[i, c]
                    _axpy(&M[i, 0], &M[r, 0], f, c, n, p)
            with gil:
                pivots.append(c)
            r += 1
    return pivots


def matmul_mod(const uint64_t[:, ::1] A, const uint64_t[:, ::1] B, uint64_t p):
    cdef Py_ssize_t m = A.shape[0], k = A.shape[1], n = B.shape[1], i, j, l
    cdef uint64_t a
    out = np.zeros((m, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] C = out
    if B.shape[0] != k:
        raise ValueError("shape mismatch")
    with nogil:
        for i in range(m):
            for l in range(k):
                a = A[i, l]
                if a == 0:
                    continue
                for j in range(n):
                    if B[l, j]:
                        C[i, j] = (C[i, j] + hc_mulmod(a, B[l, j], p)) % p
    return out


def sparse_combine_mod(const uint64_t[::1] y, const int64_t[::1] indptr,
                       const int64_t[::1] indices, const uint64_t[::1] data,
                       Py_ssize_t ncols, uint64_t p):
    """sum_k y[k] * row_k for CSR rows, dense result over F_p."""
    cdef Py_ssize_t k, j
    out = np.zeros(ncols, dtype=np.uint64)
    cdef uint64_t[::1] acc = out
    cdef uint64_t f
    with nogil:
        for k in range(y.shape[0]):
            f = y[k]
            if f == 0:
                continue
            for j in range(indptr[k], indptr[k + 1]):
                acc[indices[j]] = (acc[indices[j]] + hc_mulmod(f, data[j], p)) % p
    return out


def as_mod(row, uint64_t p):
    """Entries of an int / uint / object array reduced into [0, p) as uint64."""
    arr = np.asarray(row)
    if arr.dtype == object:
        return (arr % int(p)).astype(np.uint64)
    if arr.dtype.kind == "i":
        return np.mod(arr.astype(np.int64), np.int64(p)).astype(np.uint64)
    return arr.astype(np.uint64) % np.uint64(p)


cdef class EchelonMod:
    """Incremental row echelon basis over F_p with greedy pivots.

    A new row is reduced against the stored rows in insertion order; if a
    residual survives, its first nonzero column becomes a pivot.  With
    columns listed in preference order this is greedy column selection.
    """

    cdef public uint64_t p
    cdef public Py_ssize_t ncols
    cdef public list pivots
    cdef object _rows
    cdef Py_ssize_t _cap

    def __init__(self, Py_ssize_t ncols, uint64_t p):
        if p >= MAX_MOD:
            raise ValueError("prime must be below 2^62")
        self.p = p
        self.ncols = ncols
        self.pivots = []
        self._cap = 16
        self._rows = np.zeros((self._cap, ncols), dtype=np.uint64)

    @property
    def rank(self):
        return len(self.pivots)

    def basis(self):
        return np.array(self._rows[:len(self.pivots)])

    def reduce(self, row):
        x = np.ascontiguousarray(as_mod(row, self.p))
        self._reduce(x)
        return x

    cdef void _reduce(self, uint64_t[::1] x):
        cdef uint64_t[:, ::1] rows = self._rows
        cdef Py_ssize_t k, r = len(self.pivots), c
        cdef uint64_t f, p = self.p
        cdef Py_ssize_t[::1] piv = np.asarray(self.pivots, dtype=np.intp) if r else np.zeros(1, dtype=np.intp)
        with nogil:
            for k in range(r):
                c = piv[k]
                f = x[c]
                if f:
                    _axpy(&x[0], &rows[k, 0], f, 0, self.ncols, p)

    def add(self, row):
        """Insert a row; returns the new pivot column or -1 if dependent."""
        cdef uint64_t[::1] x = np.ascontiguousarray(as_mod(row, self.p))
        cdef Py_ssize_t c, j, lead = -1
        cdef uint64_t inv
        if x.shape[0] != self.ncols:
            raise ValueError("row length mismatch")
        self._reduce(x)
        for c in range(self.ncols):
            if x[c]:
                lead = c
                break
        if lead < 0:
            return -1
        inv = powmod(x[lead], self.p - 2, self.p)
        for j in range(lead, self.ncols):
            if x[j]:
                x[j] = hc_mulmod(x[j], inv, self.p)
        if len(self.pivots) == self._cap:
            self._cap *= 2
            grown = np.zeros((self._cap, self.ncols), dtype=np.uint64)
            grown[:len(self.pivots)] = self._rows[:len(self.pivots)]
            self._rows = grown
        self._rows[len(self.pivots)] = np.asarray(x)
        self.pivots.append(lead)
        return lead
