"""numpy / pure-Python versions of the compiled kernels in ``_core``.

Same names and semantics; used when the extension is missing or when
HCOCYCLE_PURE=1.  Modular arithmetic goes through Python ints (object
arrays), so these are much slower but need no compiler.
"""

from __future__ import annotations

from itertools import permutations, product

import numpy as np

BACKEND = "python"
MAX_MOD = 1 << 62


def matching_rank(partner) -> int:
    n = len(partner)
    m = n // 2
    free = list(range(n))
    idx = 0
    for k in range(m):
        a = free[0]
        b = int(partner[a])
        d = free.index(b) - 1
        idx = idx * (2 * (m - k) - 1) + d
        free.remove(a)
        free.remove(b)
    return idx


def _rank_rows(partner: np.ndarray) -> np.ndarray:
    """Vectorized matching_rank over the rows of an (R, n) partner array."""
    R, n = partner.shape
    m = n // 2
    mask = np.full(R, (1 << n) - 1, dtype=np.int64)
    idx = np.zeros(R, dtype=np.int64)
    rows = np.arange(R)
    for k in range(m):
        low = mask & -mask
        a = np.log2(low).astype(np.int64)
        b = partner[rows, a].astype(np.int64)
        d = np.bitwise_count(mask & ((np.int64(1) << b) - 1)).astype(np.int64) - 1
        idx = idx * (2 * (m - k) - 1) + d
        mask &= ~((np.int64(1) << a) | (np.int64(1) << b))
    return idx


def mulmod(a, b, p):
    return (int(a) * int(b)) % int(p)


def contraction_counts(words, coefs, out) -> None:
    words = np.asarray(words, dtype=np.uint8)
    coefs = np.asarray(coefs, dtype=np.int64)
    if words.shape[0] == 0:
        return
    n = words.shape[1]
    if n % 2 or n > 16:
        raise ValueError("words must have even length <= 16")
    keep = coefs != 0
    words, coefs = words[keep], coefs[keep]
    if not len(words):
        return
    # rows sharing a letter multiset share the bijection structure
    sig = np.sort(words, axis=1)
    _, group = np.unique(sig, axis=0, return_inverse=True)
    group = group.reshape(-1)
    for gid in np.unique(group):
        sel = group == gid
        W, C = words[sel], coefs[sel]
        ms = sig[sel][0]
        counts = np.bincount(ms, minlength=32)
        if np.any(counts[0::2] != counts[1::2]):
            continue
        order = np.argsort(W, axis=1, kind="stable")
        blocks = []
        off = 0
        for letter in range(32):
            c = int(counts[letter])
            if letter % 2 == 0 and c:
                blocks.append((off, off + c, c))
            off += c
        R = len(W)
        rows = np.arange(R)[:, None]
        for choice in product(*[list(permutations(range(c))) for _, _, c in blocks]):
            partner = np.empty((R, n), dtype=np.int64)
            sign = np.ones(R, dtype=np.int64)
            for (start, _, c), perm in zip(blocks, choice):
                apos = order[:, start:start + c]
                bpos = order[:, start + c:start + 2 * c][:, list(perm)]
                partner[rows, apos] = bpos
                partner[rows, bpos] = apos
                sign *= np.where(apos < bpos, 1, -1).prod(axis=1)
            np.add.at(out, _rank_rows(partner), sign * C)


def symbolic_accumulate(perms, signs, legids, pleg, qleg, npoints, match_pairs, coeffs, out) -> None:
    perms = np.asarray(perms, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.int64)
    legids = np.asarray(legids, dtype=np.int64)
    R, n = perms.shape
    glob = legids[perms]
    rows = np.arange(R)
    for k in range(len(match_pairs)):
        ck = int(coeffs[k])
        if ck == 0:
            continue
        partner = np.empty((R, npoints), dtype=np.int64)
        sg = signs.copy()
        for j in range(0, n, 2):
            x = glob[:, match_pairs[k][j]]
            y = glob[:, match_pairs[k][j + 1]]
            sg = np.where(x > y, -sg, sg)
            partner[rows, x] = y
            partner[rows, y] = x
        partner[:, pleg] = qleg
        partner[:, qleg] = pleg
        if pleg > qleg:
            sg = -sg
        np.add.at(out, _rank_rows(partner), sg * ck)


def chord_gram_rows(rot_partner, rot_class, rot_sign, all_partner, twog, out) -> None:
    rot_partner = np.asarray(rot_partner, dtype=np.int64)
    all_partner = np.asarray(all_partner, dtype=np.int64)
    K, n = all_partner.shape
    cols = np.arange(K)
    for i in range(len(rot_partner)):
        D = rot_partner[i]
        seen = np.zeros((K, n), dtype=bool)
        val = np.full(K, int(rot_sign[i]), dtype=np.int64)
        for start in range(n):
            act = ~seen[:, start]
            if not act.any():
                continue
            v = np.full(K, start)
            back = np.zeros(K, dtype=np.int64)
            length = np.zeros(K, dtype=np.int64)
            running = act.copy()
            while running.any():
                seen[cols[running], v[running]] = True
                w = all_partner[cols, v]
                back += running & (w < v)
                seen[cols[running], w[running]] = True
                v2 = D[w]
                back += running & (v2 < w)
                length += running
                v = np.where(running, v2, v)
                running &= v != start
            sgn = np.where((back + length) % 2 == 1, -1, 1)
            val = np.where(act, val * sgn * int(twog), val)
        np.add.at(out, (int(rot_class[i]), cols), val)


def reduce_rows_mod(M, p) -> None:
    M %= np.uint64(p)


def _inv(a: int, p: int) -> int:
    return pow(int(a), p - 2, p)


def rref_mod(M, p, max_col=-1):
    p = int(p)
    if p >= MAX_MOD:
        raise ValueError("prime must be below 2^62")
    A = M.astype(object) % p
    m, n = A.shape
    if max_col < 0:
        max_col = n
    r = 0
    pivots = []
    for c in range(max_col):
        if r == m:
            break
        nz = [i for i in range(r, m) if A[i, c] != 0]
        if not nz:
            continue
        piv = nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        A[r] = (A[r] * _inv(A[r, c], p)) % p
        for i in range(m):
            if i != r and A[i, c] != 0:
                A[i] = (A[i] - A[i, c] * A[r]) % p
        pivots.append(c)
        r += 1
    M[...] = A.astype(np.uint64)
    return pivots


def matmul_mod(A, B, p):
    if A.shape[1] != B.shape[0]:
        raise ValueError("shape mismatch")
    return (np.dot(A.astype(object), B.astype(object)) % int(p)).astype(np.uint64)


def sparse_combine_mod(y, indptr, indices, data, ncols, p):
    p = int(p)
    acc = np.zeros(ncols, dtype=object)
    for k in range(len(y)):
        f = int(y[k])
        if not f:
            continue
        lo, hi = int(indptr[k]), int(indptr[k + 1])
        acc[indices[lo:hi]] += f * data[lo:hi].astype(object)
    return (acc % p).astype(np.uint64)


def as_mod(row, p):
    arr = np.asarray(row)
    if arr.dtype == object:
        return (arr % int(p)).astype(np.uint64)
    if arr.dtype.kind == "i":
        return np.mod(arr.astype(np.int64), np.int64(p)).astype(np.uint64)
    return arr.astype(np.uint64) % np.uint64(p)


class EchelonMod:
    """Incremental row echelon basis over F_p with greedy pivots."""

    def __init__(self, ncols: int, p: int):
        if p >= MAX_MOD:
            raise ValueError("prime must be below 2^62")
        self.p = int(p)
        self.ncols = ncols
        self.pivots: list[int] = []
        self._rows: list[np.ndarray] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def basis(self):
        if not self._rows:
            return np.zeros((0, self.ncols), dtype=np.uint64)
        return np.array([r.astype(np.uint64) for r in self._rows])

    def _reduce(self, x):
        for c, row in zip(self.pivots, self._rows):
            f = x[c]
            if f:
                x = (x - f * row) % self.p
        return x

    def reduce(self, row):
        x = as_mod(row, self.p).astype(object)
        return self._reduce(x).astype(np.uint64)

    def add(self, row) -> int:
        x = as_mod(row, self.p).astype(object)
        if len(x) != self.ncols:
            raise ValueError("row length mismatch")
        x = self._reduce(x)
        nz = np.nonzero(x)[0]
        if not len(nz):
            return -1
        lead = int(nz[0])
        x = (x * _inv(x[lead], self.p)) % self.p
        self._rows.append(x)
        self.pivots.append(lead)
        return lead
