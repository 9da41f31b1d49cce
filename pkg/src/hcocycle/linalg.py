"""Exact and modular linear algebra: sparse matrices over Q and F_p, ranks,
kernels, CRT and rational reconstruction."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import prevprime

from . import kernels

# primes just below 2^62 (the compiled mulmod needs p < 2^62)
PRIMES = (
    4611686018427387847,
    4611686018427387817,
    4611686018427387787,
    4611686018427387761,
    4611686018427387751,
    4611686018427387737,
)
DEFAULT_PRIMES = PRIMES[:2]
EXACT_LIMIT = 400  # max(rows, cols) accepted by rank_exact


class SizeLimitExceeded(RuntimeError):
    pass


class ReconstructionError(RuntimeError):
    """Rational reconstruction failed; more primes are needed."""


class SparseMatrixQ:
    """Row-major sparse matrix with Fraction entries (no stored zeros)."""

    field = "Q"

    def __init__(self, nrows: int, ncols: int, rows: Sequence[dict] | None = None):
        self.nrows, self.ncols = nrows, ncols
        self.rows: list[dict] = [dict() for _ in range(nrows)]
        if rows is not None:
            if len(rows) != nrows:
                raise ValueError("row count mismatch")
            for i, r in enumerate(rows):
                for j, v in r.items():
                    self[i, j] = v

    def _coerce(self, v):
        return Fraction(v)

    def __setitem__(self, key, value):
        i, j = key
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError(key)
        v = self._coerce(value)
        if v:
            self.rows[i][j] = v
        else:
            self.rows[i].pop(j, None)

    def __getitem__(self, key):
        i, j = key
        return self.rows[i].get(j, self._coerce(0))

    @classmethod
    def from_dense(cls, A, **kw):
        A = [list(r) for r in A]
        nrows = len(A)
        ncols = len(A[0]) if nrows else kw.pop("ncols", 0)
        out = cls(nrows, ncols, **kw)
        for i, r in enumerate(A):
            for j, v in enumerate(r):
                if v:
                    out[i, j] = v
        return out

    def to_dense(self) -> list[list]:
        z = self._coerce(0)
        return [[r.get(j, z) for j in range(self.ncols)] for r in self.rows]

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def mod(self, p: int) -> "SparseMatrixMod":
        out = SparseMatrixMod(self.nrows, self.ncols, p)
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i, j] = v
        return out

    def matvec(self, v: Sequence) -> list:
        return [sum((c * v[j] for j, c in r.items()), self._coerce(0)) for r in self.rows]

    # snapshot text format: header line then "row col value" triples
    def to_text(self) -> str:
        lines = [f"{self.nrows} {self.ncols} {self.field}"]
        for i, r in enumerate(self.rows):
            for j in sorted(r):
                lines.append(f"{i} {j} {r[j]}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        nrows, ncols, field = lines[0].split()
        if field == "Q":
            out = SparseMatrixQ(int(nrows), int(ncols))
        elif field.startswith("F"):
            out = SparseMatrixMod(int(nrows), int(ncols), int(field[1:]))
        else:
            raise ValueError(f"unknown field {field!r}")
        for ln in lines[1:]:
            i, j, v = ln.split()
            out[int(i), int(j)] = Fraction(v) if field == "Q" else int(v)
        return out


class SparseMatrixMod(SparseMatrixQ):
    """Sparse matrix over F_p with entries in [0, p)."""

    def __init__(self, nrows: int, ncols: int, p: int, rows=None):
        if p <= 1 << 31:
            raise ValueError("modulus must exceed 2^31")
        self.p = int(p)
        super().__init__(nrows, ncols, rows)

    @property
    def field(self):
        return f"F{self.p}"

    def _coerce(self, v):
        if isinstance(v, Fraction):
            return v.numerator * pow(v.denominator, -1, self.p) % self.p
        return int(v) % self.p

    @classmethod
    def from_dense(cls, A, p: int):
        return super().from_dense(A, p=p)

    def matvec(self, v):
        return [sum(c * v[j] for j, c in r.items()) % self.p for r in self.rows]


def as_integer_matrix(M: SparseMatrixQ) -> list[dict]:
    """Rows scaled by their common denominators (rank-preserving)."""
    out = []
    for r in M.rows:
        den = 1
        for v in r.values():
            den = den * v.denominator // math.gcd(den, v.denominator)
        out.append({j: int(v * den) for j, v in r.items()})
    return out


# --- ranks ---------------------------------------------------------------------


def rank_mod(M: SparseMatrixMod) -> int:
    """Rank over F_p by sparse elimination with Markowitz pivoting.

    The pivot minimizes (row nnz - 1) * (col nnz - 1); ties go to the
    smallest (row, col).
    """
    p = M.p
    rows = {i: dict(r) for i, r in enumerate(M.rows) if r}
    cols: dict[int, set] = {}
    for i, r in rows.items():
        for j in r:
            cols.setdefault(j, set()).add(i)
    rank = 0
    while rows:
        best = None
        for i in sorted(rows):
            ri = len(rows[i]) - 1
            for j in sorted(rows[i]):
                cost = (ri * (len(cols[j]) - 1), i, j)
                if best is None or cost < best:
                    best = cost
            if best[0] == 0:
                break
        _, pi, pj = best
        prow = rows.pop(pi)
        for j in prow:
            cols[j].discard(pi)
        inv = pow(prow[pj], p - 2, p)
        for i in sorted(cols[pj]):
            r = rows[i]
            f = r[pj] * inv % p
            for j, v in prow.items():
                nv = (r.get(j, 0) - f * v) % p
                if nv:
                    if j not in r:
                        cols[j].add(i)
                    r[j] = nv
                elif j in r:
                    del r[j]
                    cols[j].discard(i)
            if not r:
                del rows[i]
        rank += 1
    return rank


def rank_exact(M: SparseMatrixQ, limit: int = EXACT_LIMIT) -> int:
    """Rank over Q by fraction-free (Bareiss) elimination."""
    if max(M.nrows, M.ncols) > limit:
        raise SizeLimitExceeded(f"{M.nrows}x{M.ncols} exceeds exact limit {limit}")
    A = [[r.get(j, 0) for j in range(M.ncols)] for r in as_integer_matrix(M)]
    return bareiss_rank(A)


def bareiss_rank(A: list[list[int]]) -> int:
    A = [list(r) for r in A]
    m = len(A)
    n = len(A[0]) if m else 0
    prev = 1
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        for i in range(r + 1, m):
            for j in range(c + 1, n):
                A[i][j] = (A[i][j] * A[r][c] - A[i][c] * A[r][j]) // prev
            A[i][c] = 0
        prev = A[r][c]
        r += 1
        if r == m:
            break
    return r


def dense_rank_mod(A: np.ndarray, p: int) -> int:
    """Rank of an integer array over F_p via the dense kernel."""
    M = _to_mod(A, p)
    return len(kernels.rref_mod(M, p))


def _to_mod(A, p: int) -> np.ndarray:
    A = np.asarray(A)
    if A.dtype == object:
        return np.ascontiguousarray((A % p).astype(np.uint64))
    return np.ascontiguousarray(np.mod(A.astype(np.int64), np.int64(p)).astype(np.uint64))


# --- kernels ----------------------------------------------------------------------


def nullspace(M: SparseMatrixQ) -> list[list]:
    """Basis of the right kernel, each vector re-verified (exactly or mod p)."""
    mod = isinstance(M, SparseMatrixMod)
    p = M.p if mod else None
    A = M.to_dense()
    m, n = M.nrows, M.ncols
    piv = []
    r = 0
    for c in range(n):
        k = next((i for i in range(r, m) if A[i][c]), None)
        if k is None:
            continue
        A[r], A[k] = A[k], A[r]
        inv = pow(A[r][c], p - 2, p) if mod else 1 / A[r][c]
        A[r] = [(x * inv) % p if mod else x * inv for x in A[r]]
        for i in range(m):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [((x - f * y) % p) if mod else x - f * y for x, y in zip(A[i], A[r])]
        piv.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in set(piv)]
    zero = 0 if mod else Fraction(0)
    basis = []
    for f in free:
        v = [zero] * n
        v[f] = 1 if mod else Fraction(1)
        for k, c in enumerate(piv):
            v[c] = (-A[k][f]) % p if mod else -A[k][f]
        if any(M.matvec(v)):
            raise ArithmeticError("kernel vector failed verification")
        basis.append(v)
    return basis


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> tuple[int, int]:
    inv = pow(m1 % m2, -1, m2)
    return r1 + m1 * (((r2 - r1) * inv) % m2), m1 * m2


def rational_reconstruct(a: int, m: int) -> Fraction | None:
    """r/s = a mod m with |r|, s <= sqrt(m/2), or None."""
    a %= m
    bound = math.isqrt(m // 2)
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound or math.gcd(r1, abs(s1)) != 1:
        return None
    return Fraction(r1, s1)


def lift_mod_to_rational(v: Sequence[int], p: int, matrix: SparseMatrixQ | None = None) -> list[Fraction]:
    """Rational reconstruction of a vector; verified M v = 0 when a matrix is given."""
    out = []
    for x in v:
        q = rational_reconstruct(int(x), p)
        if q is None:
            raise ReconstructionError("entry not reconstructible; use more primes")
        out.append(q)
    if matrix is not None and any(matrix.matvec(out)):
        raise ReconstructionError("reconstructed vector is not in the kernel")
    return out


def primitive_integer(v: Sequence[Fraction]) -> list[int]:
    den = 1
    for x in v:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    return [x // g for x in ints] if g else ints


def exact_product(A: np.ndarray, V) -> np.ndarray:
    """A @ V over Z with Python-int results; A is a small-entry int array,
    V an integer (possibly object) array of vectors as columns."""
    A = np.asarray(A)
    V = np.asarray(V, dtype=object)
    if V.ndim == 1:
        V = V[:, None]
    amax = int(np.abs(A.astype(object)).max()) if A.size else 0
    if amax >= 1 << 31:
        return np.dot(A.astype(object), V)
    A64 = A.astype(np.int64)
    # split V into signed base-2^20 digits so each int64 product is exact
    base = 1 << 20
    digits = []
    rest = V.copy()
    while any(x != 0 for x in rest.flat):
        d = np.vectorize(lambda x: ((x + base // 2) % base) - base // 2, otypes=[object])(rest)
        digits.append(d.astype(np.int64))
        rest = (rest - d) // base
    out = np.zeros((A.shape[0], V.shape[1]), dtype=object)
    scale = 1
    for d in digits:
        out += (A64 @ d).astype(object) * scale
        scale *= base
    return out


def integer_kernel(A: np.ndarray, primes: Sequence[int] = PRIMES):
    """Right kernel of an integer matrix as primitive integer vectors.

    Reduced echelon forms modulo successive primes are combined by CRT and
    rationally reconstructed; the result is returned only after exact
    verification A v = 0 over Z.  Returns (vectors, rank, primes_used).
    """
    A = np.asarray(A)
    m, n = A.shape
    acc = None
    modulus = 1
    pivots_ref = None
    used = []
    for p in primes:
        M = _to_mod(A, p)
        piv = kernels.rref_mod(M, p)
        if pivots_ref is not None and piv != pivots_ref:
            if len(piv) < len(pivots_ref):
                continue  # unlucky prime
            acc, modulus, used = None, 1, []
        pivots_ref = piv
        used.append(p)
        r = len(piv)
        free = [c for c in range(n) if c not in set(piv)]
        block = M[:r][:, free].astype(object) if free else np.zeros((r, 0), dtype=object)
        if acc is None:
            acc, modulus = block, p
        else:
            inv = pow(modulus % p, -1, p)
            acc = acc + modulus * (((block - acc) * inv) % p)
            modulus *= p
        if not free:
            return [], r, used
        rec = np.empty(acc.shape, dtype=object)
        ok = True
        for idx, x in np.ndenumerate(acc):
            q = rational_reconstruct(int(x), modulus)
            if q is None:
                ok = False
                break
            rec[idx] = q
        if not ok:
            continue
        vecs = []
        for k, f in enumerate(free):
            v = [Fraction(0)] * n
            v[f] = Fraction(1)
            for i, c in enumerate(piv):
                v[c] = -rec[i, k]
            vecs.append(primitive_integer(v))
        V = np.array(vecs, dtype=object).T
        if not np.all(exact_product(A, V) == 0):
            continue
        return vecs, r, used
    raise ReconstructionError(f"kernel not reconstructed with {len(used)} primes")


def prime_stream():
    """PRIMES, then further primes below them, without end."""
    yield from PRIMES
    p = PRIMES[-1]
    while True:
        p = prevprime(p)
        yield p


def solve_integer(A: np.ndarray, b, max_primes: int = 400):
    """A particular rational solution of A y = b (free variables set to 0).

    Works modulo successive primes, combines the pivot entries by CRT and
    returns only after exact verification A y = b over Z.  Returns
    (y, rank, primes_used), or (None, rank, primes_used) when the system is
    inconsistent modulo two primes.
    """
    A = np.asarray(A)
    b = np.asarray(b, dtype=object)
    m, n = A.shape
    acc, modulus, pivots_ref = None, 1, None
    used, inconsistent = [], 0
    for count, p in enumerate(prime_stream()):
        if count >= max_primes:
            break
        aug = np.concatenate([_to_mod(A, p), kernels.as_mod(b, p).reshape(m, 1)], axis=1)
        aug = np.ascontiguousarray(aug)
        piv = list(kernels.rref_mod(aug, p))
        if piv and piv[-1] == n:
            inconsistent += 1
            used.append(p)
            if inconsistent >= 2:
                return None, len(piv) - 1, used
            continue
        if pivots_ref is not None and piv != pivots_ref:
            if len(piv) < len(pivots_ref):
                continue  # unlucky prime
            acc, modulus, used = None, 1, []
        pivots_ref = piv
        used.append(p)
        col = aug[:len(piv), n].astype(object)
        if acc is None:
            acc, modulus = col, p
        else:
            inv = pow(modulus % p, -1, p)
            acc = acc + modulus * (((col - acc) * inv) % p)
            modulus *= p
        rec = []
        for x in acc:
            q = rational_reconstruct(int(x), modulus)
            if q is None:
                break
            rec.append(q)
        if len(rec) < len(piv):
            continue
        y = [Fraction(0)] * n
        for c, q in zip(piv, rec):
            y[c] = q
        den = 1
        for q in rec:
            den = den * q.denominator // math.gcd(den, q.denominator)
        yi = np.array([int(q * den) for q in y], dtype=object)
        if np.all(exact_product(A, yi)[:, 0] == b * den):
            return y, len(piv), used
    raise ReconstructionError(f"solution not reconstructed with {len(used)} primes")
