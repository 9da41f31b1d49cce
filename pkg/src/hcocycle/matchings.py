"""Perfect matchings of tensor slots (multiple contractions), formal
mu-polynomials and chord diagrams.

Slots are 0-based internally; text and JSON forms are 1-based.
Matchings are ranked lexicographically: the partner of the smallest free
slot is chosen first, smallest partner first.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .symplectic import TensorElement, mu_code


def double_factorial_odd(m: int) -> int:
    """(2m-1)!!, the number of perfect matchings of 2m points."""
    out = 1
    for k in range(1, 2 * m, 2):
        out *= k
    return out


class Matching:
    """A perfect matching stored as sorted pairs (i, j) with i < j."""

    __slots__ = ("pairs", "_partner")

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        ps = sorted((min(i, j), max(i, j)) for i, j in pairs)
        n = 2 * len(ps)
        seen = sorted(x for p in ps for x in p)
        if seen != list(range(n)):
            raise ValueError(f"not a perfect matching of 0..{n - 1}: {ps}")
        self.pairs = tuple(ps)
        partner = [0] * n
        for i, j in ps:
            partner[i], partner[j] = j, i
        self._partner = tuple(partner)

    @property
    def size(self) -> int:
        return 2 * len(self.pairs)

    @property
    def partner(self) -> tuple[int, ...]:
        return self._partner

    @classmethod
    def from_partner(cls, partner: Sequence[int]) -> "Matching":
        return cls((i, int(j)) for i, j in enumerate(partner) if i < j)

    def rank(self) -> int:
        return int(kernels.matching_rank(list(self._partner)))

    @classmethod
    def unrank(cls, idx: int, n: int) -> "Matching":
        m = n // 2
        free = list(range(n))
        pairs = []
        radices = [2 * (m - k) - 1 for k in range(m)]
        digits = []
        for r in reversed(radices):
            digits.append(idx % r)
            idx //= r
        if idx:
            raise ValueError("rank out of range")
        digits.reverse()
        for d in digits:
            a = free.pop(0)
            b = free.pop(d)
            pairs.append((a, b))
        return cls(pairs)

    def __eq__(self, other):
        return isinstance(other, Matching) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def to_text(self) -> str:
        return "".join(f"({i + 1},{j + 1})" for i, j in self.pairs)

    __str__ = to_text

    def __repr__(self):
        return f"Matching({self.to_text()})"

    @classmethod
    def parse(cls, text: str) -> "Matching":
        pairs = re.findall(r"\((\d+)\s*,\s*(\d+)\)", text)
        if not pairs:
            raise ValueError(f"bad matching text {text!r}")
        return cls((int(i) - 1, int(j) - 1) for i, j in pairs)

    def to_json(self) -> list:
        return [[i + 1, j + 1] for i, j in self.pairs]

    @classmethod
    def from_json(cls, obj) -> "Matching":
        return cls((int(i) - 1, int(j) - 1) for i, j in obj)


def _gen_matchings(points: list[int]):
    if not points:
        yield []
        return
    a = points[0]
    for k in range(1, len(points)):
        rest = points[1:k] + points[k + 1:]
        for tail in _gen_matchings(rest):
            yield [(a, points[k])] + tail


def all_matchings(m: int) -> list[Matching]:
    """All (2m-1)!! matchings of 2m slots, in rank order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return [Matching(p) for p in _gen_matchings(list(range(2 * m)))]


@lru_cache(maxsize=8)
def partner_table(n: int) -> np.ndarray:
    """int8 array (count, n): row k is the partner array of matching k."""
    rows = [Matching(p).partner for p in _gen_matchings(list(range(n)))]
    return np.array(rows, dtype=np.int8)


def block_size(n: int) -> int:
    """Matchings containing the pair (0,1) are exactly ranks 0..block_size-1."""
    return double_factorial_odd(n // 2 - 1)


# --- numeric contraction ---------------------------------------------------------


def contract(e: TensorElement, M: Matching) -> Fraction:
    """Sum over monomials of coefficient * prod mu(x_i, x_j) over pairs of M."""
    if e.degree != M.size:
        raise ValueError(f"degree {e.degree} does not match matching on {M.size} slots")
    total = Fraction(0)
    for w, c in e.terms.items():
        v = 1
        for i, j in M.pairs:
            f = mu_code(w[i], w[j])
            if not f:
                v = 0
                break
            v *= f
        if v:
            total += c * v
    return total


def contraction_vector(words: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    """Values of all matchings on sum_r coefs[r] * words[r] (int64, rank order)."""
    words = np.ascontiguousarray(words, dtype=np.uint8)
    n = words.shape[1]
    out = np.zeros(double_factorial_odd(n // 2), dtype=np.int64)
    kernels.contraction_counts(words, np.ascontiguousarray(coefs, dtype=np.int64), out)
    return out


def element_arrays(e: TensorElement) -> tuple[np.ndarray, np.ndarray, int]:
    """(words, integer coefficients, common denominator) of an element."""
    den = 1
    for c in e.terms.values():
        den = den * c.denominator // _gcd(den, c.denominator)
    words = np.array([list(w) for w in e.terms], dtype=np.uint8).reshape(len(e.terms), e.degree)
    coefs = np.array([int(c * den) for c in e.terms.values()], dtype=np.int64)
    return words, coefs, den


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


# --- formal mu-polynomials -----------------------------------------------------------


def symbol_key(s: str):
    m = re.match(r"^([A-Za-z_]+)(\d*)$", s)
    if not m:
        raise ValueError(f"bad formal symbol {s!r}")
    return (m.group(1), int(m.group(2) or 0))


class MuPolynomial:
    """Polynomial in the formal symbols mu(u, v), stored with u < v.

    Keys are tuples of sorted (u, v) pairs; values are nonzero Fractions.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[tuple, Fraction] = {}
        if terms:
            for k, c in terms.items():
                self._add_monomial(k, c)

    @staticmethod
    def _canon(pairs) -> tuple[tuple, int]:
        sign = 1
        out = []
        for u, v in pairs:
            if u == v:
                return (), 0
            if symbol_key(u) > symbol_key(v):
                u, v = v, u
                sign = -sign
            out.append((u, v))
        out.sort(key=lambda p: (symbol_key(p[0]), symbol_key(p[1])))
        return tuple(out), sign

    def _add_monomial(self, pairs, c) -> None:
        key, s = self._canon(pairs)
        c = Fraction(c) * s
        if not c:
            return
        v = self.terms.get(key, 0) + c
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)

    @classmethod
    def symbol(cls, u: str, v: str) -> "MuPolynomial":
        return cls({((u, v),): 1})

    @classmethod
    def constant(cls, c) -> "MuPolynomial":
        return cls({(): c})

    def __add__(self, other: "MuPolynomial") -> "MuPolynomial":
        out = MuPolynomial()
        out.terms = dict(self.terms)
        for k, c in other.terms.items():
            out._add_monomial(k, c)
        return out

    def __neg__(self):
        out = MuPolynomial()
        out.terms = {k: -c for k, c in self.terms.items()}
        return out

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, MuPolynomial):
            other = MuPolynomial.constant(other)
        out = MuPolynomial()
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                out._add_monomial(k1 + k2, c1 * c2)
        return out

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, MuPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def substitute(self, values: dict) -> Fraction:
        """Replace each formal symbol by a basis letter code and evaluate."""
        total = Fraction(0)
        for k, c in self.terms.items():
            v = 1
            for u, w in k:
                v *= mu_code(int(values[u]), int(values[w]))
                if not v:
                    break
            total += c * v
        return total

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms, key=lambda k: [(symbol_key(u), symbol_key(v)) for u, v in k]):
            mono = "".join(f"mu({u},{v})" for u, v in k) or "1"
            parts.append(f"{self.terms[k]}*{mono}")
        return " + ".join(parts)

    def __repr__(self):
        return f"MuPolynomial({self.to_text()})"


def symbolic_contract(monomial: Sequence[str], M: Matching) -> MuPolynomial:
    """prod mu(u_i, u_j) over the pairs of M, as one canonical monomial."""
    if len(monomial) != M.size:
        raise ValueError("monomial length does not match the matching")
    out = MuPolynomial()
    out._add_monomial([(monomial[i], monomial[j]) for i, j in M.pairs], 1)
    return out


# --- chord diagrams ---------------------------------------------------------------


def rotate_matching(partner: Sequence[int], r: int) -> tuple[tuple[int, ...], int]:
    """Matching D' with mu_D(rot_r w) = sign * mu_D'(w), where (rot_r w)_i = w_{i+r}.

    Returns (partner array of D', sign).
    """
    k = len(partner)
    out = [0] * k
    sign = 1
    for i in range(k):
        j = partner[i]
        if i < j:
            x, y = (i + r) % k, (j + r) % k
            out[x], out[y] = y, x
            if x > y:
                sign = -sign
    return tuple(out), sign


class ChordDiagram:
    """A matching of k cyclically arranged points up to rotation, stored as
    the lexicographically least rotated partner array."""

    __slots__ = ("partner",)

    def __init__(self, partner: Sequence[int]):
        k = len(partner)
        self.partner = min(rotate_matching(tuple(partner), r)[0] for r in range(k))

    @property
    def k(self) -> int:
        return len(self.partner)

    def orbit(self) -> list[tuple[tuple[int, ...], int]]:
        """(rotated partner array, sign) for r = 0..k-1."""
        return [rotate_matching(self.partner, r) for r in range(self.k)]

    def vanishes(self) -> bool:
        """True when a rotation fixing D reverses the sign of mu_D, so the
        induced functional on coinvariants is zero."""
        for p, s in self.orbit():
            if p == self.partner and s < 0:
                return True
        return False

    def matching(self) -> Matching:
        return Matching.from_partner(self.partner)

    def __eq__(self, other):
        return isinstance(other, ChordDiagram) and self.partner == other.partner

    def __hash__(self):
        return hash(self.partner)

    def __repr__(self):
        return f"ChordDiagram({self.matching().to_text()})"


def chord_classes(k: int) -> list[ChordDiagram]:
    """All rotation classes of matchings on k points, sorted by representative."""
    if k % 2 or k < 2:
        raise ValueError("k must be even and positive")
    reps = set()
    for row in partner_table(k):
        reps.add(ChordDiagram(tuple(int(x) for x in row)).partner)
    return [ChordDiagram(p) for p in sorted(reps)]


def es_functional(D: ChordDiagram) -> dict[int, int]:
    """The functional e -> phi_D(ES(e)) on (k+2)-slot tensors, as
    {rank of matching (0,1) u (D'+2): coefficient}, summed over the orbit."""
    out: dict[int, int] = {}
    for p, s in D.orbit():
        full = [1, 0] + [x + 2 for x in p]
        idx = int(kernels.matching_rank(full))
        out[idx] = out.get(idx, 0) + s
    return {i: c for i, c in out.items() if c}
