"""Ground types: the symplectic space H, its basis letters, the form mu,
tensor monomials and sparse exact-rational tensor elements.

Letters are small ints (a_i -> 2(i-1), b_i -> 2(i-1)+1) so that tuples of
letters hash and compare quickly; the int order is a_1 < b_1 < a_2 < ...
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

LETTER_BITS = 5
MAX_GENUS = 16

_LETTER_RE = re.compile(r"^([ab])(\d+)$")


class Letter(int):
    """A basis vector a_i or b_i of H, stored as its integer code."""

    __slots__ = ()

    def __new__(cls, code: int):
        if code < 0 or code >= 2 * MAX_GENUS:
            raise ValueError(f"letter code out of range: {code}")
        return super().__new__(cls, code)

    @classmethod
    def a(cls, i: int) -> "Letter":
        return cls(2 * (i - 1))

    @classmethod
    def b(cls, i: int) -> "Letter":
        return cls(2 * (i - 1) + 1)

    @classmethod
    def parse(cls, text: str) -> "Letter":
        m = _LETTER_RE.match(text.strip())
        if not m or int(m.group(2)) < 1:
            raise ValueError(f"bad letter: {text!r}")
        i = int(m.group(2))
        return cls.a(i) if m.group(1) == "a" else cls.b(i)

    @property
    def index(self) -> int:
        return (int(self) >> 1) + 1

    @property
    def kind(self) -> str:
        return "B" if int(self) & 1 else "A"

    @property
    def partner(self) -> "Letter":
        return Letter(int(self) ^ 1)

    def __repr__(self) -> str:
        return f"{'b' if int(self) & 1 else 'a'}{self.index}"

    __str__ = __repr__


def mu_code(x: int, y: int) -> int:
    """mu on raw letter codes: mu(a_i, b_i) = 1, mu(b_i, a_i) = -1, else 0."""
    if x ^ y != 1:
        return 0
    return 1 if not x & 1 else -1


def mu(x: Letter, y: Letter) -> int:
    return mu_code(int(x), int(y))


@dataclass(frozen=True)
class SymplecticSpace:
    """Configuration context carrying the genus g."""

    genus: int

    def __post_init__(self):
        if not 1 <= self.genus <= MAX_GENUS:
            raise ValueError(f"genus must be in 1..{MAX_GENUS}, got {self.genus}")

    @property
    def dim(self) -> int:
        return 2 * self.genus

    def letters(self) -> list[Letter]:
        return [Letter(c) for c in range(2 * self.genus)]

    def contains(self, x: int) -> bool:
        return 0 <= int(x) < 2 * self.genus

    def validate(self, letters: Iterable[int]) -> None:
        for x in letters:
            if not self.contains(x):
                raise ValueError(f"letter {Letter(x)} outside genus {self.genus}")

    def mu(self, x: Letter, y: Letter) -> int:
        self.validate((x, y))
        return mu_code(int(x), int(y))

    def dual(self, x: Letter) -> tuple[Letter, int]:
        """(y, s) with mu(s*y, x) = 1, i.e. the mu-dual basis vector of x."""
        self.validate((x,))
        if int(x) & 1:
            return Letter(int(x) - 1), 1
        return Letter(int(x) + 1), -1


# --- monomials ---------------------------------------------------------------

Monomial = tuple  # tuple of letter codes


def encode_monomial(word: Iterable[int]) -> int:
    """Fixed-width integer code: the degree in the low 5 bits, then one
    5-bit field per letter."""
    code = 0
    n = 0
    for x in word:
        code |= int(x) << (LETTER_BITS * (n + 1))
        n += 1
    if n >= 1 << LETTER_BITS:
        raise ValueError(f"degree {n} too large to encode")
    return code | n


def decode_monomial(code: int) -> tuple[Letter, ...]:
    mask = (1 << LETTER_BITS) - 1
    n = code & mask
    return tuple(Letter((code >> (LETTER_BITS * (k + 1))) & mask) for k in range(n))


def format_monomial(word: Iterable[int]) -> str:
    return " ".join(repr(Letter(x)) for x in word)


def parse_monomial(text: str) -> tuple[Letter, ...]:
    return tuple(Letter.parse(tok) for tok in text.split())


def format_rational(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


# --- tensor elements ---------------------------------------------------------


class TensorElement:
    """Sparse element of H^{(x) degree} with exact rational coefficients.

    ``terms`` maps tuples of letter codes to nonzero Fractions (ints are
    accepted and stored as Fractions).
    """

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms: Mapping | None = None):
        self.degree = degree
        self.terms: dict[tuple, Fraction] = {}
        if terms:
            for w, c in terms.items():
                self._add(tuple(Letter(x) for x in w), c)

    @classmethod
    def canonicalize(cls, raw: Iterable[tuple[Iterable[int], object]]) -> "TensorElement":
        """Merge a raw list of (word, coefficient) pairs sharing one degree."""
        out = None
        for w, c in raw:
            w = tuple(Letter(x) for x in w)
            if out is None:
                out = cls(len(w))
            elif len(w) != out.degree:
                raise ValueError(f"mixed degrees {out.degree} and {len(w)}")
            out._add(w, c)
        if out is None:
            raise ValueError("cannot infer degree of an empty term list")
        return out

    @classmethod
    def zero(cls, degree: int) -> "TensorElement":
        return cls(degree)

    def _add(self, w: tuple, c) -> None:
        if len(w) != self.degree:
            raise ValueError(f"monomial of degree {len(w)} in element of degree {self.degree}")
        c = Fraction(c)
        if not c:
            return
        v = self.terms.get(w, 0) + c
        if v:
            self.terms[w] = v
        else:
            self.terms.pop(w, None)

    def copy(self) -> "TensorElement":
        out = TensorElement(self.degree)
        out.terms = dict(self.terms)
        return out

    def __iter__(self) -> Iterator[tuple[tuple, Fraction]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def _check(self, other: "TensorElement") -> None:
        if not isinstance(other, TensorElement):
            raise TypeError(type(other))
        if other.degree != self.degree:
            raise ValueError(f"degree mismatch {self.degree} vs {other.degree}")

    def __add__(self, other: "TensorElement") -> "TensorElement":
        self._check(other)
        out = self.copy()
        for w, c in other.terms.items():
            out._add(w, c)
        return out

    def __neg__(self) -> "TensorElement":
        out = TensorElement(self.degree)
        out.terms = {w: -c for w, c in self.terms.items()}
        return out

    def __sub__(self, other: "TensorElement") -> "TensorElement":
        return self + (-other)

    def scale(self, s) -> "TensorElement":
        s = Fraction(s)
        out = TensorElement(self.degree)
        if s:
            out.terms = {w: c * s for w, c in self.terms.items()}
        return out

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def tensor(self, other: "TensorElement") -> "TensorElement":
        out = TensorElement(self.degree + other.degree)
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                out._add(w1 + w2, c1 * c2)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorElement):
            return NotImplemented
        return self.degree == other.degree and self.terms == other.terms

    def __hash__(self):
        return hash((self.degree, frozenset(self.terms.items())))

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms):
            parts.append(f"{format_rational(self.terms[w])} {format_monomial(w)}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TensorElement(degree={self.degree}, {self.to_text()})"


def letter_element(x: Letter) -> TensorElement:
    return TensorElement(1, {(x,): 1})
