"""The free Lie algebra L(H) inside the tensor algebra."""

from __future__ import annotations

from functools import lru_cache

from sympy import divisors, mobius

from .symplectic import Letter, SymplecticSpace, TensorElement


class LieWord:
    """A bracket expression: either a single letter or [left, right]."""

    __slots__ = ("letter", "left", "right", "degree")

    def __init__(self, letter=None, left=None, right=None):
        if letter is not None:
            self.letter = Letter(letter)
            self.left = self.right = None
            self.degree = 1
        else:
            if left is None or right is None:
                raise ValueError("a bracket needs two sides")
            self.letter = None
            self.left, self.right = left, right
            self.degree = left.degree + right.degree

    @classmethod
    def leaf(cls, x) -> "LieWord":
        return cls(letter=x)

    @classmethod
    def bracket(cls, u: "LieWord", v: "LieWord") -> "LieWord":
        return cls(left=u, right=v)

    @classmethod
    def right_normed(cls, letters) -> "LieWord":
        """[x1, [x2, [..., [x_{n-1}, x_n]]]]"""
        letters = list(letters)
        w = cls.leaf(letters[-1])
        for x in reversed(letters[:-1]):
            w = cls.bracket(cls.leaf(x), w)
        return w

    @classmethod
    def left_normed(cls, letters) -> "LieWord":
        """[[[x1, x2], x3], ..., x_n]"""
        letters = list(letters)
        w = cls.leaf(letters[0])
        for x in letters[1:]:
            w = cls.bracket(w, cls.leaf(x))
        return w

    @property
    def is_leaf(self) -> bool:
        return self.letter is not None

    def leaves(self) -> list[Letter]:
        if self.is_leaf:
            return [self.letter]
        return self.left.leaves() + self.right.leaves()

    def __eq__(self, other):
        if not isinstance(other, LieWord):
            return NotImplemented
        if self.is_leaf or other.is_leaf:
            return self.letter == other.letter and self.is_leaf == other.is_leaf
        return self.left == other.left and self.right == other.right

    def __hash__(self):
        if self.is_leaf:
            return hash(self.letter)
        return hash((self.left, self.right))

    def __str__(self):
        if self.is_leaf:
            return repr(self.letter)
        return f"[{self.left},{self.right}]"

    __repr__ = __str__


def parse_lie_word(text: str) -> LieWord:
    """Parse nested "[x,y]" strings such as "[a1,[a2,b3]]"."""
    s = text.replace(" ", "")
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(s):
            raise ValueError(f"unexpected end of {text!r}")
        if s[pos] == "[":
            pos += 1
            u = parse()
            if pos >= len(s) or s[pos] != ",":
                raise ValueError(f"expected ',' at {pos} in {text!r}")
            pos += 1
            v = parse()
            if pos >= len(s) or s[pos] != "]":
                raise ValueError(f"expected ']' at {pos} in {text!r}")
            pos += 1
            return LieWord.bracket(u, v)
        start = pos
        while pos < len(s) and s[pos] not in ",[]":
            pos += 1
        return LieWord.leaf(Letter.parse(s[start:pos]))

    w = parse()
    if pos != len(s):
        raise ValueError(f"trailing characters in {text!r}")
    return w


def _expand_terms(w: LieWord) -> dict:
    if w.is_leaf:
        return {(w.letter,): 1}
    a = _expand_terms(w.left)
    b = _expand_terms(w.right)
    out: dict = {}
    for wa, ca in a.items():
        for wb, cb in b.items():
            c = ca * cb
            k1, k2 = wa + wb, wb + wa
            v = out.get(k1, 0) + c
            if v:
                out[k1] = v
            else:
                out.pop(k1, None)
            v = out.get(k2, 0) - c
            if v:
                out[k2] = v
            else:
                out.pop(k2, None)
    return out


def expand_lie_word(w: LieWord) -> TensorElement:
    """Image of a bracket expression in the tensor algebra ([u,v] = uv - vu)."""
    return TensorElement(w.degree, _expand_terms(w))


def omega(space: SymplecticSpace) -> TensorElement:
    """omega_0 = sum_i [a_i, b_i]."""
    out = TensorElement.zero(2)
    for i in range(1, space.genus + 1):
        out = out + expand_lie_word(LieWord.bracket(LieWord.leaf(Letter.a(i)), LieWord.leaf(Letter.b(i))))
    return out


@lru_cache(maxsize=None)
def lie_dim(n: int, g: int) -> int:
    """Witt formula for dim L_n(H) with dim H = 2g."""
    if n < 1 or g < 1:
        raise ValueError("need n >= 1 and g >= 1")
    total = sum(int(mobius(d)) * (2 * g) ** (n // d) for d in divisors(n))
    assert total % n == 0
    return total // n


def bracket_map(e: TensorElement) -> TensorElement:
    """H (x) L_{k+1} -> L_{k+2}: each x (x) w goes to x w - w x."""
    if e.degree < 2:
        raise ValueError("bracket_map needs degree >= 2")
    out = TensorElement.zero(e.degree)
    terms = out.terms
    for w, c in e.terms.items():
        for key, s in ((w, c), (w[1:] + w[:1], -c)):
            v = terms.get(key, 0) + s
            if v:
                terms[key] = v
            else:
                terms.pop(key, None)
    return out


def is_h_member(e: TensorElement) -> bool:
    """True iff e lies in the kernel of the bracket map."""
    return bracket_map(e).is_zero()
