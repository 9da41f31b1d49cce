"""Lie spiders, planar trivalent trees, derivations and brackets.

A spider S(u1,...,un) is the image of the caterpillar tree whose internal
vertices c_0..c_{n-3} carry the cyclic orders
    c_0: (u1, u2, c_1),  c_m: (c_{m-1}, u_{m+2}, c_{m+1}),  last: (c_{n-4}, u_{n-1}, u_n).
A planar tree T maps to sum_v label(v) (x) B_v where B_v is the bracket read
off by rooting T at the leaf v: a vertex entered from e with cyclic order
(e, X, Y) contributes [X, Y].

Brackets of spiders are computed by gluing trees: [P, Q] is the sum over a
leg of P and a leg of Q of mu(leg_P, leg_Q) times the tree obtained by
removing the two legs and joining their neighbours.  Expansions go through
signed permutation tables, cached per tree shape.
"""

from __future__ import annotations

import json
import os
import re
import threading
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .freelie import LieWord, expand_lie_word
from .matchings import MuPolynomial
from .symplectic import Letter, SymplecticSpace, TensorElement, mu_code

Leg = Union[Letter, str]

_FORMAL_RE = re.compile(r"^[A-Za-z_]+\d*$")


def parse_leg(tok: str) -> Leg:
    """Letters a<i>/b<i>; any other identifier (u1, v3, ...) is a formal symbol."""
    tok = tok.strip()
    m = _FORMAL_RE.match(tok)
    if not m:
        raise ValueError(f"bad leg {tok!r}")
    if re.match(r"^[ab]\d+$", tok):
        return Letter.parse(tok)
    return tok


class Spider:
    """Ordered legs; each leg is a basis Letter (numeric) or a formal symbol."""

    __slots__ = ("legs",)

    def __init__(self, legs: Iterable):
        out = []
        for x in legs:
            if isinstance(x, str):
                out.append(parse_leg(x))
            else:
                out.append(Letter(int(x)))
        if len(out) < 2:
            raise ValueError("a spider needs at least two legs")
        self.legs: tuple = tuple(out)

    @classmethod
    def parse(cls, text: str) -> "Spider":
        m = re.match(r"^\s*S\((.*)\)\s*$", text)
        if not m:
            raise ValueError(f"bad spider text {text!r}")
        return cls(parse_leg(t) for t in m.group(1).split(","))

    @property
    def leg_count(self) -> int:
        return len(self.legs)

    @property
    def degree(self) -> int:
        return len(self.legs) - 2

    @property
    def symbolic(self) -> bool:
        return any(isinstance(x, str) for x in self.legs)

    def letters_array(self) -> np.ndarray:
        if self.symbolic:
            raise ValueError("symbolic spider has no letter array")
        return np.array([int(x) for x in self.legs], dtype=np.uint8)

    def __eq__(self, other):
        return isinstance(other, Spider) and self.legs == other.legs

    def __hash__(self):
        return hash(self.legs)

    def __str__(self):
        return "S(" + ",".join(str(x) for x in self.legs) + ")"

    __repr__ = __str__

    def to_json(self) -> list:
        return [str(x) for x in self.legs]


def _leg_mu(x: Leg, y: Leg):
    """mu of two legs: an int for letters, a MuPolynomial if formal."""
    if isinstance(x, str) or isinstance(y, str):
        return MuPolynomial.symbol(str(x), str(y))
    return mu_code(int(x), int(y))


# --- planar trees -------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneTree:
    """Planar trivalent tree.  Nodes 0..n-1 are the leaves (node k carries
    leg k); the rest are internal with a cyclic neighbour triple."""

    adj: tuple
    n: int

    @classmethod
    def caterpillar(cls, n: int) -> "PlaneTree":
        return _caterpillar(n)

    def rooted(self, leaf: int):
        """Nested-tuple bracket of leg ids read from the given root leaf."""
        adj = self.adj

        def walk(node, frm):
            if node < self.n:
                return node
            nb = adj[node]
            k = nb.index(frm)
            return (walk(nb[(k + 1) % 3], node), walk(nb[(k + 2) % 3], node))

        return walk(adj[leaf][0], leaf)

    def glue(self, i: int, other: "PlaneTree", j: int) -> "PlaneTree":
        """Remove leaf i of self and leaf j of other and join their neighbours.

        Legs of the result: legs of self without i, then legs of other
        without j, each in original order.
        """
        n1, n2 = self.n, other.n
        n = n1 + n2 - 2
        lmap1 = {}
        for k in range(n1):
            if k != i:
                lmap1[k] = len(lmap1)
        lmap2 = {}
        for k in range(n2):
            if k != j:
                lmap2[k] = n1 - 1 + len(lmap2)
        nint1 = len(self.adj) - n1
        for k in range(nint1):
            lmap1[n1 + k] = n + k
        for k in range(len(other.adj) - n2):
            lmap2[n2 + k] = n + nint1 + k
        x = self.adj[i][0]
        y = other.adj[j][0]
        total = n + nint1 + len(other.adj) - n2
        adj = [None] * total
        for node, nb in enumerate(self.adj):
            if node == i:
                continue
            adj[lmap1[node]] = tuple(lmap2[y] if z == i else lmap1[z] for z in nb)
        for node, nb in enumerate(other.adj):
            if node == j:
                continue
            adj[lmap2[node]] = tuple(lmap1[x] if z == j else lmap2[z] for z in nb)
        return PlaneTree(tuple(adj), n)

    def brackets(self) -> list:
        return [(v, self.rooted(v)) for v in range(self.n)]


@lru_cache(maxsize=64)
def _caterpillar(n: int) -> PlaneTree:
    if n < 2:
        raise ValueError("need at least two legs")
    if n == 2:
        return PlaneTree(((1,), (0,)), 2)
    c = [n + m for m in range(n - 2)]
    adj: list = [None] * (2 * n - 2)
    if n == 3:
        adj[c[0]] = (0, 1, 2)
    else:
        adj[c[0]] = (0, 1, c[1])
        for m in range(1, n - 3):
            adj[c[m]] = (c[m - 1], m + 1, c[m + 1])
        adj[c[n - 3]] = (c[n - 4], n - 2, n - 1)
    for node in c:
        for z in adj[node]:
            if z < n:
                adj[z] = (node,)
    return PlaneTree(tuple(adj), n)


def _expand_bracket(b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(b, int):
        return np.array([[b]], dtype=np.int8), np.array([1], dtype=np.int8)
    pa, sa = _expand_bracket(b[0])
    pb, sb = _expand_bracket(b[1])
    na, nb = len(sa), len(sb)
    A = np.repeat(pa, nb, axis=0)
    B = np.tile(pb, (na, 1))
    s = np.repeat(sa, nb) * np.tile(sb, na)
    return np.concatenate([np.hstack([A, B]), np.hstack([B, A])]), np.concatenate([s, -s])


def _table(tree: PlaneTree) -> tuple[np.ndarray, np.ndarray]:
    P, S = [], []
    for v, b in tree.brackets():
        p, s = _expand_bracket(b)
        P.append(np.hstack([np.full((len(s), 1), v, dtype=np.int8), p]))
        S.append(s)
    perm = np.ascontiguousarray(np.concatenate(P))
    sign = np.concatenate(S).astype(np.int64)
    perm.setflags(write=False)
    sign.setflags(write=False)
    return perm, sign


class _TableCache:
    """LRU cache of signed permutation tables keyed by tree shape."""

    def __init__(self, maxsize=48):
        self.maxsize = maxsize
        self._d: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key, build):
        with self._lock:
            if key in self._d:
                self._d.move_to_end(key)
                return self._d[key]
        val = build()
        with self._lock:
            self._d[key] = val
            while len(self._d) > self.maxsize:
                self._d.popitem(last=False)
        return val


_TABLES = _TableCache()


def spider_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(perm, sign): the expansion of S(0..n-1) is sum_r sign[r] * word perm[r]."""
    return _TABLES.get(("S", n), lambda: _table(_caterpillar(n)))


def glued_table(n1: int, i: int, n2: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Table of the caterpillar n1 glued at leg i to caterpillar n2 at leg j."""
    key = ("G", n1, i, n2, j)
    return _TABLES.get(key, lambda: _table(_caterpillar(n1).glue(i, _caterpillar(n2), j)))


def tree_table(tree: PlaneTree) -> tuple[np.ndarray, np.ndarray]:
    return _TABLES.get(("T", tree.adj), lambda: _table(tree))


def merge_words(words: np.ndarray, coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge identical rows, summing coefficients; drops zero results."""
    words = np.ascontiguousarray(words, dtype=np.uint8)
    if len(words) == 0:
        return words, np.asarray(coefs, dtype=np.int64)
    view = words.view(np.dtype((np.void, words.shape[1])))
    _, first, inv = np.unique(view, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    sums = np.zeros(len(first), dtype=np.int64)
    np.add.at(sums, inv, np.asarray(coefs, dtype=np.int64))
    keep = sums != 0
    return words[first[keep]], sums[keep]


def _to_element(words: np.ndarray, coefs: np.ndarray, degree: int) -> TensorElement:
    out = TensorElement(degree)
    out.terms = {tuple(Letter(int(x)) for x in w): Fraction(int(c)) for w, c in zip(words, coefs)}
    return out


# --- expansion --------------------------------------------------------------------


class ExpansionCache:
    """Memo of spider expansions keyed by leg sequence, optionally mirrored
    to JSON files in a directory.  Concurrent writers store identical values."""

    def __init__(self, directory: str | None = None, maxsize: int = 4096):
        self.directory = directory
        self.maxsize = maxsize
        self._mem: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        if directory:
            os.makedirs(directory, exist_ok=True)

    def _path(self, key) -> str:
        return os.path.join(self.directory, "S_" + "_".join(str(x) for x in key) + ".json")

    def get(self, key):
        with self._lock:
            if key in self._mem:
                self._mem.move_to_end(key)
                return self._mem[key]
        if self.directory and os.path.exists(self._path(key)):
            with open(self._path(key)) as fh:
                data = json.load(fh)
            e = TensorElement(data["degree"])
            e.terms = {tuple(Letter(x) for x in w): Fraction(c) for w, c in data["terms"]}
            self.put(key, e, persist=False)
            return e
        return None

    def put(self, key, value: TensorElement, persist=True) -> None:
        with self._lock:
            self._mem[key] = value
            while len(self._mem) > self.maxsize:
                self._mem.popitem(last=False)
        if persist and self.directory:
            data = {"degree": value.degree,
                    "terms": [[[int(x) for x in w], str(c)] for w, c in value.terms.items()]}
            tmp = self._path(key) + f".{os.getpid()}.tmp"
            with open(tmp, "w") as fh:
                json.dump(data, fh)
            os.replace(tmp, self._path(key))


_EXPANSIONS = ExpansionCache()


def set_expansion_cache(cache: ExpansionCache) -> None:
    global _EXPANSIONS
    _EXPANSIONS = cache


def spider_words(s: Spider) -> tuple[np.ndarray, np.ndarray]:
    """Merged (words, coefs) arrays of the expansion of a numeric spider."""
    perm, sign = spider_table(s.leg_count)
    return merge_words(s.letters_array()[perm], sign)


def spider_expand(s: Spider, space: SymplecticSpace | None = None) -> TensorElement:
    """Expansion of a numeric spider in the tensor algebra (memoized)."""
    if s.symbolic:
        raise ValueError("spider_expand needs a numeric spider")
    if space is not None:
        space.validate(s.legs)
    key = tuple(int(x) for x in s.legs)
    hit = _EXPANSIONS.get(key)
    if hit is not None:
        return hit
    words, coefs = spider_words(s)
    e = _to_element(words, coefs, s.leg_count)
    _EXPANSIONS.put(key, e)
    return e


def spider_expand_formula(s: Spider) -> TensorElement:
    """Reference expansion straight from the closed formula:
    u_j (x) [[u_{j+1},[...,u_n]], [[u_1,u_2],...,u_{j-1}]] for each j."""
    u = list(s.legs)
    n = len(u)
    out = TensorElement.zero(n)
    for j in range(n):
        before, after = u[:j], u[j + 1:]
        if not before:
            b = LieWord.right_normed(after)
        elif not after:
            b = LieWord.left_normed(before)
        else:
            b = LieWord.bracket(LieWord.right_normed(after), LieWord.left_normed(before))
        head = TensorElement(1, {(u[j],): 1})
        out = out + head.tensor(expand_lie_word(b))
    return out


def tree_expand(tree: PlaneTree, legs: Sequence[int]) -> TensorElement:
    perm, sign = tree_table(tree)
    words, coefs = merge_words(np.asarray(legs, dtype=np.uint8)[perm], sign)
    return _to_element(words, coefs, tree.n)


# --- derivations ------------------------------------------------------------------


class DerivationTable:
    """x -> D(x) for every basis letter of the space."""

    def __init__(self, space: SymplecticSpace, values: dict):
        self.space = space
        self.values = values

    @property
    def degree(self) -> int:
        for v in self.values.values():
            return v.degree - 1
        return 0

    def __getitem__(self, x) -> TensorElement:
        return self.values[Letter(x)]

    def apply(self, e: TensorElement) -> TensorElement:
        """Extend to the tensor algebra by the Leibniz rule."""
        out = TensorElement.zero(e.degree + self.degree)
        terms = out.terms
        for w, c in e.terms.items():
            for p in range(len(w)):
                dv = self.values[w[p]]
                pre, post = w[:p], w[p + 1:]
                for w2, c2 in dv.terms.items():
                    key = pre + w2 + post
                    v = terms.get(key, 0) + c * c2
                    if v:
                        terms[key] = v
                    else:
                        terms.pop(key, None)
        return out

    def reassemble(self) -> TensorElement:
        """sum_x x^ (x) D(x), with x^ the mu-dual of x, so that
        reassemble(derivation_of(e)) == e."""
        out = TensorElement.zero(self.degree + 2)
        for x in self.space.letters():
            y, s = self.space.dual(x)
            d = self.values[x]
            if d:
                out = out + TensorElement(1, {(y,): s}).tensor(d)
        return out


def derivation_of(e: TensorElement, space: SymplecticSpace, check: bool = False) -> DerivationTable:
    """Table x -> sum mu(u, x) w for e = sum u (x) w."""
    if check:
        from .freelie import is_h_member
        if not is_h_member(e):
            import warnings
            warnings.warn("element is not in the kernel of the bracket map")
    vals = {}
    for x in space.letters():
        vals[x] = TensorElement.zero(e.degree - 1)
    for w, c in e.terms.items():
        u = w[0]
        for x in space.letters():
            m = mu_code(int(u), int(x))
            if m:
                vals[x]._add(w[1:], c * m)
    return DerivationTable(space, vals)


def derivation_commutator_oracle(P: Spider, Q: Spider, space: SymplecticSpace) -> TensorElement:
    """Element of H (x) L whose derivation is D_P D_Q - D_Q D_P."""
    dP = derivation_of(spider_expand(P, space), space)
    dQ = derivation_of(spider_expand(Q, space), space)
    vals = {}
    for x in space.letters():
        vals[x] = dP.apply(dQ[x]) - dQ.apply(dP[x])
    return DerivationTable(space, vals).reassemble()


# --- brackets ------------------------------------------------------------------------


class TreeSum:
    """Linear combination of (planar tree, leg labels) with int or
    MuPolynomial coefficients."""

    def __init__(self, n: int):
        self.n = n
        self.terms: list = []  # (coef, tree, legs)

    def add(self, coef, tree: PlaneTree, legs: tuple) -> None:
        self.terms.append((coef, tree, legs))

    def expand(self) -> TensorElement:
        out = TensorElement.zero(self.n)
        for coef, tree, legs in self.terms:
            out = out + tree_expand(tree, [int(x) for x in legs]).scale(coef)
        return out


def tree_bracket(P: Spider, Q: Spider) -> TreeSum:
    out = TreeSum(P.leg_count + Q.leg_count - 2)
    tP = _caterpillar(P.leg_count)
    tQ = _caterpillar(Q.leg_count)
    for i, x in enumerate(P.legs):
        for j, y in enumerate(Q.legs):
            m = _leg_mu(x, y)
            if isinstance(m, int) and not m:
                continue
            legs = P.legs[:i] + P.legs[i + 1:] + Q.legs[:j] + Q.legs[j + 1:]
            out.add(m, tP.glue(i, tQ, j), legs)
    return out


def right_normed_terms(b) -> dict:
    """Rewrite a nested-tuple bracket as {(x1,...,xk): coef} meaning
    sum coef * [x1,[x2,[...,xk]]]."""
    if isinstance(b, int):
        return {(b,): 1}
    U = right_normed_terms(b[0])
    V = right_normed_terms(b[1])
    out: dict = {}
    for u, cu in U.items():
        for v, cv in V.items():
            for w, c in _rn_bracket(u, v).items():
                t = out.get(w, 0) + c * cu * cv
                if t:
                    out[w] = t
                else:
                    out.pop(w, None)
    return out


@lru_cache(maxsize=None)
def _rn_bracket_cached(u: tuple, v: tuple) -> tuple:
    if len(u) == 1:
        return ((u + v, 1),)
    x, rest = u[:1], u[1:]
    # [[x, R], V] = [x, [R, V]] - [R, [x, V]]
    out: dict = {}
    for w, c in _rn_bracket_cached(rest, v):
        for w2, c2 in _rn_bracket_cached(x, w):
            out[w2] = out.get(w2, 0) + c * c2
    for w, c in _rn_bracket_cached(x, v):
        for w2, c2 in _rn_bracket_cached(rest, w):
            out[w2] = out.get(w2, 0) - c * c2
    return tuple((w, c) for w, c in out.items() if c)


def _rn_bracket(u: tuple, v: tuple) -> dict:
    return dict(_rn_bracket_cached(u, v))


class SpiderSum:
    """Linear combination of spiders with Fraction or MuPolynomial coefficients."""

    def __init__(self, terms: dict | None = None):
        self.terms: dict = {}
        for s, c in (terms or {}).items():
            self.add(s, c)

    def add(self, s: Spider, c) -> None:
        if isinstance(c, MuPolynomial):
            v = self.terms.get(s, MuPolynomial()) + c
            if v.is_zero():
                self.terms.pop(s, None)
            else:
                self.terms[s] = v
            return
        c = Fraction(c)
        if not c:
            return
        v = self.terms.get(s, 0) + c
        if v:
            self.terms[s] = v
        else:
            self.terms.pop(s, None)

    def __len__(self):
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def expand(self, degree: int | None = None) -> TensorElement:
        """Expansion; ``degree`` (tensor degree) is only needed to type an
        empty sum."""
        out = None
        for s, c in self.terms.items():
            e = spider_expand(s).scale(c)
            out = e if out is None else out + e
        if out is None:
            return TensorElement.zero(degree if degree is not None else 2)
        return out

    def to_json(self) -> list:
        items = []
        for s, c in sorted(self.terms.items(), key=lambda kv: str(kv[0])):
            coef = c.to_text() if isinstance(c, MuPolynomial) else str(c)
            items.append({"coefficient": coef, "legs": s.to_json()})
        return items

    @classmethod
    def from_json(cls, items) -> "SpiderSum":
        out = cls()
        for it in items:
            out.add(Spider(it["legs"]), Fraction(it["coefficient"]))
        return out


def spider_bracket(P: Spider, Q: Spider) -> SpiderSum:
    """[P, Q] as a sum of spiders.

    Each glued tree is rooted at its first leg v and its bracket rewritten
    in right-normed form; [x1,[x2,...,xk]] rooted at v is the spider
    S(v, x1, ..., xk).
    """
    out = SpiderSum()
    for coef, tree, legs in tree_bracket(P, Q).terms:
        for w, c in right_normed_terms(tree.rooted(0)).items():
            s = Spider((legs[0],) + tuple(legs[k] for k in w))
            out.add(s, coef * c if isinstance(coef, MuPolynomial) else Fraction(coef * c))
    return out
