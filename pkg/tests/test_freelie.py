import itertools

import numpy as np
import pytest

from hcocycle.freelie import (LieWord, bracket_map, expand_lie_word, is_h_member, lie_dim, omega,
                              parse_lie_word)
from hcocycle.linalg import PRIMES, dense_rank_mod
from hcocycle.symplectic import Letter, SymplecticSpace, TensorElement


def test_parse_and_expand():
    w = parse_lie_word("[a1,[b1,a2]]")
    e = expand_lie_word(w)
    assert e.degree == 3
    a1, b1, a2 = Letter.a(1), Letter.b(1), Letter.a(2)
    assert e.terms[(a1, b1, a2)] == 1 and e.terms[(b1, a2, a1)] == -1
    assert expand_lie_word(parse_lie_word("[a1,a1]")).is_zero()


def _span_rank(n, g):
    """Rank of the expanded left-normed brackets of all letter words."""
    letters = SymplecticSpace(g).letters()
    rows, index = [], {}
    for w in itertools.product(letters, repeat=n):
        e = expand_lie_word(LieWord.left_normed(w))
        rows.append(e.terms)
        for k in e.terms:
            index.setdefault(k, len(index))
    M = np.zeros((len(rows), len(index)), dtype=np.int64)
    for i, t in enumerate(rows):
        for k, c in t.items():
            M[i, index[k]] = int(c)
    return dense_rank_mod(M, PRIMES[0]) if len(index) else 0


@pytest.mark.parametrize("n,g", [(1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (2, 2), (3, 2), (4, 2),
                                 (5, 2), (2, 3), (3, 3), (4, 3)])
def test_witt_formula_matches_span(n, g):
    assert lie_dim(n, g) == _span_rank(n, g)


@pytest.mark.parametrize("n,g,d", [(1, 3, 6), (2, 3, 15), (3, 3, 70), (4, 3, 315), (5, 3, 1554),
                                   (6, 3, 7735), (6, 2, 670), (5, 2, 204)])
def test_witt_values(n, g, d):
    assert lie_dim(n, g) == d


def test_bracket_map_and_membership():
    sp = SymplecticSpace(2)
    w = omega(sp)
    # omega is antisymmetric, so x y - y x doubles it
    assert bracket_map(w) == w.scale(2)
    a1, b1 = Letter.a(1), Letter.b(1)
    assert is_h_member(TensorElement(2, {(a1, b1): 1, (b1, a1): 1}))
    e = TensorElement(2, {(a1, b1): 1})
    assert bracket_map(e).degree == 2
    assert not is_h_member(e)
    with pytest.raises(ValueError):
        bracket_map(TensorElement(1, {(a1,): 1}))


def _patterns(n):
    """Restricted growth strings of length n (letter-equality patterns)."""
    out = [[0]]
    for _ in range(n - 1):
        out = [p + [k] for p in out for k in range(max(p) + 2)]
    return out


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("g", [1, 2, 3])
def test_witt_formula_by_dynkin_trace(n, g):
    # theta(w) = left-normed bracket of w satisfies theta^2 = n theta, so
    # dim L_n = trace(theta) / n; the diagonal entry only depends on the
    # equality pattern of w, weighted by the number of words with it
    d = 2 * g
    trace = 0
    for pat in _patterns(n):
        k = max(pat) + 1
        if k > d:
            continue
        w = tuple(Letter(x) for x in pat)
        mult = 1
        for i in range(k):
            mult *= d - i
        trace += mult * expand_lie_word(LieWord.left_normed(w)).terms.get(w, 0)
    assert trace % n == 0
    assert trace // n == lie_dim(n, g)
