import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcocycle import kernels
from hcocycle.matchings import (Matching, MuPolynomial, all_matchings, block_size, chord_classes,
                                contract, contraction_vector, double_factorial_odd, element_arrays,
                                es_functional, partner_table, rotate_matching, symbolic_contract)
from hcocycle.pipeline import chord_dimension, es_apply
from hcocycle.spiders import Spider, spider_expand
from hcocycle.symplectic import Letter, TensorElement


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_rank_unrank(m):
    ms = all_matchings(m)
    assert len(ms) == double_factorial_odd(m)
    for k, M in enumerate(ms):
        assert M.rank() == k
        assert Matching.unrank(k, 2 * m) == M
    # the block containing (0,1) is the first (2m-3)!! ranks
    blk = block_size(2 * m)
    assert all((0, 1) in M.pairs for M in ms[:blk])
    assert not any((0, 1) in M.pairs for M in ms[blk:])


def test_matching_text_and_json():
    M = Matching.parse("(1,4)(2,3)(5,6)")
    assert M.pairs == ((0, 3), (1, 2), (4, 5))
    assert M.to_text() == "(1,4)(2,3)(5,6)"
    assert Matching.from_json(M.to_json()) == M
    with pytest.raises(ValueError):
        Matching([(0, 1), (1, 2)])


def test_contract_examples():
    a1, b1, a2, b2 = Letter.a(1), Letter.b(1), Letter.a(2), Letter.b(2)
    e = TensorElement(4, {(a1, b1, a2, b2): 1, (b2, a2, a1, b1): 3})
    assert contract(e, Matching([(0, 1), (2, 3)])) == 1 + 3 * (-1)
    assert contract(e, Matching([(0, 2), (1, 3)])) == 0
    one_kind = TensorElement(4, {(a1, a2, a1, a2): 5})
    assert all(contract(one_kind, M) == 0 for M in all_matchings(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2 ** 32))
def test_kernel_contraction_matches_reference(m, g, seed):
    rng = np.random.default_rng(seed)
    n = 2 * m
    terms = {}
    for _ in range(int(rng.integers(1, 6))):
        w = tuple(Letter(int(x)) for x in rng.integers(0, 2 * g, n))
        terms[w] = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
    e = TensorElement(n, terms)
    if e.is_zero():
        return
    words, coefs, den = element_arrays(e)
    vec = contraction_vector(words, coefs)
    for k, M in enumerate(all_matchings(m)):
        assert Fraction(int(vec[k]), den) == contract(e, M)


def test_spider_contractions_reference(rng):
    for n in (4, 6, 8):
        s = Spider(Letter(int(x)) for x in rng.permutation([0, 1, 2, 3, 0, 1, 4, 5][:n]))
        e = spider_expand(s)
        words, coefs, den = element_arrays(e)
        vec = contraction_vector(words, coefs)
        for k, M in enumerate(all_matchings(n // 2)):
            assert vec[k] == contract(e, M)


def test_symbolic_contract():
    p = symbolic_contract(["u1", "v1", "u2", "v2"], Matching([(0, 3), (1, 2)]))
    assert p == MuPolynomial({(("u1", "v2"), ("v1", "u2")): 1})
    # reordering a pair flips the sign
    assert MuPolynomial.symbol("v1", "u1") == -MuPolynomial.symbol("u1", "v1")
    vals = {"u1": Letter.a(1), "v2": Letter.b(1), "v1": Letter.b(2), "u2": Letter.a(2)}
    assert p.substitute(vals) == 1 * (-1)


def test_rotation_sign_rule(rng):
    k = 6
    for row in partner_table(k):
        D = Matching.from_partner(row)
        for r in range(k):
            p, s = rotate_matching(tuple(int(x) for x in row), r)
            for _ in range(3):
                w = tuple(Letter(int(x)) for x in rng.integers(0, 4, k))
                rot = tuple(w[(i + r) % k] for i in range(k))
                assert contract(TensorElement(k, {rot: 1}), D) == s * contract(TensorElement(k, {w: 1}),
                                                                              Matching.from_partner(p))


@pytest.mark.parametrize("k,count", [(2, 1), (4, 2), (6, 5), (8, 18), (10, 105), (12, 902)])
def test_chord_class_counts(k, count):
    assert len(chord_classes(k)) == count


def _omega_M(M: Matching, g: int) -> TensorElement:
    n = M.size
    terms = {}
    for idx in itertools.product(range(1, g + 1), repeat=len(M.pairs)):
        for flips in itertools.product((0, 1), repeat=len(M.pairs)):
            w = [None] * n
            sign = 1
            for (s, t), i, f in zip(M.pairs, idx, flips):
                w[s], w[t] = (Letter.a(i), Letter.b(i)) if not f else (Letter.b(i), Letter.a(i))
                sign *= -1 if f else 1
            terms[tuple(w)] = terms.get(tuple(w), 0) + sign
    return TensorElement(n, terms)


@pytest.mark.parametrize("k,g", [(4, 1), (4, 2), (6, 1), (6, 2)])
@pytest.mark.parametrize("backend", ["compiled", "python"])
def test_chord_gram_formula_brute_force(k, g, backend):
    impl = kernels.load(backend)
    classes = chord_classes(k)
    rot_p, rot_c, rot_s = [], [], []
    for ci, D in enumerate(classes):
        for p, s in D.orbit():
            rot_p.append(p), rot_c.append(ci), rot_s.append(s)
    allp = partner_table(k)
    out = np.zeros((len(classes), len(allp)), dtype=np.int64)
    impl.chord_gram_rows(np.array(rot_p, dtype=np.int8), np.array(rot_c, dtype=np.int64),
                         np.array(rot_s, dtype=np.int64), allp, 2 * g, out)
    for j, row in enumerate(allp):
        om = _omega_M(Matching.from_partner(row), g)
        for ci, D in enumerate(classes):
            want = sum(s * contract(om, Matching.from_partner(p)) for p, s in D.orbit())
            assert out[ci, j] == want


def test_vanishing_classes_have_zero_functional():
    for k in (4, 6, 8):
        for D in chord_classes(k):
            assert D.vanishes() == (not es_functional(D))


@pytest.mark.parametrize("k,g", [(4, 2), (6, 3), (8, 4)])
def test_chord_dimension_small(k, g):
    res = chord_dimension(k, g, columns=None)
    assert res["certified"]
    assert res["dimension"] == res["nonvanishing_classes"]


def test_chord_dimension_degenerate_genus():
    # at g = 1 the chord functionals on H^(x)6 become dependent
    res = chord_dimension(6, 1, columns=None)
    assert res["dimension"] < res["nonvanishing_classes"]


def test_es_apply_examples(rng):
    a1, b1, a2 = Letter.a(1), Letter.b(1), Letter.a(2)
    k = 4
    w = tuple(Letter(int(x)) for x in rng.integers(0, 4, k))
    got = es_apply(TensorElement(k + 2, {(a1, b1) + w: 1}))
    want = {}
    for ci, D in enumerate(chord_classes(k)):
        v = sum(s * contract(TensorElement(k, {w: 1}), Matching.from_partner(p)) for p, s in D.orbit())
        if v:
            want[ci] = Fraction(v)
    assert got == want
    assert es_apply(TensorElement(k + 2, {(a1, a2) + w: 1})) == {}
