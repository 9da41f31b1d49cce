"""End-to-end computations: the bracket-image matrix W, the cocycle C,
numeric and formal verification, abelianization dimensions and the
cyclic-trace (ES) factorization check."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .coordinates import (CoordinateSystem, SamplingConfig, Unstabilized, parallel_map, sample_balanced_legs,
                          select_coordinates, spider_row)
from .linalg import PRIMES, dense_rank_mod, exact_product, integer_kernel, solve_integer
from .matchings import (Matching, MuPolynomial, block_size, chord_classes, contraction_vector,
                        double_factorial_odd, element_arrays, es_functional, partner_table)
from .spiders import Spider, SpiderSum, glued_table, merge_words
from .symplectic import TensorElement, mu_code

log = logging.getLogger(__name__)

WITNESS = "S(a1,b1,a1,a1,a1,a1,a2,a1,b1,b1,b1,b1,b1,b2)"
WITNESS_VALUE = 5832


class PipelineError(RuntimeError):
    pass


# --- bracket rows ------------------------------------------------------------------


def bracket_words(P: Sequence[int], Q: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Signed words of the expansion of [S(P), S(Q)]."""
    P = np.asarray(P, dtype=np.uint8)
    Q = np.asarray(Q, dtype=np.uint8)
    W, C = [], []
    for i in range(len(P)):
        for j in range(len(Q)):
            m = mu_code(int(P[i]), int(Q[j]))
            if not m:
                continue
            legs = np.concatenate([np.delete(P, i), np.delete(Q, j)])
            perm, sign = glued_table(len(P), i, len(Q), j)
            W.append(legs[perm])
            C.append(sign * m)
    if not W:
        n = len(P) + len(Q) - 2
        return np.zeros((0, n), dtype=np.uint8), np.zeros(0, dtype=np.int64)
    return np.concatenate(W), np.concatenate(C)


def bracket_row(P: Sequence[int], Q: Sequence[int]) -> np.ndarray:
    """Values of all matchings on [S(P), S(Q)]."""
    n = len(P) + len(Q) - 2
    words, signs = bracket_words(P, Q)
    if not len(words):
        return np.zeros(double_factorial_odd(n // 2), dtype=np.int64)
    # rows may mix letter multisets; merge handles repeated letters cheaply
    words, signs = merge_words(words, signs)
    if not len(words):
        return np.zeros(double_factorial_odd(n // 2), dtype=np.int64)
    return contraction_vector(words, signs)


def _bracket_row_pair(pq):
    return bracket_row(*pq)


def _balanced(rng, indices: Sequence[int], n: int) -> list[int]:
    idx = rng.choice(np.asarray(indices), n // 2)
    legs = [2 * int(i) for i in idx] + [2 * int(i) + 1 for i in idx]
    rng.shuffle(legs)
    return legs


def sample_bracket(rng, g: int, w: int, split: int, kind: str = "random") -> tuple[list, list]:
    """Leg lists (P, Q) with |P| = split + 2 and |Q| = w - split + 2.

    kind "type1": [S(a1,b1,a_g), S(b_g, X)]; kind "type2":
    [S(a1,a2,a3), S(b3, Y, b1)] with Y containing b2; both only for split 1.
    """
    if kind == "type1" and split == 1 and g >= 3:
        X = _balanced(rng, range(1, g - 1), w)
        return [0, 1, 2 * (g - 1)], [2 * (g - 1) + 1] + X
    if kind == "type2" and split == 1 and g >= 3 and w >= 2:
        Y = [3] + _balanced(rng, range(g), w - 2)
        rng.shuffle(Y)
        return [0, 2, 4], [5] + Y + [1]
    legs = sample_balanced_legs(rng, g, w + 4).tolist()
    return legs[:split + 2], legs[split + 2:]


@dataclass
class WMatrix:
    genus: int
    weight: int
    rows: np.ndarray                     # (N, r) int64 coordinate rows
    generators: list                     # (P legs, Q legs) per row
    rank: int
    accepted: list                       # indices of rank-increasing rows
    primes: tuple = ()
    certificate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "genus": self.genus, "weight": self.weight, "rank": self.rank,
            "primes": [str(p) for p in self.primes],
            "accepted": self.accepted,
            "generators": [[list(map(int, P)), list(map(int, Q))] for P, Q in self.generators],
            "rows": self.rows.tolist(),
            "certificate": self.certificate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "WMatrix":
        r = len(d["rows"][0]) if d["rows"] else 0
        return cls(d["genus"], d["weight"], np.array(d["rows"], dtype=np.int64).reshape(-1, r),
                   [(P, Q) for P, Q in d["generators"]], d["rank"], d["accepted"],
                   tuple(int(p) for p in d["primes"]), d.get("certificate", {}))


def build_w_matrix(coords: CoordinateSystem, g: int | None = None, cfg: SamplingConfig | None = None) -> WMatrix:
    """Coordinate rows of brackets over all splits, sampled until the rank
    stops growing; rank certified modulo two primes."""
    cfg = cfg or SamplingConfig()
    g = g or coords.genus
    w = coords.weight
    r = coords.rank
    primes = tuple(cfg.primes)
    rng = np.random.default_rng(cfg.seed + 7919)
    cols = np.asarray(coords.columns, dtype=np.int64)
    ech = kernels.EchelonMod(max(r, 1), primes[0])
    rows, gens, accepted = [], [], []
    splits = list(range(1, w // 2 + 1))
    kinds = ["type1", "type2", "random", "random"]
    stable = 0
    batches = 0
    t0 = time.time()
    while stable < cfg.stable_batches and r > 0:
        if batches >= cfg.max_batches:
            raise Unstabilized(f"bracket rank still growing after {batches} batches", ech.rank)
        before = ech.rank
        batch = []
        for k in range(cfg.batch_size):
            split = splits[k % len(splits)]
            kind = kinds[(k // len(splits)) % len(kinds)] if split == 1 else "random"
            batch.append(sample_bracket(rng, g, w, split, kind))
        full = parallel_map(_bracket_row_pair, batch, cfg.threads)
        for (P, Q), row in zip(batch, full):
            row = row[cols]
            if ech.rank < r and ech.add(row) >= 0:
                accepted.append(len(rows))
            rows.append(row)
            gens.append((P, Q))
        batches += 1
        stable = stable + 1 if ech.rank == before else 0
        log.info("W g=%d w=%d batch %d rank %d/%d (%.1fs)", g, w, batches, ech.rank, r, time.time() - t0)
        if ech.rank == r:
            break
    M = np.array(rows, dtype=np.int64).reshape(len(rows), r)
    ranks = {str(p): (dense_rank_mod(M[accepted], p) if accepted else 0) for p in primes}
    cert = {
        "batches": batches,
        "sampled": len(rows),
        "rank_mod": ranks,
        "two_prime_agreement": len(set(ranks.values())) == 1,
    }
    return WMatrix(g, w, M, gens, ech.rank, accepted, primes, cert)


# --- the cocycle ------------------------------------------------------------------


@dataclass
class CocycleVector:
    columns: list                 # matching ranks (14 slots at weight 12)
    coefficients: list            # Fractions, normalized
    primitive: list               # primitive integer kernel vector
    weight: int = 12
    normalization: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def nslots(self) -> int:
        return self.weight + 2

    def to_json(self) -> dict:
        return {
            "weight": self.weight,
            "matchings": [Matching.unrank(c, self.nslots).to_json() for c in self.columns],
            "coefficients": [str(c) for c in self.coefficients],
            "primitive": [str(c) for c in self.primitive],
            "normalization": self.normalization,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CocycleVector":
        cols = [Matching.from_json(m).rank() for m in d["matchings"]]
        coeffs = [Fraction(c) for c in d["coefficients"]]
        prim = [int(c) for c in d["primitive"]]
        norm = d.get("normalization", {})
        if not len(cols) == len(coeffs) == len(prim):
            raise ValueError("matchings, coefficients and primitive differ in length")
        if "scale" in norm:
            scale = Fraction(norm["scale"])
            if any(c != x * scale for c, x in zip(coeffs, prim)):
                raise ValueError("coefficients are not primitive * scale")
        return cls(cols, coeffs, prim, d.get("weight", 12), norm, d.get("provenance", {}))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "CocycleVector":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def extract_cocycle(wm: WMatrix, coords: CoordinateSystem, primes: Sequence[int] = PRIMES,
                    witness: str = WITNESS, target: int = WITNESS_VALUE) -> CocycleVector:
    """Kernel of W lifted to Q, verified exactly on every row, normalized so
    the witness spider evaluates to ``target``."""
    corank = coords.rank - wm.rank
    if corank != 1:
        raise PipelineError(f"W-matrix corank is {corank}, expected 1")
    A = wm.rows[wm.accepted]
    vecs, rank, used = integer_kernel(A, primes)
    if len(vecs) != 1:
        raise PipelineError(f"kernel of accepted rows has dimension {len(vecs)}")
    c = vecs[0]
    if not np.all(exact_product(wm.rows, np.array(c, dtype=object)) == 0):
        raise PipelineError("kernel vector does not annihilate every W row")
    wit = Spider.parse(witness)
    if wit.leg_count != coords.nslots:
        raise PipelineError(f"witness has {wit.leg_count} legs, expected {coords.nslots}")
    wrow = spider_row(wit.letters_array())[coords.columns]
    raw = sum(int(a) * int(b) for a, b in zip(wrow, c))
    if raw == 0:
        raise PipelineError("cocycle vanishes on the witness spider")
    scale = Fraction(target, raw)
    return CocycleVector(
        columns=list(coords.columns),
        coefficients=[x * scale for x in c],
        primitive=c,
        weight=coords.weight,
        normalization={"witness": str(wit), "target": target,
                       "raw_value": raw, "scale": str(scale)},
        provenance={"genus": wm.genus, "seed": coords.seed, "primes": [str(p) for p in used],
                    "w_rows": int(len(wm.rows)), "w_rank": wm.rank,
                    "support": sum(1 for x in c if x)},
    )


def eval_cocycle(c: CocycleVector, e) -> Fraction:
    """sum_m c_m * contract(expand(e), M_m) for a Spider, SpiderSum or TensorElement."""
    if isinstance(e, str):
        e = Spider.parse(e)
    if isinstance(e, Spider):
        if e.leg_count != c.nslots:
            raise ValueError(f"spider has {e.leg_count} legs, expected {c.nslots}")
        row = spider_row(e.letters_array())
        return sum((co * int(row[m]) for co, m in zip(c.coefficients, c.columns)), Fraction(0))
    if isinstance(e, SpiderSum):
        return sum((co * eval_cocycle(c, s) for s, co in e.terms.items()), Fraction(0))
    if isinstance(e, TensorElement):
        if e.degree != c.nslots:
            raise ValueError(f"element has degree {e.degree}, expected {c.nslots}")
        if e.is_zero():
            return Fraction(0)
        words, coefs, den = element_arrays(e)
        row = contraction_vector(words, coefs)
        return sum((co * int(row[m]) for co, m in zip(c.coefficients, c.columns)), Fraction(0)) / den
    raise TypeError(type(e))


def eval_bracket(c: CocycleVector, P: Sequence[int], Q: Sequence[int]) -> Fraction:
    row = bracket_row(P, Q)
    return sum((co * int(row[m]) for co, m in zip(c.coefficients, c.columns)), Fraction(0))


def verify_cocycle_numeric(c: CocycleVector, g: int, count: int, seed: int = 1) -> dict:
    """Evaluate C on fresh random brackets at every split; report failures."""
    rng = np.random.default_rng(seed + 104729)
    w = c.weight
    splits = list(range(1, w // 2 + 1))
    first_fail = None
    nonzero_terms = 0
    for k in range(count):
        split = splits[k % len(splits)]
        P, Q = sample_bracket(rng, g, w, split)
        v = eval_bracket(c, P, Q)
        if v != 0 and first_fail is None:
            first_fail = {"P": str(Spider(P)), "Q": str(Spider(Q)), "value": str(v)}
        nonzero_terms += bool(bracket_row(P, Q)[c.columns].any())
    return {"checked": count, "genus": g, "nontrivial_rows": nonzero_terms,
            "ok": first_fail is None, "first_failure": first_fail}


# --- formal verification -----------------------------------------------------------


@dataclass
class SymbolicResult:
    split: int
    symbols: list                 # global symbol names, index = slot id
    values: np.ndarray            # coefficient per matching of all symbols (rank order)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @property
    def nonzero_terms(self) -> int:
        return int(np.count_nonzero(self.values))

    def polynomial(self, limit: int | None = None) -> MuPolynomial:
        out = MuPolynomial()
        nz = np.nonzero(self.values)[0]
        if limit is not None:
            nz = nz[:limit]
        n = len(self.symbols)
        for idx in nz:
            M = Matching.unrank(int(idx), n)
            out._add_monomial([(self.symbols[i], self.symbols[j]) for i, j in M.pairs], int(self.values[idx]))
        return out


def _digits(c: Sequence[int], base: int) -> list[np.ndarray]:
    rest = [int(x) for x in c]
    out = []
    while any(rest):
        d = [((x + base // 2) % base) - base // 2 for x in rest]
        out.append(np.array(d, dtype=np.int64))
        rest = [(x - y) // base for x, y in zip(rest, d)]
    return out or [np.zeros(len(c), dtype=np.int64)]


def symbolic_bracket_values(columns: Sequence[int], coeffs: Sequence[int], w: int, split: int) -> SymbolicResult:
    """sum_m coeffs[m] mu_m applied to [S(u1..u_{split+2}), S(v1..v_{w-split+2})]
    as a formal mu-polynomial in the w+4 symbols (a dense vector over the
    matchings of all symbols)."""
    n = w + 2
    nP, nQ = split + 2, w - split + 2
    symbols = [f"u{k + 1}" for k in range(nP)] + [f"v{k + 1}" for k in range(nQ)]
    npts = nP + nQ
    pairs = np.array([[x for pr in Matching.unrank(int(m), n).pairs for x in pr] for m in columns],
                     dtype=np.int8).reshape(len(columns), n)
    total = np.zeros(double_factorial_odd(npts // 2), dtype=object)
    # keep int64 accumulation exact: split coefficients into small digits
    base = 1 << 16
    digits = _digits(coeffs, base)
    for di, d in enumerate(digits):
        if not d.any():
            continue
        out = np.zeros(double_factorial_odd(npts // 2), dtype=np.int64)
        for p in range(nP):
            for q in range(nQ):
                perm, sign = glued_table(nP, p, nQ, q)
                legids = np.array([k for k in range(nP) if k != p] + [nP + k for k in range(nQ) if k != q],
                                  dtype=np.int64)
                kernels.symbolic_accumulate(perm, sign, legids, p, nP + q, npts, pairs, d, out)
        total += out.astype(object) * (base ** di)
    return SymbolicResult(split, symbols, total)


def verify_cocycle_symbolic(c: CocycleVector, split: int) -> SymbolicResult:
    if not 1 <= split <= c.weight // 2:
        raise ValueError(f"split must be in 1..{c.weight // 2}")
    return symbolic_bracket_values(c.columns, c.primitive, c.weight, split)


def mutation_control(c: CocycleVector, split: int, index: int | None = None,
                     base: SymbolicResult | None = None) -> SymbolicResult:
    """Formal result for C with one coefficient raised by 1 (primitive scale),
    assembled as base + contribution of the bumped matching."""
    base = base or verify_cocycle_symbolic(c, split)
    if index is None:
        index = next(k for k, x in enumerate(c.primitive) if x)
    bump = [0] * len(c.columns)
    bump[index] = 1
    delta = symbolic_bracket_values(c.columns, bump, c.weight, split)
    return SymbolicResult(split, base.symbols, base.values + delta.values)


# --- abelianization ---------------------------------------------------------------------


def abelianization_dim(g: int, w: int, cfg: SamplingConfig | None = None,
                       coords: CoordinateSystem | None = None) -> dict:
    coords = coords or select_coordinates(g, w, cfg)
    wm = build_w_matrix(coords, g, cfg)
    return {"genus": g, "weight": w, "invariants": coords.rank, "bracket_rank": wm.rank,
            "dimension": coords.rank - wm.rank,
            "certified": bool(coords.certificate.get("two_prime_agreement", True)
                              and wm.certificate.get("two_prime_agreement", True))}


def canonical_sequences(n: int, g: int, distinct: bool = False):
    """Balanced letter sequences of length n in first-occurrence index order
    (index relabelings are symmetries of every invariant functional).
    With distinct=True each index occurs exactly once as a and once as b."""
    out = []
    seq = []
    bal = [0] * g

    def rec(pos, used):
        rem = n - pos
        if sum(abs(b) for b in bal) > rem:
            return
        if pos == n:
            out.append(list(seq))
            return
        for i in range(min(used + 1, g)):
            for kind in (0, 1):
                if distinct and (bal[i] != 0 and (kind == 0) == (bal[i] > 0) or
                                 i < used and bal[i] == 0):
                    continue
                seq.append(2 * i + kind)
                bal[i] += 1 if kind == 0 else -1
                rec(pos + 1, max(used, i + 1))
                bal[i] -= 1 if kind == 0 else -1
                seq.pop()

    rec(0, 0)
    return out


def full_enumeration(g: int, w: int, distinct_brackets: bool = False,
                     primes: Sequence[int] = PRIMES[:2]) -> dict:
    """dim of invariants and rank of the bracket image from EVERY canonical
    spider and bracket (no sampling), ranks taken over all matchings.

    With distinct_brackets=True only brackets whose indices are pairwise
    distinct are used; their rank is then a lower bound, so the reported
    dimension is an upper bound (exact whenever it is 0)."""
    n = w + 2
    spiders = canonical_sequences(n, g)
    S = np.array([spider_row(s) for s in spiders], dtype=np.int64).reshape(len(spiders), -1)
    dim = {str(p): dense_rank_mod(S, p) for p in primes}
    rows = []
    for legs in canonical_sequences(n + 2, g, distinct_brackets):
        for split in range(1, w // 2 + 1):
            rows.append(bracket_row(legs[:split + 2], legs[split + 2:]))
    B = np.array(rows, dtype=np.int64).reshape(-1, S.shape[1])
    brk = {str(p): dense_rank_mod(B, p) for p in primes}
    d0, b0 = dim[str(primes[0])], brk[str(primes[0])]
    return {"genus": g, "weight": w, "spiders": len(spiders), "brackets": len(rows),
            "invariants": d0, "bracket_rank": b0, "dimension": d0 - b0,
            "exact": not distinct_brackets or d0 == b0,
            "two_prime_agreement": len(set(dim.values())) == 1 and len(set(brk.values())) == 1}


# --- cyclic trace (ES) ---------------------------------------------------------------------


def es_apply(e: TensorElement, k: int | None = None) -> dict:
    """Chord coordinates of the cyclic trace of e: contract slots 1,2 by mu,
    project the rest to cyclic coinvariants, evaluate every chord class
    functional (summed over its rotation orbit).  Returns {class index: value}."""
    k = e.degree - 2 if k is None else k
    if e.degree != k + 2:
        raise ValueError("degree mismatch")
    classes = chord_classes(k)
    words, coefs, den = element_arrays(e)
    row = contraction_vector(words, coefs)
    out = {}
    for ci, D in enumerate(classes):
        v = sum(c * int(row[m]) for m, c in es_functional(D).items())
        if v:
            out[ci] = Fraction(v, den)
    return out


def es_operator(k: int) -> tuple[np.ndarray, list]:
    """(E, classes): E[m, D] is the coefficient of block matching m in the
    functional of chord class D composed with the cyclic trace."""
    classes = chord_classes(k)
    E = np.zeros((block_size(k + 2), len(classes)), dtype=np.int64)
    for ci, D in enumerate(classes):
        for m, c in es_functional(D).items():
            E[m, ci] += c
    return E, classes


def es_matrix(coords: CoordinateSystem) -> np.ndarray:
    """Rows: basis spiders of the coordinate system; columns: chord classes."""
    k = coords.weight
    E, _ = es_operator(k)
    nb = block_size(k + 2)
    R = np.array([spider_row(s.letters_array())[:nb] for s in coords.spiders], dtype=np.int64)
    return R @ E


def chord_dimension(k: int, g: int, primes: Sequence[int] = PRIMES[:2], columns: int | None = 1200,
                    seed: int = 0) -> dict:
    """dim of the Sp-invariant part of the cyclic coinvariants of H^(x)k.

    Chord functionals are evaluated on the invariant tensors omega_M of a
    sample of matchings M (all of them when columns is None or too large);
    the rank is a lower bound, and the count of classes whose functional
    does not cancel is an upper bound.  Equal bounds certify the value.
    """
    classes = chord_classes(k)
    nonvanishing = sum(1 for D in classes if es_functional(D))
    rot_p, rot_c, rot_s = [], [], []
    for ci, D in enumerate(classes):
        for p, s in D.orbit():
            rot_p.append(p)
            rot_c.append(ci)
            rot_s.append(s)
    allp = partner_table(k)
    if columns is not None and columns < len(allp):
        rng = np.random.default_rng(seed)
        sel = np.sort(rng.choice(len(allp), columns, replace=False))
        allp = allp[sel]
    out = np.zeros((len(classes), len(allp)), dtype=np.int64)
    kernels.chord_gram_rows(np.array(rot_p, dtype=np.int8), np.array(rot_c, dtype=np.int64),
                            np.array(rot_s, dtype=np.int64), np.ascontiguousarray(allp, dtype=np.int8),
                            2 * g, out)
    ranks = {str(p): dense_rank_mod(out, p) for p in primes}
    lower = min(ranks.values())
    return {"k": k, "genus": g, "classes": len(classes), "nonvanishing_classes": nonvanishing,
            "columns": int(len(allp)), "rank_mod": ranks, "dimension": lower,
            "certified": lower == nonvanishing}


def es_factorization_check(c: CocycleVector, coords: CoordinateSystem, primes: Sequence[int] = PRIMES,
                           seed: int = 0) -> dict:
    """C factors through ES on the coordinate span of the basis spiders.

    With M the ES matrix of the basis spiders and v their C values, C = phi o ES
    for a functional phi on chord space iff v = M y has a rational solution.
    The solution is reconstructed over Q and checked exactly.  Control: v with
    one random entry bumped must give an inconsistent system.
    """
    M = es_matrix(coords)
    ranks = {str(p): dense_rank_mod(M, p) for p in primes[:2]}
    cols = np.asarray(c.columns)
    v = []
    for s in coords.spiders:
        row = spider_row(s.letters_array())
        v.append(sum(int(a) * int(b) for a, b in zip(row[cols], c.primitive)))
    v = np.array(v, dtype=object)
    y, rank, used = solve_integer(M, v)
    rng = np.random.default_rng(seed)
    bumped = v.copy()
    bumped[int(rng.integers(len(v)))] += 1
    ctrl, _, _ = solve_integer(M, bumped)
    bits = max((max(abs(q.numerator), q.denominator).bit_length() for q in y), default=0) if y else None
    return {"basis_spiders": len(v), "es_rank_mod": ranks, "es_rank": rank,
            "kernel_dim": len(v) - rank, "ok": y is not None,
            "solution_bits": bits, "primes_used": len(used),
            "control_consistent": ctrl is not None, "nonzero_values": int(sum(1 for x in v if x))}


# --- reports / cache -------------------------------------------------------------------


def config_hash(stage: str, cfg: dict) -> str:
    body = json.dumps({"stage": stage, "config": cfg}, sort_keys=True)
    return hashlib.sha256(body.encode()).hexdigest()[:16]


def content_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()
