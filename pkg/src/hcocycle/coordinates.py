"""Coordinate systems for Sp-invariants: r spiders and r matchings whose
pairing matrix is invertible, found by rank-greedy selection over random
spiders.

Rank passes run over F_p on the block of matchings containing the pair
(0,1) (the first (n-3)!! ranks).  Once the rank stops growing, every
dependent sampled row is checked modulo p against ALL matchings: if
x = y B holds on the full row, the block captured the whole rank of the
sample.  Otherwise selection is redone over all columns.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np

from . import kernels
from .linalg import DEFAULT_PRIMES, bareiss_rank
from .matchings import Matching, block_size, contraction_vector, double_factorial_odd
from .spiders import Spider, merge_words, spider_table

log = logging.getLogger(__name__)


class Unstabilized(RuntimeError):
    """Sampling budget ran out before the rank stabilized."""

    def __init__(self, msg: str, lower_bound: int):
        super().__init__(msg)
        self.lower_bound = lower_bound


@dataclass
class SamplingConfig:
    seed: int = 0
    batch_size: int = 64
    stable_batches: int = 3
    max_batches: int = 100
    primes: tuple = DEFAULT_PRIMES
    exact_minor_limit: int = 60
    threads: int = 1


def parallel_map(fn, items: list, threads: int = 1) -> list:
    """Order-preserving map, in worker processes when threads > 1."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(threads) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def sample_balanced_legs(rng: np.random.Generator, g: int, n: int) -> np.ndarray:
    """n/2 indices drawn uniformly (with replacement); each contributes a_i
    and b_i; legs shuffled.  Unbalanced leg multisets pair to zero with
    every matching, so only balanced ones are drawn."""
    idx = rng.integers(0, g, n // 2)
    legs = np.concatenate([2 * idx, 2 * idx + 1]).astype(np.uint8)
    rng.shuffle(legs)
    return legs


def words_row(words: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Contraction values against all matchings of a signed word list."""
    counts = np.bincount(words[0], minlength=32)
    if np.prod([factorial(int(c)) for c in counts[0::2]]) > 1:
        words, signs = merge_words(words, signs)
        if not len(words):
            return np.zeros(double_factorial_odd(words.shape[1] // 2), dtype=np.int64)
    return contraction_vector(words, signs)


def spider_row(legs: Sequence[int]) -> np.ndarray:
    """Values of all matchings (rank order) on the expansion of S(legs)."""
    legs = np.asarray(legs, dtype=np.uint8)
    perm, sign = spider_table(len(legs))
    return words_row(legs[perm], sign)


@dataclass
class CoordinateSystem:
    genus: int
    weight: int
    spiders: list = field(default_factory=list)      # list[Spider]
    columns: list = field(default_factory=list)      # matching ranks
    rank: int = 0
    seed: int = 0
    primes: tuple = ()
    certificate: dict = field(default_factory=dict)

    @property
    def nslots(self) -> int:
        return self.weight + 2

    @property
    def matchings(self) -> list[Matching]:
        return [Matching.unrank(c, self.nslots) for c in self.columns]

    def to_json(self) -> dict:
        return {
            "genus": self.genus,
            "weight": self.weight,
            "rank": self.rank,
            "seed": self.seed,
            "primes": [str(p) for p in self.primes],
            "matchings": [m.to_json() for m in self.matchings],
            "spiders": [s.to_json() for s in self.spiders],
            "certificate": self.certificate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CoordinateSystem":
        cols = [Matching.from_json(m).rank() for m in d["matchings"]]
        return cls(
            genus=d["genus"], weight=d["weight"], rank=d["rank"], seed=d["seed"],
            primes=tuple(int(p) for p in d["primes"]),
            spiders=[Spider(s) for s in d["spiders"]], columns=cols,
            certificate=d.get("certificate", {}),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "CoordinateSystem":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def coordinates(self, row: np.ndarray) -> np.ndarray:
        return np.asarray(row)[self.columns]


def _inverse_mod(B: np.ndarray, p: int) -> np.ndarray | None:
    r = B.shape[0]
    aug = np.zeros((r, 2 * r), dtype=np.uint64)
    aug[:, :r] = np.mod(B.astype(np.int64), np.int64(p)).astype(np.uint64)
    aug[np.arange(r), r + np.arange(r)] = 1
    piv = kernels.rref_mod(aug, p, r)
    if len(piv) < r:
        return None
    return np.ascontiguousarray(aug[:, r:])


def _span_check(indep: list, dep: list, cols: list, p: int) -> int:
    """Number of dependent rows NOT equal to y B on all columns mod p,
    where y solves the equation on the selected columns."""
    if not dep:
        return 0
    if not indep:
        return sum(1 for x in dep if np.any(np.mod(x, np.int64(p))))
    B = np.array(indep, dtype=np.int64)
    inv = _inverse_mod(B[:, cols], p)
    if inv is None:
        return len(dep)
    X = np.array(dep, dtype=np.int64)
    XJ = np.mod(X[:, cols], np.int64(p)).astype(np.uint64)
    Y = kernels.matmul_mod(np.ascontiguousarray(XJ), inv, p)
    Bm = np.mod(B, np.int64(p)).astype(np.uint64)
    indptr = [0]
    indices = []
    data = []
    for row in Bm:
        nz = np.nonzero(row)[0]
        indices.append(nz)
        data.append(row[nz])
        indptr.append(indptr[-1] + len(nz))
    indptr = np.array(indptr, dtype=np.int64)
    indices = np.concatenate(indices).astype(np.int64) if indices else np.zeros(0, np.int64)
    data = np.concatenate(data).astype(np.uint64) if data else np.zeros(0, np.uint64)
    bad = 0
    for k in range(len(dep)):
        comb = kernels.sparse_combine_mod(np.ascontiguousarray(Y[k]), indptr, indices, data, B.shape[1], p)
        if not np.array_equal(comb, np.mod(X[k], np.int64(p)).astype(np.uint64)):
            bad += 1
    return bad


def select_coordinates(g: int, w: int, budget: SamplingConfig | None = None) -> CoordinateSystem:
    """Rank-greedy coordinate selection for the invariant part of weight w."""
    cfg = budget or SamplingConfig()
    if g < 1:
        raise ValueError("genus must be >= 1")
    if w < 0:
        raise ValueError("weight must be >= 0")
    primes = tuple(cfg.primes)
    if w % 2:
        cert = {"method": "odd-weight", "note": "no invariants in odd tensor powers"}
        return CoordinateSystem(g, w, [], [], 0, cfg.seed, primes, cert)
    n = w + 2
    block = block_size(n)
    ncols = double_factorial_odd(n // 2)
    p1 = primes[0]
    rng = np.random.default_rng(cfg.seed)
    ech = kernels.EchelonMod(block, p1)
    indep, indep_legs, dep, dep_legs = [], [], [], []
    stable = 0
    t0 = time.time()
    batches = 0
    while stable < cfg.stable_batches:
        if batches >= cfg.max_batches:
            raise Unstabilized(f"rank still growing after {batches} batches", ech.rank)
        before = ech.rank
        batch = [sample_balanced_legs(rng, g, n) for _ in range(cfg.batch_size)]
        for legs, row in zip(batch, parallel_map(spider_row, batch, cfg.threads)):
            if ech.add(row[:block]) >= 0:
                indep.append(row)
                indep_legs.append(legs)
            else:
                dep.append(row)
                dep_legs.append(legs)
        batches += 1
        stable = stable + 1 if ech.rank == before else 0
        log.info("g=%d w=%d batch %d rank %d (%.1fs)", g, w, batches, ech.rank, time.time() - t0)
    method = "block"
    cols = sorted(ech.pivots)
    # verify the block carries the full rank of the sample, for each prime
    failures = {str(p): _span_check(indep, dep, cols, p) for p in primes}
    if any(failures.values()):
        method = "full"
        ech = kernels.EchelonMod(ncols, p1)
        rows, legs_all = indep + dep, indep_legs + dep_legs
        indep, indep_legs, dep = [], [], []
        for row, legs in zip(rows, legs_all):
            if ech.add(row) >= 0:
                indep.append(row)
                indep_legs.append(legs)
            else:
                dep.append(row)
        cols = sorted(ech.pivots)
    r = len(cols)
    B = np.array(indep, dtype=np.int64)[:, cols] if r else np.zeros((0, 0), dtype=np.int64)
    minor_ranks = {}
    for p in primes:
        minor_ranks[str(p)] = r if r == 0 or _inverse_mod(B, p) is not None else -1
    cert = {
        "method": method,
        "batches": batches,
        "sampled": len(indep) + len(dep),
        "minor_rank_mod": minor_ranks,
        "span_check_failures": failures,
        "two_prime_agreement": all(v == r for v in minor_ranks.values()),
    }
    if 0 < r <= cfg.exact_minor_limit:
        cert["minor_rank_exact"] = bareiss_rank(B.tolist())
    spiders = [Spider(int(x) for x in legs) for legs in indep_legs]
    return CoordinateSystem(g, w, spiders, cols, r, cfg.seed, primes, cert)
