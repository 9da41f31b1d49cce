"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each case builds its inputs once, runs both backends on identical copies,
checks that the outputs agree and reports the best wall time of --repeat runs.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from hcocycle import kernels
from hcocycle.linalg import PRIMES
from hcocycle.matchings import chord_classes, double_factorial_odd, partner_table
from hcocycle.spiders import glued_table, spider_table

P = PRIMES[0]


def case_contraction(rng, n=12, g=8, spiders=4):
    perm, sign = spider_table(n)
    jobs = []
    for _ in range(spiders):
        legs = rng.integers(0, 2 * g, n).astype(np.uint8)
        jobs.append((np.ascontiguousarray(legs[perm]), np.ascontiguousarray(sign.astype(np.int64))))
    size = double_factorial_odd(n // 2)

    def run(impl):
        out = np.zeros(size, np.int64)
        for words, coefs in jobs:
            impl.contraction_counts(words, coefs, out)
        return out
    return f"contraction_counts n={n} x{spiders}", run


def case_symbolic(rng, nP=4, nQ=8, rows=16):
    npts = nP + nQ
    perm, sign = glued_table(nP, 1, nQ, 2)
    legids = np.array([i for i in range(npts) if i not in (1, nP + 2)], dtype=np.int64)
    pairs = np.ascontiguousarray(np.array([rng.permutation(npts - 2) for _ in range(rows)], dtype=np.int8))
    coeffs = rng.integers(-5, 6, rows).astype(np.int64)
    size = double_factorial_odd(npts // 2)

    def run(impl):
        out = np.zeros(size, np.int64)
        impl.symbolic_accumulate(perm, sign, legids, 1, nP + 2, npts, pairs, coeffs, out)
        return out
    return f"symbolic_accumulate {nP}x{nQ} legs, {rows} matchings", run


def case_echelon(rng, ncols=650, nrows=120):
    base = rng.integers(-3, 4, (nrows // 2, ncols))
    rows = [rng.integers(-2, 3, nrows // 2) @ base for _ in range(nrows)]

    def run(impl):
        e = impl.EchelonMod(ncols, P)
        for r in rows:
            e.add(r)
        return np.array([e.rank])
    return f"EchelonMod {nrows} rows x {ncols}", run


def case_rref(rng, m=80, n=120):
    A = kernels.load("python").as_mod(rng.integers(-9, 10, m * n), P).reshape(m, n)

    def run(impl):
        M = A.copy()
        impl.rref_mod(M, P)
        return M
    return f"rref_mod {m}x{n}", run


def case_chord(rng, k=10, g=6):
    rot_p, rot_c, rot_s = [], [], []
    classes = chord_classes(k)
    for ci, D in enumerate(classes):
        for p, s in D.orbit():
            rot_p.append(p), rot_c.append(ci), rot_s.append(s)
    args = (np.array(rot_p, np.int8), np.array(rot_c, np.int64), np.array(rot_s, np.int64), partner_table(k), g)

    def run(impl):
        out = np.zeros((len(classes), double_factorial_odd(k // 2)), np.int64)
        impl.chord_gram_rows(*args, out)
        return out
    return f"chord_gram_rows k={k}", run


CASES = [case_contraction, case_symbolic, case_echelon, case_rref, case_chord]


def best_of(fn, impl, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(impl)
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", default=None, help="also write results here")
    args = ap.parse_args(argv)

    try:
        compiled = kernels.load("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    python = kernels.load("python")

    rng = np.random.default_rng(args.seed)
    results = []
    print(f"{'case':45s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for make in CASES:
        name, fn = make(rng)
        tc, oc = best_of(fn, compiled, args.repeat)
        tp, op = best_of(fn, python, args.repeat)
        if not np.array_equal(oc, op):
            raise SystemExit(f"{name}: backends disagree")
        results.append({"case": name, "compiled_s": tc, "python_s": tp, "speedup": tp / tc})
        print(f"{name:45s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
