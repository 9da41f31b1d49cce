"""Command-line front end.

Every command prints one report (json, csv or text).  Intermediate
artifacts (coordinate systems, W matrices, cocycles) are cached under
--cache-dir, keyed by a hash of the stage name and the config fields that
affect the result, and stored with a content hash that is checked on load.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from importlib import resources

from sympy import isprime

from . import __version__, kernels
from .coordinates import CoordinateSystem, SamplingConfig, Unstabilized, select_coordinates
from .linalg import PRIMES, ReconstructionError, dense_rank_mod
from .pipeline import (WITNESS, WITNESS_VALUE, CocycleVector, PipelineError, WMatrix, build_w_matrix, chord_dimension,
                       config_hash, content_hash, es_factorization_check, es_matrix, eval_cocycle,
                       extract_cocycle, mutation_control, verify_cocycle_numeric, verify_cocycle_symbolic)
from .spiders import Spider

log = logging.getLogger("hcocycle")

MAX_WEIGHT = 12
SLOW_WEIGHT = 8
SHIPPED_COCYCLE = "cocycle_w12.json"


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


@dataclass
class RunConfig:
    genus: int = 8
    weight: int = 12
    seed: int = 0
    primes: tuple = PRIMES[:2]
    threads: int = 1
    budget_batches: int = 100
    batch_size: int = 64
    cache_dir: str | None = None
    format: str = "json"

    def validate(self) -> None:
        if self.genus < 1:
            raise CliError("config", "genus must be >= 1")
        if self.weight < 0 or self.weight > MAX_WEIGHT:
            raise CliError("config", f"weight must be in 0..{MAX_WEIGHT}")
        if self.threads < 1 or self.budget_batches < 1 or self.batch_size < 1:
            raise CliError("config", "threads, budget and batch size must be positive")
        if len(self.primes) < 2:
            raise CliError("config", "at least two primes are needed for certification")
        for p in self.primes:
            if not (1 << 31) < p < kernels.MAX_MOD or not isprime(p):
                raise CliError("config", f"{p} is not a prime in (2^31, 2^62)")
        if self.format not in ("json", "csv", "text"):
            raise CliError("config", f"unknown format {self.format}")

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(seed=self.seed, batch_size=self.batch_size, max_batches=self.budget_batches,
                              primes=tuple(self.primes), threads=self.threads)

    def hashed(self) -> dict:
        """Fields that can change a result (threads, cache, format cannot)."""
        d = asdict(self)
        for k in ("threads", "cache_dir", "format"):
            d.pop(k)
        d["primes"] = [str(p) for p in self.primes]
        return d


def parse_primes(text: str) -> tuple:
    parts = [t for t in text.replace(" ", "").split(",") if t]
    if len(parts) == 1 and int(parts[0]) <= len(PRIMES):
        return PRIMES[:int(parts[0])]
    return tuple(int(t) for t in parts)


# --- cache -----------------------------------------------------------------------


class Cache:
    def __init__(self, root: str | None):
        self.root = root
        if root:
            os.makedirs(root, exist_ok=True)

    def _path(self, stage: str, key: str) -> str:
        return os.path.join(self.root, f"{stage}-{key}.json")

    def get(self, stage: str, key: str):
        if not self.root or not os.path.exists(self._path(stage, key)):
            return None, None
        with open(self._path(stage, key)) as fh:
            try:
                blob = json.load(fh)
            except json.JSONDecodeError as e:
                raise CliError("cache", f"unreadable cache file {self._path(stage, key)}: {e}")
        h = content_hash(blob.get("content"))
        if h != blob.get("content_hash"):
            raise CliError("cache", f"content hash mismatch in {self._path(stage, key)}")
        return blob["content"], h

    def put(self, stage: str, key: str, content) -> str:
        h = content_hash(content)
        if self.root:
            tmp = self._path(stage, key) + ".tmp"
            with open(tmp, "w") as fh:
                json.dump({"stage": stage, "content_hash": h, "content": content}, fh)
            os.replace(tmp, self._path(stage, key))
        return h


class Stages:
    """Cached stage execution shared by the commands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.cache = Cache(cfg.cache_dir)
        self.artifacts: dict = {}
        self.timings: dict = {}

    def _run(self, stage, key_fields, build, load):
        key = config_hash(stage, key_fields)
        content, h = self.cache.get(stage, key)
        if content is None:
            t = time.time()
            obj = build()
            content = obj.to_json()
            h = self.cache.put(stage, key, content)
            self.timings[stage] = round(time.time() - t, 3)
        else:
            obj = load(content)
        self.artifacts[stage] = h
        return obj

    def coords(self, genus: int | None = None) -> CoordinateSystem:
        c = self.cfg
        g = genus or c.genus
        fields = {"genus": g, "weight": c.weight, "seed": c.seed, "primes": [str(p) for p in c.primes],
                  "batch": c.batch_size, "budget": c.budget_batches}
        return self._run("coordinates", fields, lambda: select_coordinates(g, c.weight, c.sampling()),
                         CoordinateSystem.from_json)

    def wmatrix(self) -> tuple[CoordinateSystem, WMatrix]:
        cs = self.coords()
        c = self.cfg
        fields = {"coords": self.artifacts["coordinates"], "genus": c.genus, "seed": c.seed,
                  "batch": c.batch_size, "budget": c.budget_batches, "primes": [str(p) for p in c.primes]}
        wm = self._run("wmatrix", fields, lambda: build_w_matrix(cs, c.genus, c.sampling()), WMatrix.from_json)
        return cs, wm

    def cocycle(self, witness: str = WITNESS, target: int = WITNESS_VALUE) -> CocycleVector:
        cs, wm = self.wmatrix()
        fields = {"wmatrix": self.artifacts["wmatrix"], "witness": witness, "target": target}
        return self._run("cocycle", fields, lambda: extract_cocycle(wm, cs, witness=witness, target=target),
                         CocycleVector.from_json)


def load_cocycle(path: str | None) -> CocycleVector:
    try:
        if path:
            return CocycleVector.load(path)
        with resources.files("hcocycle").joinpath("data", SHIPPED_COCYCLE).open() as fh:
            return CocycleVector.from_json(json.load(fh))
    except FileNotFoundError as e:
        raise CliError("input", f"cocycle file not found: {e.filename}")
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
        raise CliError("input", f"malformed cocycle file: {e}")


# --- commands ----------------------------------------------------------------------------


def cmd_dim_invariants(cfg: RunConfig, args) -> dict:
    st = Stages(cfg)
    coords = st.coords()
    return {"result": {"dimension": coords.rank, "genus": coords.genus, "weight": coords.weight,
                       "certificate": coords.certificate},
            "certified": bool(coords.certificate.get("two_prime_agreement", True)),
            "_stages": st}


def cmd_bracket_rank(cfg: RunConfig, args) -> dict:
    st = Stages(cfg)
    coords, wm = st.wmatrix()
    return {"result": {"invariants": coords.rank, "bracket_rank": wm.rank,
                       "abelianization_dim": coords.rank - wm.rank, "certificate": wm.certificate},
            "certified": bool(wm.certificate.get("two_prime_agreement", True)
                              and coords.certificate.get("two_prime_agreement", True)),
            "_stages": st}


def cmd_find_cocycle(cfg: RunConfig, args) -> dict:
    st = Stages(cfg)
    c = st.cocycle(args.witness, args.target)
    if args.out:
        c.save(args.out)
    return {"result": {"normalization": c.normalization, "provenance": c.provenance,
                       "witness_value": str(eval_cocycle(c, c.normalization["witness"])),
                       "written": args.out},
            "certified": True, "_stages": st}


def cmd_verify(cfg: RunConfig, args) -> dict:
    c = load_cocycle(args.cocycle)
    if args.mode == "numeric":
        genera = range(2, cfg.genus + 1) if args.all_genera else [cfg.genus]
        runs = [verify_cocycle_numeric(c, g, args.count, cfg.seed) for g in genera]
        ok = all(r["ok"] for r in runs)
        res = {"mode": "numeric", "runs": runs, "ok": ok}
        if not ok:
            first = next(r for r in runs if not r["ok"])
            raise CliError("verification", "cocycle does not vanish on a bracket",
                           genus=first["genus"], bracket=first["first_failure"])
        return {"result": res, "certified": ok}
    splits = [args.split] if args.split else list(range(1, c.weight // 2 + 1))
    out = []
    for i in splits:
        r = verify_cocycle_symbolic(c, i)
        entry = {"split": i, "zero": r.is_zero, "nonzero_terms": r.nonzero_terms}
        if args.control:
            m = mutation_control(c, i, base=r)
            entry["control_nonzero_terms"] = m.nonzero_terms
        out.append(entry)
    ok = all(e["zero"] for e in out) and all(e.get("control_nonzero_terms", 1) > 0 for e in out)
    if not ok:
        raise CliError("verification", "formal bracket value is not zero", splits=out)
    return {"result": {"mode": "symbolic", "splits": out, "ok": ok}, "certified": ok}


def cmd_eval(cfg: RunConfig, args) -> dict:
    c = load_cocycle(args.cocycle)
    try:
        s = Spider.parse(args.spider)
        v = eval_cocycle(c, s)
    except ValueError as e:
        raise CliError("input", str(e))
    return {"result": {"spider": str(s), "value": str(v)}, "certified": True}


def cmd_es(cfg: RunConfig, args) -> dict:
    st = Stages(cfg)
    if args.check == "chord":
        res = chord_dimension(cfg.weight, cfg.genus, cfg.primes[:2], columns=args.columns, seed=cfg.seed)
        if not res["certified"] and args.columns is not None:
            res = chord_dimension(cfg.weight, cfg.genus, cfg.primes[:2], columns=None)
        return {"result": res, "certified": res["certified"]}
    coords = st.coords()
    if args.check == "rank":
        M = es_matrix(coords)
        ranks = {str(p): dense_rank_mod(M, p) for p in cfg.primes[:2]}
        return {"result": {"basis_spiders": coords.rank, "classes": int(M.shape[1]), "rank_mod": ranks,
                           "rank": min(ranks.values())},
                "certified": len(set(ranks.values())) == 1, "_stages": st}
    c = load_cocycle(args.cocycle)
    res = es_factorization_check(c, coords, seed=cfg.seed)
    if not res["ok"]:
        raise CliError("verification", "cocycle is not zero on the kernel of ES", **res)
    return {"result": res, "certified": res["ok"], "_stages": st}


# --- output -------------------------------------------------------------------------


def build_report(command: str, cfg: RunConfig, out: dict) -> dict:
    stages = out.pop("_stages", None)
    body = {
        "command": command,
        "version": __version__,
        "config": cfg.hashed(),
        "config_hash": config_hash(command, cfg.hashed()),
        "artifacts": dict(stages.artifacts) if stages else {},
        "certified": out["certified"],
        "result": out["result"],
    }
    body["body_hash"] = content_hash(body)
    body["timings"] = dict(stages.timings) if stages else {}
    return body


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in obj:
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=1, default=str)
    rows = list(_flatten(report))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in rows:
            w.writerow([k, json.dumps(v, default=str) if isinstance(v, (list, dict)) else v])
        return buf.getvalue().rstrip("\n")
    return "\n".join(f"{k}: {v}" for k, v in rows)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--genus", type=int, default=None, help="genus g (default 8)")
    common.add_argument("--weight", type=int, default=12, help="weight w, at most 12")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--primes", type=parse_primes, default=PRIMES[:2],
                        help="count of built-in primes, or a comma separated list")
    common.add_argument("--threads", type=int, default=1, help="worker processes for row generation")
    common.add_argument("--budget-batches", type=int, default=100, help="max sampling batches per stage")
    common.add_argument("--batch-size", type=int, default=64)
    common.add_argument("--cache-dir", default=None, help="artifact cache directory")
    common.add_argument("--format", choices=["json", "csv", "text"], default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="hcocycle", description="Sp-invariant abelianization computations")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dim-invariants", parents=[common], help="dim of the invariant part")
    p.set_defaults(func=cmd_dim_invariants)
    p = sub.add_parser("bracket-rank", parents=[common], help="rank of the bracket image W")
    p.set_defaults(func=cmd_bracket_rank)
    p = sub.add_parser("find-cocycle", parents=[common], help="extract and normalize the cocycle")
    p.add_argument("--out", default=None, help="write the cocycle JSON here")
    p.add_argument("--witness", default=WITNESS, help="normalizing spider")
    p.add_argument("--target", type=int, default=WITNESS_VALUE, help="value of C on the witness")
    p.set_defaults(func=cmd_find_cocycle)
    p = sub.add_parser("verify", parents=[common], help="check the cocycle property")
    p.add_argument("--mode", choices=["numeric", "symbolic"], default="numeric")
    p.add_argument("--cocycle", default=None, help="cocycle JSON (default: shipped one)")
    p.add_argument("--count", type=int, default=100, help="numeric: brackets per genus")
    p.add_argument("--all-genera", action="store_true", help="numeric: every genus 2..g")
    p.add_argument("--split", type=int, default=None, help="symbolic: one split (default all)")
    p.add_argument("--control", action="store_true", help="symbolic: also run the mutation control")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("eval", parents=[common], help="evaluate the cocycle on a spider")
    p.add_argument("spider", help='e.g. "S(a1,b1,a1,...)"')
    p.add_argument("--cocycle", default=None)
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("es", parents=[common], help="cyclic trace checks")
    p.add_argument("--check", choices=["rank", "factorization", "chord"], default="rank")
    p.add_argument("--cocycle", default=None)
    p.add_argument("--columns", type=int, default=1200, help="chord: sampled matchings")
    p.set_defaults(func=cmd_es)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    genus = args.genus if args.genus is not None else (6 if args.command == "es" else 8)
    cfg = RunConfig(genus=genus, weight=args.weight, seed=args.seed, primes=tuple(args.primes),
                    threads=args.threads, budget_batches=args.budget_batches, batch_size=args.batch_size,
                    cache_dir=args.cache_dir, format=args.format)
    try:
        cfg.validate()
        if cfg.weight > SLOW_WEIGHT and args.command in ("dim-invariants", "bracket-rank", "find-cocycle"):
            log.warning("weight %d: expect a long run (minutes to hours)", cfg.weight)
        out = args.func(cfg, args)
        report = build_report(args.command, cfg, out)
        print(render(report, cfg.format))
        return 0 if report["certified"] else 1
    except (CliError, Unstabilized, PipelineError, ReconstructionError) as e:
        if isinstance(e, CliError):
            err = {"type": e.kind, "message": str(e), **e.extra}
        elif isinstance(e, Unstabilized):
            err = {"type": "unstabilized", "message": str(e), "lower_bound": e.lower_bound}
        elif isinstance(e, ReconstructionError):
            err = {"type": "reconstruction", "message": str(e)}
        else:
            err = {"type": "pipeline", "message": str(e)}
        print(json.dumps({"command": args.command, "error": err}, sort_keys=True, indent=1, default=str))
        return 2 if err["type"] == "config" else 1


if __name__ == "__main__":
    sys.exit(main())
