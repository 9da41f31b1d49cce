import json
import os
from fractions import Fraction

from hcocycle.cli import load_cocycle, main, parse_primes
from hcocycle.linalg import PRIMES

WITNESS = "S(a1,b1,a1,a1,a1,a1,a2,a1,b1,b1,b1,b1,b1,b2)"
SMALL = ["--genus", "2", "--weight", "6", "--witness", "S(a1,b1,a1,a1,a2,b1,b1,b2)", "--target", "1"]


def run(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, out


def run_json(capsys, argv):
    rc, out = run(capsys, argv)
    return rc, json.loads(out)


def test_eval_witness_shipped(capsys):
    rc, rep = run_json(capsys, ["eval", WITNESS])
    assert rc == 0
    assert rep["result"]["value"] == "5832"
    assert rep["certified"] is True


def test_eval_bad_spider(capsys):
    rc, rep = run_json(capsys, ["eval", "S(a1,c2,b1)"])
    assert rc == 1
    assert rep["error"]["type"] == "input"


def test_eval_wrong_degree(capsys):
    rc, rep = run_json(capsys, ["eval", "S(a1,b1,a2,b2)"])
    assert rc == 1
    assert rep["error"]["type"] == "input"


def test_weight_limit_is_config_error(capsys):
    rc, rep = run_json(capsys, ["dim-invariants", "--weight", "14"])
    assert rc == 2
    assert rep["error"]["type"] == "config"
    assert "weight" in rep["error"]["message"]


def test_small_prime_rejected(capsys):
    rc, rep = run_json(capsys, ["dim-invariants", "--weight", "2", "--primes", "101,103"])
    assert rc == 2
    assert rep["error"]["type"] == "config"


def test_one_prime_rejected(capsys):
    rc, rep = run_json(capsys, ["dim-invariants", "--weight", "2", "--primes", str(PRIMES[0])])
    assert rc == 2


def test_parse_primes():
    assert parse_primes("3") == PRIMES[:3]
    assert parse_primes(f"{PRIMES[0]},{PRIMES[2]}") == (PRIMES[0], PRIMES[2])


def test_report_is_byte_stable(capsys):
    argv = ["dim-invariants", "--genus", "3", "--weight", "6"]
    _, a = run_json(capsys, argv)
    _, b = run_json(capsys, argv)
    a.pop("timings"), b.pop("timings")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert a["result"]["dimension"] == 5


def test_threads_do_not_change_body(capsys):
    argv = ["dim-invariants", "--genus", "2", "--weight", "6"]
    _, a = run_json(capsys, argv)
    _, b = run_json(capsys, argv + ["--threads", "2"])
    assert a["body_hash"] == b["body_hash"]


def test_formats(capsys):
    rc, out = run(capsys, ["eval", WITNESS, "--format", "csv"])
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0] == "key,value"
    assert "result.value,5832" in lines
    rc, out = run(capsys, ["eval", WITNESS, "--format", "text"])
    assert "result.value: 5832" in out.splitlines()


def test_find_cocycle_cache_reuse_and_corruption(capsys, tmp_path):
    cache = str(tmp_path / "cache")
    out = str(tmp_path / "c.json")
    rc, first = run_json(capsys, ["find-cocycle", *SMALL, "--cache-dir", cache, "--out", out])
    assert rc == 0
    assert first["result"]["witness_value"] == "1"
    assert set(first["timings"]) == {"coordinates", "wmatrix", "cocycle"}
    rc, second = run_json(capsys, ["find-cocycle", *SMALL, "--cache-dir", cache])
    assert rc == 0
    assert second["timings"] == {}
    assert second["artifacts"] == first["artifacts"]
    assert second["result"]["normalization"] == first["result"]["normalization"]

    # the written cocycle is usable by the other commands
    rc, rep = run_json(capsys, ["eval", "S(a1,b1,a1,a1,a2,b1,b1,b2)", "--cocycle", out])
    assert rep["result"]["value"] == "1"
    rc, rep = run_json(capsys, ["verify", "--genus", "2", "--count", "10", "--cocycle", out])
    assert rc == 0 and rep["result"]["ok"]

    path = next(os.path.join(cache, f) for f in os.listdir(cache) if f.startswith("wmatrix-"))
    blob = json.load(open(path))
    blob["content"]["rank"] += 1
    json.dump(blob, open(path, "w"))
    rc, rep = run_json(capsys, ["find-cocycle", *SMALL, "--cache-dir", cache])
    assert rc == 1
    assert rep["error"]["type"] == "cache"
    assert "hash mismatch" in rep["error"]["message"]


def test_corrupted_cocycle_fails_verification(capsys, tmp_path):
    c = load_cocycle(None)
    c.primitive[3] += 1
    c.coefficients[3] = c.primitive[3] * Fraction(c.normalization["scale"])
    bad = str(tmp_path / "bad.json")
    c.save(bad)
    rc, rep = run_json(capsys, ["verify", "--genus", "8", "--count", "3", "--cocycle", bad])
    assert rc == 1
    err = rep["error"]
    assert err["type"] == "verification"
    assert err["genus"] == 8
    assert err["bracket"]["P"].startswith("S(") and err["bracket"]["Q"].startswith("S(")
    assert err["bracket"]["value"] != "0"


def test_missing_cocycle_file(capsys, tmp_path):
    rc, rep = run_json(capsys, ["eval", WITNESS, "--cocycle", str(tmp_path / "nope.json")])
    assert rc == 1
    assert rep["error"]["type"] == "input"


def test_shipped_cocycle_numeric_g8(capsys):
    rc, rep = run_json(capsys, ["verify", "--genus", "8", "--count", "3"])
    assert rc == 0
    assert rep["result"]["runs"][0]["checked"] == 3


def test_inconsistent_cocycle_file_rejected(capsys, tmp_path):
    c = load_cocycle(None)
    c.coefficients[3] += 1
    bad = str(tmp_path / "bad.json")
    c.save(bad)
    rc, rep = run_json(capsys, ["eval", WITNESS, "--cocycle", bad])
    assert rc == 1
    assert rep["error"]["type"] == "input" and "primitive" in rep["error"]["message"]
