import json

import pytest

from nclab import cli


def _run(capsys, *argv):
    status = cli.main(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


def _strip_time(text):
    return "\n".join(l for l in text.splitlines() if '"timestamp"' not in l)


def test_expand_example(capsys, tmp_path):
    status, out, _ = _run(capsys, "expand", "--dim", "3", "--K", "3", "--seed", "0", "--out", str(tmp_path))
    d = json.loads(out)
    assert status == 0 and d["schema"] == 1 and d["seed"] == 0
    assert all(o["agree"] for o in d["results"]["orders"])
    header = (tmp_path / "expansion.csv").read_text().splitlines()[0]
    assert header.startswith("k,cs_re")


def test_byte_identical_modulo_timestamp(capsys):
    a = _run(capsys, "oneloop", "--seed", "5")[1]
    b = _run(capsys, "oneloop", "--seed", "5")[1]
    assert _strip_time(a) == _strip_time(b)


def test_rieffel_flag(capsys):
    status, out, _ = _run(capsys, "torus-sdq", "--rieffel-failure")
    r = json.loads(out)["results"]["rieffel_failure"]
    assert status == 0 and r["norm_at_hbar0"] < 1e-10 and abs(r["norm_at_hbarN"] - 1) < 1e-10


def test_usage_errors(capsys, tmp_path):
    assert _run(capsys)[0] == 64
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert _run(capsys, "--config", str(empty))[0] == 64
    bad = tmp_path / "bad.json"
    bad.write_text('{"subcommand": "ssf", "nope": 1}')
    status, _, err = _run(capsys, "--config", str(bad))
    assert status == 64 and "nope" in err
    assert _run(capsys, "ssf", "--f", '{"family": "Unknown"}')[0] == 64


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "ssf", "dim": 3, "trials": 2}))
    status, out, _ = _run(capsys, "ssf", "--config", str(cfg), "--trials", "3")
    echo = json.loads(out)["config"]
    assert status == 0 and echo["dim"] == 3 and echo["trials"] == 3 and echo["n"] == 1


def test_failing_check_gives_status_2(capsys):
    # the commutator residual decays at second order, outside the first-order window
    status, out, err = _run(capsys, "torus-sdq", "--hbar-grid", "0.25,0.125,0.0625")
    assert status == 2 and "dirac slope" in err
    assert json.loads(out)["passed"] is False


def test_float_format():
    assert cli.dumps(0.1) == "0.10000000000000001"
    assert cli.dumps({"z": 1 + 2j}) == '{\n  "z": {\n    "re": 1,\n    "im": 2\n  }\n}'
