import json
import subprocess
import sys

import pytest

from towerlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


def test_table_reproduces_term_list(capsys):
    code, out, _ = run(capsys, "table", "--seq", "zi", "--n", "7")
    assert code == 0
    vals = [float(line.split("\t")[1]) for line in out.splitlines()]
    assert [f"{v:.6g}" for v in vals] == ["0.5", "0.890899", "0.550457", "0.867251", "0.56342", "0.860843", "0.566835"]


def test_table_single_row(capsys):
    code, out, _ = run(capsys, "table", "--seq", "zi", "--n", "1")
    assert out.splitlines() == ["1\t0.5"]


def test_table_zii_brackets_limits(capsys):
    code, data = run_json(capsys, "table", "--seq", "zii", "--n", "4")
    v = [float(r["value"]) for r in data["rows"]]
    # odd terms sit below the odd limit, even terms above the even limit
    assert v[0] < v[2] < 0.54878 < 0.77954 < v[3] < v[1]


def test_limits_text_and_json(capsys):
    code, out, _ = run(capsys, "limits", "--seq", "zii", "--parity", "odd", "--digits", "50", "--no-cache")
    assert code == 0
    assert out.strip() == "0.54877354704085687513069922740691455562600046738030"
    code, data = run_json(capsys, "limits", "--seq", "zi", "--parity", "even", "--digits", "20", "--no-cache")
    assert data["enclosure"]["value"] == "0.85885772008416606762"
    assert data["config"]["digits"] == 20 and data["config"]["prec"] == 256
    assert data["cache"] == "off"


def test_limits_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["limits", "--digits", "0"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["limits", "--parity", "sideways"])
    assert e.value.code == 2


def test_limits_computation_failure_exit_code(capsys, monkeypatch):
    import towerlab.cli as cli
    from towerlab.analysis import InsufficientContraction

    def boom(*a, **k):
        raise InsufficientContraction("no contraction")

    monkeypatch.setattr(cli, "enclose_subsequence_limit", boom)
    code, _, err = run(capsys, "limits", "--digits", "10", "--no-cache")
    assert code == 3 and "no contraction" in err


def test_limits_cache_hit_skips_recomputation(capsys, monkeypatch, tmp_path):
    import towerlab.cli as cli

    args = ("limits", "--seq", "zii", "--parity", "even", "--digits", "30", "--cache-dir", str(tmp_path))
    code, first = run_json(capsys, *args)
    assert first["cache"] == "miss"

    def boom(*a, **k):
        raise AssertionError("recomputed despite a warm cache")

    monkeypatch.setattr(cli, "enclose_subsequence_limit", boom)
    code, second = run_json(capsys, *args)
    assert second["cache"] == "hit"
    assert second["enclosure"] == first["enclosure"]
    # a different precision is a different key
    with pytest.raises(AssertionError, match="recomputed"):
        main([*args, "--prec", "320"])


def test_json_output_is_deterministic(capsys):
    args = ("limits", "--seq", "zi", "--parity", "odd", "--digits", "25", "--no-cache", "--json")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b
    args = ("certify", "dolan", "--candidate", "0.8588", "--json")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b


def test_certify_dolan_valid_and_invalid(capsys):
    code, data = run_json(capsys, "certify", "dolan", "--seq", "zi", "--parity", "even", "--candidate", "0.8588",
                          "--depth", "7", "--theta", "0.8", "--tmax", "0.033")
    assert code == 0 and data["valid"]
    assert data["certificate"]["kind"] == "dolan_lower"
    code, data = run_json(capsys, "certify", "dolan", "--candidate", "0.86")
    assert code == 4 and not data["valid"]


def test_certify_replay(capsys, tmp_path):
    code, out, _ = run(capsys, "certify", "dolan", "--candidate", "0.8588", "--json")
    f = tmp_path / "cert.json"
    f.write_text(out)
    code, out, _ = run(capsys, "certify", "replay", "--file", str(f))
    assert code == 0 and "VALID" in out
    data = json.loads(f.read_text())
    data["certificate"]["orbit"][0][0] = "0.1"
    f.write_text(json.dumps(data))
    code, _, _ = run(capsys, "certify", "replay", "--file", str(f))
    assert code == 4


def test_certify_cipra(capsys):
    code, data = run_json(capsys, "certify", "cipra", "--k", "1")
    assert code == 0
    lo, hi = data["certificate"]["orbit"]
    assert lo[0].startswith("0.5504566141") and hi[0].startswith("0.89089871814")


def test_shoot(capsys):
    code, data = run_json(capsys, "shoot", "--t1", "0.711", "--n", "9", "--sig", "6")
    assert data["shooting"]["first_violation"]["index"] == 8
    code, data = run_json(capsys, "shoot", "--bisect", "0.70", "0.73", "--n", "25")
    assert 0.711 < float(data["bisect"]["t1_star"]) < 0.719
    code, _, _ = run(capsys, "shoot", "--t1", "1.5")
    assert code == 2
    with pytest.raises(SystemExit):
        main(["shoot"])


def test_stabilized_csv(capsys):
    code, out, _ = run(capsys, "stabilized", "--n", "3", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "n,a_n,b_n" and len(lines) == 4


def test_interp_commands(capsys):
    code, out, _ = run(capsys, "interp", "--x", "2.5", "3.5", "--derivative", "--format", "csv")
    rows = [line.split(",") for line in out.splitlines()]
    assert rows[0] == ["x", "A1", "dA1"]
    assert float(rows[1][2]) < 0 < float(rows[2][2])
    code, out, _ = run(capsys, "interp", "--x", "2", "--format", "csv")
    assert out.splitlines() == ["x,A1", "2.0,0.89089871814"]
    code, data = run_json(capsys, "interp", "--product", "4")
    assert [r["m"] for r in data["product"]] == [1, 2, 3, 4]


def test_rate(capsys):
    code, data = run_json(capsys, "rate", "--seq", "zii", "--parity", "even", "--n-min", "4", "--n-max", "16")
    assert code == 0 and isinstance(data["rate"]["k_hat"], str)


def test_oeis_compare_and_mismatch(capsys, fixtures_dir, tmp_path):
    code, data = run_json(capsys, "oeis", "compare", "--id", "A328942", "--digits", "40",
                          "--offline", str(fixtures_dir / "b328942.txt"))
    assert code == 0 and data["comparison"]["matched_prefix"] >= 40 and data["constant"] == "zi:even"
    bad = tmp_path / "b.txt"
    lines = (fixtures_dir / "b328942.txt").read_text().splitlines()
    lines[13] = lines[13].split()[0] + " 0" if not lines[13].endswith(" 0") else lines[13].split()[0] + " 1"
    bad.write_text("\n".join(lines) + "\n")
    code, data = run_json(capsys, "oeis", "compare", "--id", "A328942", "--digits", "40", "--seq", "zi",
                          "--parity", "even", "--offline", str(bad))
    assert code == 5 and data["comparison"]["first_mismatch"] == 13


def test_oeis_offline_miss_and_cache(capsys, fixtures_dir, tmp_path):
    code, _, err = run(capsys, "oeis", "fetch", "--id", "A328942", "--offline", "--cache-dir", str(tmp_path))
    assert code == 3 and "network access is disabled" in err
    (tmp_path / "oeis").mkdir()
    (tmp_path / "oeis" / "b328942.txt").write_text((fixtures_dir / "b328942.txt").read_text())
    code, data = run_json(capsys, "oeis", "fetch", "--id", "A328942", "--offline", "--cache-dir", str(tmp_path))
    assert code == 0 and data["terms"] == 48
    code, _, _ = run(capsys, "oeis", "fetch", "--id", "X1")
    assert code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "towerlab", "table", "--n", "2"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.splitlines()[1].startswith("2\t0.8908")
