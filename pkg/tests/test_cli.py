import csv
import json

import numpy as np
import pytest

from wavelab.cli import REFERENCE_THRESHOLDS, main, parse_int_range, read_config
from wavelab.mapping import RelaxedMapping, seeded_mapping


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_codes_list(capsys):
    code, out, _ = run(capsys, "codes", "list")
    assert code == 0
    assert "C1: W=3" in out and "C4: W=2" in out


def test_codes_show(capsys):
    code, out, _ = run(capsys, "codes", "show", "C3")
    assert code == 0
    assert json.loads(out.splitlines()[0])["components"] == [[[2, 2, 2, 2]], [[2, 2, 2, 2]]]


def test_unknown_subcommand_and_flag(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "codes", "list", "--nope")[0] == 2
    code, _, err = run(capsys, "codes", "show", "C9")
    assert code == 2 and "unknown code" in err


def test_bad_mode_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "threshold", "--code", "C1", "--mode", "ring", "--cache-dir", str(tmp_path))
    assert code == 2 and "unknown mode" in err


def test_curves_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        code, _, _ = run(capsys, "curves", "--labeling", "gray", "--snr", "6", "--seed", "1",
                         "--n-symbols", "3000", "--out", str(p))
        assert code == 0
    assert a.read_text() == b.read_text()
    assert a.read_text().splitlines()[0] == "labeling,snr_db,bit,i_a,i_e"
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["command_line"][1] == "curves"


def test_wave_bec_csv(capsys, tmp_path):
    out = tmp_path / "wave.csv"
    code, text, _ = run(capsys, "wave-bec", "--code", "C1", "--epsilon", "0.46",
                        "--known", "25,26,27", "--out", str(out))
    assert code == 0 and "decoded" in text
    rows = list(csv.DictReader(open(out)))
    assert set(rows[0]) == {"iteration", "position", "erasure_prob"}
    last = max(int(r["iteration"]) for r in rows)
    assert all(float(r["erasure_prob"]) < 1e-9 for r in rows if int(r["iteration"]) == last)
    assert (tmp_path / "wave.csv.manifest.json").exists()


def test_wave_bec_stalls_without_seed(capsys):
    code, text, _ = run(capsys, "wave-bec", "--code", "C1", "--epsilon", "0.46")
    assert code == 0 and "stalled" in text


def test_mapping_validate_exit_codes(capsys, tmp_path):
    rel = RelaxedMapping(2, np.r_[0, 0.5, 0, 0.5, 0, 0, 0, 0], np.r_[np.full(4, 0.25), np.zeros(4)])
    m = seeded_mapping(rel, 4, 10, 2)
    good = tmp_path / "good.json"
    d = rel.to_dict(4, 10, 2)
    d["vec_rest"] = m.d[:, -1].tolist()
    good.write_text(json.dumps(d))
    assert run(capsys, "mapping", "validate", str(good))[0] == 0
    d["vec_rest"] = np.r_[np.full(4, 0.25), np.zeros(4)].tolist()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    code, out, _ = run(capsys, "mapping", "validate", str(bad))
    assert code == 2 and "INVALID" in out
    junk = tmp_path / "junk.json"
    junk.write_text("{}")
    assert run(capsys, "mapping", "validate", str(junk))[0] == 2


def test_threshold_prints_three_decimals(capsys, tmp_path):
    code, out, _ = run(capsys, "threshold", "--code", "C1", "--mode", "uncoupled", "--labeling", "gray",
                       "--tol-db", "0.1", "--n-symbols", "4000", "--cache-dir", str(tmp_path))
    assert code == 0
    value = float(out.split(":")[1].split("dB")[0])
    assert 3.0 < value < 4.0
    assert "(tol 0.1 dB)" in out


def test_exit_chart_csv(capsys, tmp_path):
    out = tmp_path / "exit.csv"
    code, _, _ = run(capsys, "exit", "--code", "C1", "--labeling", "sp", "--snr", "4.0", "--points", "11",
                     "--n-symbols", "3000", "--cache-dir", str(tmp_path), "--out", str(out))
    assert code == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["i_a", "vnd", "cnd_inv"] and len(rows) == 12


def test_parse_helpers(tmp_path):
    assert parse_int_range("0..3,8") == [0, 1, 2, 3, 8]
    cfg = tmp_path / "opt.toml"
    cfg.write_text("# settings\npopulation = 16\nF = 0.5\nbracket = [1.0, 5.0]\nname = 'x'\n")
    assert read_config(cfg) == {"population": 16, "F": 0.5, "bracket": [1.0, 5.0], "name": "x"}


def test_reference_table_is_complete():
    assert len(REFERENCE_THRESHOLDS) == 32
    assert REFERENCE_THRESHOLDS[("C1", "gray", "uncoupled", "de")] == 3.412


def test_optimize_writes_valid_mapping(capsys, tmp_path):
    out = tmp_path / "best.json"
    code, text, _ = run(capsys, "optimize", "--code", "C1", "--L", "10", "--scheme", "gray", "--T", "2",
                        "--population", "8", "--generations", "1", "--seed", "7",
                        "--n-symbols", "3000", "--cache-dir", str(tmp_path), "--out", str(out))
    assert code == 0, text
    payload = json.loads(out.read_text())
    assert payload["manifest"]["seed"] == 7 and payload["T_uni"] == 2
    assert run(capsys, "mapping", "validate", str(out))[0] == 0
