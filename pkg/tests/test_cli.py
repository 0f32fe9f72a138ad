"""Tests for the command-line interface."""

import json

import pytest

from imdrx.cli import main, parse_values, read_config, ConfigError
from imdrx.harness import read_csv
from imdrx.receivers import TrainedReceiver


def test_parse_values():
    assert parse_values("-30:20:5") == tuple(float(v) for v in range(-30, 21, 5))
    assert parse_values("0,4,8") == (0.0, 4.0, 8.0)
    assert parse_values("10:0:-5") == (10.0, 5.0, 0.0)
    assert parse_values("0:1:0.1")[-1] == 1.0


def test_theory_prints_awgn_value(capsys):
    assert main(["theory", "--mod", "bpsk", "--ebn0", "8"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "ebn0_db,ber"
    assert float(lines[1].split(",")[1]) == pytest.approx(1.909e-4, rel=1e-3)


def test_unknown_flag_is_usage_error(capsys):
    assert main(["sweep-ebn0", "--bogus"]) != 0
    assert "usage:" in capsys.readouterr().err


def test_missing_command(capsys):
    assert main([]) != 0


def test_sweep_ebn0_is_reproducible(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = main(["sweep-ebn0", "--ebn0", "0:4:2", "--iip3", "-10", "--receivers", "conventional,ann_canceler",
                     "--seed", "3", "--max-bits", "100000", "--n-train", "300", "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    recs = read_csv(tmp_path / "a.csv")
    assert len(recs) == 6 and {r.iip3_dbm for r in recs} == {-10.0}


def test_sweep_iip3_to_stdout(capsys):
    assert main(["sweep-iip3", "--iip3=-20,20", "--receivers", "conventional", "--max-bits", "50000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[0].startswith("modulation,receiver")


def test_blockers_off(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["sweep-ebn0", "--ebn0", "8", "--blocker-db", "off", "--receivers", "conventional",
                 "--out", str(out)]) == 0
    assert read_csv(out)[0].blocker_offset_db is None


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# waterfall\nmod = qpsk\nebn0 = 0,2   # dB\nreceivers = conventional\nmax-bits = 20000\n"
                   "--seed = 4\n")
    out = tmp_path / "x.csv"
    assert main(["sweep-ebn0", "--config", str(cfg), "--ebn0", "6", "--out", str(out)]) == 0
    recs = read_csv(out)
    assert [r.ebn0_db for r in recs] == [6.0]
    assert recs[0].modulation.value == "qpsk" and recs[0].bits_tested <= 20000


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["sweep-ebn0", "--config", str(cfg)]) != 0
    cfg.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        read_config(cfg)
    assert main(["sweep-ebn0", "--config", str(tmp_path / "absent.cfg")]) != 0


def test_train_then_validate_model(tmp_path, capsys):
    model = tmp_path / "rx.json"
    assert main(["train", "--kind", "ann_canceler", "--mod", "qpsk", "--iip3=-20", "--seed", "2",
                 "--out", str(model)]) == 0
    rx = TrainedReceiver.loads(model.read_text())
    assert rx.kind.value == "ann_canceler" and len(rx.nets) == 1
    assert json.loads(model.read_text())["format"] == "imdrx.receiver/1"
    assert main(["validate", "--only", "2", "--model", str(model)]) == 0
    assert "[PASS]" in capsys.readouterr().out


def test_validate_rejects_unknown_check():
    assert main(["validate", "--only", "42"]) != 0
