import csv
import json
from pathlib import Path

import pytest

from perflim.cli import EXIT_NUMERIC, EXIT_OK, EXIT_SCHEMA, EXIT_TREND, main, sweep_trend_check
from perflim.config import load_config, parse_config
from perflim.errors import ConfigError, UsageError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(**over):
    d = {
        "version": 1, "name": "small",
        "plant": {"kind": "integrating_nmp", "k": 2.0},
        "channel": {"f": 3.0, "h": 4.0, "sigma": 1.0, "gamma": 0.8},
        "epsilon": 0.5,
        "sweeps": [{"gamma": [0.0, 0.4, 0.8]}],
    }
    d.update(over)
    return d


def write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d, indent=2), encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def fig3_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3")
    assert main(["run", str(CONFIGS / "fig3.json"), "--out", str(out)]) == EXIT_OK
    return out / "fig3.csv"


def test_fig3_has_thirty_rows(fig3_csv):
    rows = read_rows(fig3_csv)
    assert len(rows) == 30
    assert not any(r["error"] for r in rows)
    assert (fig3_csv.parent / "fig3.gp").exists()
    r = next(r for r in rows if r["k"] == "2" and r["epsilon"] == "0.5")
    assert float(r["ju_star"]) == pytest.approx(0.8623724356959407, rel=1e-9)
    assert r["snr_tracking_total"] == "inf"


def test_rerun_is_byte_identical(tmp_path, fig3_csv):
    assert main(["run", str(CONFIGS / "fig3.json"), "--out", str(tmp_path), "--jobs", "2"]) == EXIT_OK
    assert (tmp_path / "fig3.csv").read_bytes() == fig3_csv.read_bytes()


def test_trend_checks(fig3_csv, capsys):
    assert main(["check-trend", str(fig3_csv), "--param", "k"]) == EXIT_TREND
    assert "FAIL k" in capsys.readouterr().out
    with pytest.raises(UsageError):
        sweep_trend_check(fig3_csv, "bandwidth", "nondecreasing")
    assert main(["check-trend", str(fig3_csv), "--param", "bandwidth"]) == EXIT_SCHEMA


def test_constant_column_passes(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("k,epsilon,f,h,sigma,gamma,j_star,error\n" +
                 "".join(f"2,0.5,{f},4,1,0.8,1.5,\n" for f in (1, 2, 3)), encoding="utf-8")
    assert sweep_trend_check(p, "f")[0]


def test_unknown_field_reports_line(tmp_path, capsys):
    d = small_config()
    d["channel"]["bandwidth"] = 2.0
    p = write(tmp_path, d)
    assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_SCHEMA
    err = capsys.readouterr().err
    assert "bandwidth" in err and "line" in err


def test_schema_errors():
    with pytest.raises(ConfigError):
        parse_config(small_config(version=2))
    with pytest.raises(ConfigError):
        parse_config(small_config(sweeps=[{"gamma": [0.8, 0.4, 0.9]}]))
    with pytest.raises(ConfigError):
        parse_config(small_config(sweeps=[{"zeta": [1.0]}]))
    with pytest.raises(ConfigError):
        parse_config(small_config(epsilon=1.5))


def test_invalid_json_exit(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"version": 1,\n "name": }', encoding="utf-8")
    assert main(["run", str(p)]) == EXIT_SCHEMA


def test_numeric_failure_row(tmp_path):
    d = small_config(plant={"kind": "tf", "num": [1.0], "den": [1.0, 3.0]})
    p = write(tmp_path, d)
    assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_NUMERIC
    rows = read_rows(tmp_path / "small.csv")
    assert len(rows) == 3 and all("PreconditionViolated" in r["error"] for r in rows)


@pytest.mark.parametrize("name", ["fig3", "fig4", "fig5"])
def test_round_trip(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    again = parse_config(json.loads(cfg.dumps()))
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_oracle_columns(tmp_path):
    d = small_config(oracle={"enable": True, "m": 6, "lam": 1.0})
    p = write(tmp_path, d)
    assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_OK
    for r in read_rows(tmp_path / "small.csv"):
        assert float(r["oracle_j"]) >= float(r["j_star"]) - 1e-9
        assert float(r["oracle_gap"]) == pytest.approx(float(r["oracle_j"]) - float(r["j_star"]), abs=1e-12)
