import datetime as dt
import json

import numpy as np
import pytest
from synth import load_csv, random_sessions

from energyscen.cli import main
from energyscen.config import RunConfig
from energyscen.ingest import read_compact

ELAAD_HEADER = ("TransactionId,UTCTransactionStart,UTCTransactionStop,ConnectedTime,"
                "ChargeTime,TotalEnergy,MaxPower")
ELIA_HEADER = ("Datetime;Measured & Upscaled;Week-ahead forecast;Day Ahead 11AM forecast;"
               "Most recent forecast;Most recent P10;Most recent P90;Monitored capacity;Load factor")


def elaad_file(path, n=400, seed=0):
    base = dt.datetime(2019, 3, 1)
    lines = [ELAAD_HEADER]
    for i, s in enumerate(random_sessions(np.random.default_rng(seed), n)):
        arr = base + dt.timedelta(days=i % 30, hours=s.t_arr)
        dep = arr + dt.timedelta(hours=s.dt_conn)
        lines.append(f"{i},{arr:%Y-%m-%d %H:%M:%S},{dep:%Y-%m-%d %H:%M:%S},"
                     f"{s.dt_conn!r},{s.dt_ch!r},{s.e_ch!r},{s.p_peak!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def elia_file(path, days=range(152, 160)):
    lines = [ELIA_HEADER]
    x = np.arange(96)
    shape = np.clip(np.sin((x - 24) / 48 * np.pi), 0, None)
    for d in days:
        for s in range(96):
            ts = dt.datetime(2022, 1, 1) + dt.timedelta(days=d - 1, minutes=15 * s)
            m = round(800 * shape[s] * (0.5 + (d % 3) / 4), 3)
            lines.append(f"{ts:%Y-%m-%dT%H:%M:%S};{m};{m * 1.2};{m * 1.1};{m + 1};{m * 0.8};{m * 1.3};1000;")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def load_config(tmp_path):
    cfg = {"schemas": {"load": {"columns": {
        "consumer_id": "id", "consumer_type": "type", "interval_start": "start",
        "offtake": "offtake", "injection": "injection"}}}}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def three_consumers(tmp_path):
    rng = np.random.default_rng(5)
    cons = [(c, t, rng.integers(0, 600, 35_040) / 1000, np.zeros(35_040))
            for c, t in (("A", 1), ("B", 2), ("C", 5))]
    p = tmp_path / "fluvius.csv"
    p.write_text(load_csv(cons))
    return p


def test_generate_ev_is_byte_identical(tmp_path, capsys):
    ev = elaad_file(tmp_path / "elaad.csv")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["generate", "ev", "--n", "100", "--seed", "42", "--in", str(ev), "--out", str(out)]) == 0
        outs.append((out / "ev_scenarios.csv").read_bytes())
    assert outs[0] == outs[1]
    text = outs[0].decode()
    assert text.startswith("# tool=energyscen version=0.1.0 seed=42 config_hash=")
    assert text.splitlines()[1] == "t_arr,t_dep,dt_conn,dt_ch,p_peak,e_ch"
    assert len(text.splitlines()) == 102


def test_threads_do_not_change_output(tmp_path):
    ev = elaad_file(tmp_path / "elaad.csv")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["generate", "ev", "--n", "60", "--seed", "1", "--in", str(ev), "--out", str(a)])
    main(["generate", "ev", "--n", "60", "--seed", "1", "--in", str(ev), "--out", str(b), "--threads", "3"])
    assert (a / "ev_scenarios.csv").read_bytes() == (b / "ev_scenarios.csv").read_bytes()


def test_missing_load_store_reports_error(tmp_path, capsys):
    rc = main(["analyze", "load-meta", "--out", str(tmp_path / "empty")])
    err = capsys.readouterr().err.strip()
    assert rc != 0
    assert len(err.splitlines()) == 1
    assert err.startswith("error module=cli kind=MissingInput") and "missing input" in err


def test_ingest_load_then_analyze(tmp_path, load_config, capsys):
    src = three_consumers(tmp_path)
    out = tmp_path / "out"
    assert main(["ingest", "load", "--config", str(load_config), "--in", str(src), "--out", str(out)]) == 0
    manifest = json.loads((out / "load_pool.bin.manifest.json").read_text())
    assert manifest["consumer_count"] == 3 and manifest["consumer_ids"] == ["A", "B", "C"]
    assert manifest["_meta"]["tool"] == "energyscen"
    assert len(read_compact(out / "load_pool.bin")) == 3

    assert main(["analyze", "load-meta", "--config", str(load_config), "--out", str(out)]) == 0
    table = (out / "table1.csv").read_text().splitlines()
    assert table[0].startswith("# tool=energyscen")
    assert table[2].startswith("Total # consumers,3,1.0,")
    assert main(["analyze", "peaks", "--kind", "reverse", "--window", "9", "--out", str(out),
                 "--format", "json"]) == 0
    week = json.loads((out / "worst_week_reverse_peak.json").read_text())
    assert week["_meta"]["window"] == 9 and week["end_day"] - week["start_day"] == 8


def test_ingest_ev_writes_canonical_and_rejections(tmp_path):
    ev = elaad_file(tmp_path / "elaad.csv", n=50)
    with open(ev, "a") as f:
        f.write("bad,2019-03-01 10:00:00,2019-03-01 09:00:00,1,1,1,1\n")
    out = tmp_path / "out"
    assert main(["ingest", "ev", "--in", str(ev), "--out", str(out)]) == 0
    rej = (out / "ev_rejected.csv").read_text().splitlines()
    assert rej[-1] == "52,departure before arrival"
    # the canonical file is picked up without --in
    assert main(["analyze", "ev-dists", "--out", str(out)]) == 0
    doc = json.loads((out / "ev_dists.json").read_text())
    assert doc["summary"]["sessions_used"] + doc["summary"]["sessions_excluded_out_of_range"] == 50


def test_pv_commands(tmp_path):
    pv = elia_file(tmp_path / "elia.csv")
    out = tmp_path / "out"
    assert main(["ingest", "pv", "--in", str(pv), "--out", str(out)]) == 0
    assert main(["analyze", "pv-forecast", "--out", str(out)]) == 0
    rep = json.loads((out / "pv_forecast.json").read_text())
    assert rep["mse_week_ahead"] > rep["mse_day_ahead"] > 0
    assert main(["export", "quartiles", "--out", str(out)]) == 0
    rows = (out / "pv_quartiles_month.csv").read_text().splitlines()
    assert rows[1] == "month,slot,hour,q10,q25,q50,q75,q90" and len(rows) == 2 + 96
    assert main(["generate", "pv", "--month", "6", "--n", "5", "--kwp-dist", "point:4", "--out", str(out)]) == 0
    assert len((out / "pv_scenarios_m6.csv").read_text().splitlines()) == 7


def test_export_fanchart(tmp_path):
    ev = elaad_file(tmp_path / "elaad.csv")
    out = tmp_path / "out"
    assert main(["export", "fanchart", "--n", "200", "--in", str(ev), "--out", str(out)]) == 0
    rows = (out / "ev_fanchart.csv").read_text().splitlines()
    assert rows[1] == "slot,hour,p5,p25,p50,p75,p95" and len(rows) == 2 + 96


def test_module_error_is_one_line(tmp_path, capsys):
    bad = tmp_path / "ev.csv"
    bad.write_text("nope,columns\n1,2\n")
    rc = main(["ingest", "ev", "--in", str(bad), "--out", str(tmp_path)])
    err = capsys.readouterr().err.strip()
    assert rc == 1 and err.startswith("error module=ingest kind=SchemaError msg=")


def test_config_round_trip_and_hash(tmp_path):
    cfg = RunConfig(seed=7, paths={"ev": "x.csv"}, peak_sampling="uniform")
    cfg.save(tmp_path / "c.json")
    back = RunConfig.load(tmp_path / "c.json")
    assert back.to_json() == cfg.to_json()
    assert back.config_hash() == cfg.config_hash()
    assert RunConfig(seed=7, paths={"ev": "x.csv"}, peak_sampling="uniform", output_dir="elsewhere",
                     threads=8).config_hash() == cfg.config_hash()
    assert RunConfig(seed=8).config_hash() != RunConfig(seed=7).config_hash()
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"sede": 1})


def test_config_from_environment(tmp_path, monkeypatch):
    ev = elaad_file(tmp_path / "elaad.csv", n=200)
    cfgp = tmp_path / "c.json"
    RunConfig(seed=3, paths={"ev": str(ev)}, output_dir=str(tmp_path / "o")).save(cfgp)
    monkeypatch.setenv("ENERGYSCEN_CONFIG", str(cfgp))
    assert main(["generate", "ev", "--n", "10"]) == 0
    head = (tmp_path / "o" / "ev_scenarios.csv").read_text().splitlines()[0]
    assert " seed=3 " in head


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("ingest", "analyze", "generate", "export"):
        assert cmd in out
