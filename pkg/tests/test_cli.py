from __future__ import annotations

import json

import pytest

from effmeter.cli import main

TRADES = """timestamp,symbol,price,size,exchange
2003-02-03T09:30:05-05:00,XYZ,10.00,100,N
2003-02-03T09:30:40-05:00,XYZ,10.10,200,N
2003-02-03T09:30:10-05:00,ABC,50.00,10,N
2003-02-03T09:30:11-05:00,SPY,85.00,500,N
2003-02-03T10:00:00-05:00,XYZ,0.00,100,N
2003-02-03T10:01:00-05:00,XYZ,bogus,100,N
2003-02-03T11:00:00-05:00,XYZ,10.20,50,N
2003-02-04T09:30:01-05:00,XYZ,10.25,10,N
2003-02-04T09:31:00-05:00,ABC,51.00,20,N
"""

SYMBOL_MAP = """effective_date,old_symbol,new_symbol
2003-01-01,ABC,ABCD
"""

EXCLUSIONS = "SPY\n"

SYNTH_CONF = """n_symbols = 6
start_month = 2001-01
months = 26
seed = 5
idio_vol_bps = 8
"""

EXP_CONF = """store = {store}
start_month = 2001-01
end_month = 2003-02
learners = logistic,random
universe_size = 4
seed = 11
logistic.max_iters = 60
"""


@pytest.fixture(scope="module")
def synth_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    conf = root / "synth.conf"
    conf.write_text(SYNTH_CONF)
    store = root / "bars"
    assert main(["synth", "--config", str(conf), "--store", str(store)]) == 0
    return store


class TestIngest:
    def _write_inputs(self, tmp_path):
        (tmp_path / "trades.csv").write_text(TRADES)
        (tmp_path / "map.csv").write_text(SYMBOL_MAP)
        (tmp_path / "excl.txt").write_text(EXCLUSIONS)

    def test_valid_file_counts(self, tmp_path, capsys):
        self._write_inputs(tmp_path)
        rc = main(["ingest", str(tmp_path / "trades.csv"),
                   "--store", str(tmp_path / "store"),
                   "--symbol-map", str(tmp_path / "map.csv"),
                   "--exclusions", str(tmp_path / "excl.txt")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "rows: 9" in out
        assert "malformed: 2" in out
        assert "excluded: 1" in out
        # XYZ both days; ABCD on day one (no prior close on day two? it trades
        # at 09:31 with a prior close from day one, so both days build)
        assert "symbol_days_built: 4" in out

        from effmeter.store import BarStore
        store = BarStore(tmp_path / "store")
        assert len(store.dates()) == 2
        d = store.dates()[0]
        assert store.symbols(d) == ["ABCD", "XYZ"]
        xyz = store.load_ohlcv(d, "XYZ")
        assert xyz[0, 0] == 10.00 and xyz[0, 3] == 10.10 and xyz[0, 4] == 300

    def test_missing_file_no_partial_store(self, tmp_path, capsys):
        rc = main(["ingest", str(tmp_path / "nope.csv"),
                   "--store", str(tmp_path / "store")])
        assert rc == 2
        assert not (tmp_path / "store").exists()

    def test_first_day_leading_gap_untradable(self, tmp_path, capsys):
        # ABC's first trade on its first day is after minute zero: untradable
        (tmp_path / "t.csv").write_text(
            "timestamp,symbol,price,size,exchange\n"
            "2003-02-03T09:35:00-05:00,ABC,50.00,10,N\n")
        rc = main(["ingest", str(tmp_path / "t.csv"),
                   "--store", str(tmp_path / "store")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "untradable_symbol_days: 1" in out


def test_selfcheck_lists_every_check_once(capsys):
    assert main(["selfcheck"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    names = [line.split(" ", 1)[1] for line in lines]
    assert len(names) == len(set(names))
    assert all(line.startswith("PASS ") for line in lines)
    assert "nn_gradient_finite_difference" in names
    assert "decide_truth_table" in names


def test_selfcheck_catches_corrupted_gradient(monkeypatch, capsys):
    import effmeter.learners as learners

    real = learners.nn_gradient

    def corrupted(params, x, y):
        return [g * 1.5 for g in real(params, x, y)]

    monkeypatch.setattr(learners, "nn_gradient", corrupted)
    assert main(["selfcheck"]) == 3
    out = capsys.readouterr().out
    assert "FAIL nn_gradient_finite_difference" in out


def test_usage_error_exit_code():
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_bars_summary_and_dump(synth_store, tmp_path, capsys):
    assert main(["bars", "--store", str(synth_store)]) == 0
    out = capsys.readouterr().out
    assert "dates:" in out and "first: 2001-01-01" in out

    from effmeter.store import BarStore
    d = BarStore(synth_store).dates()[0]
    out_csv = tmp_path / "dump.csv"
    rc = main(["bars", "--store", str(synth_store), "--date", d.isoformat(),
               "--symbol", "SYM000", "--out", str(out_csv)])
    assert rc == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "minute,open,high,low,close,volume"
    assert len(lines) == 391

    assert main(["bars", "--store", str(synth_store), "--date", "2050-01-03"]) == 2


def test_universe_command(synth_store, capsys):
    rc = main(["universe", "--store", str(synth_store), "--date", "2002-06-03",
               "--size", "3"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("1,SYM")


def test_run_outputs_and_byte_identical_rerun(synth_store, tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text(EXP_CONF.format(store=synth_store))
    out1 = tmp_path / "out1"
    out2 = tmp_path / "out2"
    assert main(["run", "--config", str(conf), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(conf), "--out", str(out2)]) == 0
    names = ["daily_returns.csv", "cumulative.csv", "smoothed.csv",
             "return_hist.csv", "precision_hist.csv", "split_report.csv",
             "trade_log_logistic.csv", "trade_log_random.csv",
             "run_manifest.json"]
    for name in names:
        a, b = (out1 / name).read_bytes(), (out2 / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"

    manifest = json.loads((out1 / "run_manifest.json").read_text())
    assert manifest["config"]["seed"] == 11
    assert len(manifest["months"]) == 2  # one test month x two learners
    assert {m["learner"] for m in manifest["months"]} == {"logistic", "random"}
    assert manifest["store_checksum"]

    # seed override changes outputs
    out3 = tmp_path / "out3"
    assert main(["run", "--config", str(conf), "--out", str(out3),
                 "--seed", "12"]) == 0
    assert (out3 / "run_manifest.json").read_bytes() != \
        (out1 / "run_manifest.json").read_bytes()


def test_report_recomputes_from_daily(synth_store, tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text(EXP_CONF.format(store=synth_store))
    out = tmp_path / "out"
    assert main(["run", "--config", str(conf), "--out", str(out)]) == 0
    hft = tmp_path / "hft.csv"
    hft.write_text("month,hft_ratio\n2003-02,0.41\n")
    rep = tmp_path / "rep"
    rc = main(["report", "--daily", str(out / "daily_returns.csv"),
               "--out", str(rep), "--split-date", "2003-02-28",
               "--hft-file", str(hft)])
    assert rc == 0
    assert (rep / "split_report.csv").is_file()
    assert (rep / "correlations.csv").is_file()
    # split report recomputed from the daily file matches the run's own
    assert (rep / "split_report.csv").read_bytes() == \
        (out / "split_report.csv").read_bytes()


def test_run_rejects_bad_config(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("start_month = 2001-01\n")
    assert main(["run", "--config", str(conf), "--out", str(tmp_path / "o")]) == 2
