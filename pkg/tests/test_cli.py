import json
import os

import pytest

from evfilt import read_stream, SensorGeometry
from evfilt.cli import main

G = SensorGeometry(128, 128)
GEO = ["--width", "128", "--height", "128"]


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def noisy(tmp_path, capsys, scenes_dir):
    clean = tmp_path / "clean.csv"
    noisy = tmp_path / "noisy.csv"
    spec = json.load(open(os.path.join(scenes_dir, "falling_disk.json")))
    spec["duration_us"] = 1_000_000
    (tmp_path / "scene.json").write_text(json.dumps(spec))
    assert _run(capsys, "synth", tmp_path / "scene.json", clean)[0] == 0
    assert _run(capsys, "inject", "--rate", "1.0", "--seed", "7", *GEO, clean, noisy)[0] == 0
    return noisy


def test_filter_smoke(tmp_path, capsys, noisy):
    code, out, _ = _run(capsys, "filter", "--algo", "dif", "--len-us", "1000", "--scale", "16", "--u", "0.25",
                        *GEO, noisy, tmp_path / "out.csv", "--rejected-out", tmp_path / "rej.bin")
    assert code == 0
    d = json.loads(out)
    assert d["counts"]["passed"] + d["counts"]["rejected"] == d["counts"]["input"]
    assert d["config"]["refresh_period_us"] == 1000
    assert len(read_stream(tmp_path / "out.csv", geometry=G)) == d["counts"]["passed"]
    assert len(read_stream(tmp_path / "rej.bin")) == d["counts"]["rejected"]


def test_filter_nnb(tmp_path, capsys, noisy):
    code, out, _ = _run(capsys, "filter", "--algo", "nnb", "--window-us", "2500", *GEO, noisy, tmp_path / "o.csv")
    assert code == 0 and json.loads(out)["config"]["algorithm"] == "nnb"


def test_unknown_algo(tmp_path, capsys, noisy):
    with pytest.raises(SystemExit) as info:
        main(["filter", "--algo", "foo", str(noisy), str(tmp_path / "o.csv")])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["roc", "--algos", "dif,foo", str(noisy), str(tmp_path / "r.json")])
    assert info.value.code == 1


def test_inject_byte_identical(tmp_path, capsys, noisy):
    clean = tmp_path / "clean.csv"
    again = tmp_path / "again.csv"
    _run(capsys, "inject", "--rate", "1.0", "--seed", "7", *GEO, clean, again)
    assert noisy.read_bytes() == again.read_bytes()


def test_seed_from_environment(tmp_path, capsys, monkeypatch, noisy):
    monkeypatch.setenv("EVFILT_SEED", "7")
    from evfilt import cli
    parser = cli.build_parser()
    assert parser.parse_args(["inject", "a", "b"]).seed == 7


def test_estimate_json(tmp_path, capsys, noisy):
    code, out, _ = _run(capsys, "estimate", "--bin-ms", "200", "--trim", "1", *GEO, noisy,
                        "--out", tmp_path / "e.json")
    assert code == 0
    d = json.loads(out)
    assert set(d) == {"mean_events_per_bin", "noise_rate_hz_per_pix", "min_noise_fraction", "bin_width_us", "trim"}
    assert json.loads((tmp_path / "e.json").read_text()) == d


def test_estimate_insufficient_bins(capsys, noisy):
    code, _, err = _run(capsys, "estimate", *GEO, noisy)
    assert code == 1 and "bins" in err


def test_evaluate(tmp_path, capsys, noisy):
    code, out, _ = _run(capsys, "evaluate", "--algo", "bif", "--band", "2", *GEO, noisy)
    d = json.loads(out)
    assert code == 0 and d["retention"]["pct_noise_remaining"] < 5
    assert d["boundary"]["band"] == 2
    _run(capsys, "filter", *GEO, noisy, tmp_path / "p.csv")
    code, out, _ = _run(capsys, "evaluate", "--passed", tmp_path / "p.csv", *GEO, noisy)
    assert code == 0 and "retention" in json.loads(out)


def test_roc_six_aucs(tmp_path, capsys, noisy):
    code, out, _ = _run(capsys, "roc", "--algos", "iir,tm,bi,bif,dif,nnb", *GEO, noisy, tmp_path / "r.json",
                        "--csv", tmp_path / "r.csv")
    assert code == 0
    assert len(json.loads(out)["auc"]) == 6
    rep = json.loads((tmp_path / "r.json").read_text())
    assert len(rep["algorithms"]) == 6
    assert rep["settings"]["base_config"]["scale"] == 16


def test_roc_low_mem_matches(tmp_path, capsys, noisy):
    args = ["roc", "--algos", "iir,nnb", "--n-thresholds", "6", *GEO, noisy]
    _run(capsys, *args, tmp_path / "a.json")
    _run(capsys, *args, "--low-mem", tmp_path / "b.json")
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a["algorithms"] == b["algorithms"]


def test_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "filter", tmp_path / "nope.csv", tmp_path / "o.csv")
    assert code == 1 and err.startswith("evfilt:")


def test_bad_record_reports_index(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p,label\n1,1,1,0,N\n0,1,1,0,N\n")
    code, _, err = _run(capsys, "filter", *GEO, p, tmp_path / "o.csv")
    assert code == 1 and "1" in err
