import io
import json

import pytest

from kikuchi_hsbm.cli import main
from kikuchi_hsbm.fileio import checksum, load
from kikuchi_hsbm.model import ModelParams, sample, whitened_indicator


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


@pytest.fixture
def graph(tmp_path):
    path = str(tmp_path / "g.hsbm")
    code, out = run(["sample", "--n", "20", "--p", "4", "--k", "2", "--theta0", "0.3", "--eps", "0.1", "--planted", "--seed", "7", "--out", path])
    assert code == 0
    return path


def test_sample_writes_conformant_file(graph):
    text = open(graph, newline="").read()
    assert text.startswith("hsbm n=20 p=4 k=2 theta0=0.29999999999999999 eps=0.10000000000000001 planted=1 seed=7\nlabels ")
    assert json.load(open(graph + ".run.json"))["verb"] == "sample"


def test_roundtrip_checksum(graph):
    h = sample(ModelParams(20, 2, 4, 0.3, 0.1), whitened_indicator(2, 4), True, 7)
    assert checksum(load(graph)) == checksum(h)


def test_detect_emits_report(graph):
    code, out = run(["detect", "--in", graph, "--ell", "4", "--seed", "1", "--threads", "1"])
    assert code == 0
    line, verdict = out.strip().split("\n")
    rep = json.loads(line)
    assert rep["verdict"] == verdict and rep["ell"] == 4


def test_detect_dense_mode(tmp_path):
    path = str(tmp_path / "s.hsbm")
    run(["sample", "--n", "8", "--eps", "0.1", "--seed", "1", "--out", path])
    a = json.loads(run(["detect", "--in", path, "--ell", "4", "--mode", "dense"])[1].split("\n")[0])
    b = json.loads(run(["detect", "--in", path, "--ell", "4", "--tol", "1e-10"])[1].split("\n")[0])
    assert a["lambda_max"] == pytest.approx(b["lambda_max"], rel=1e-8)


def test_usage_and_runtime_errors(tmp_path, capsys):
    assert run(["bogus"])[0] == 1
    assert run([])[0] == 1
    assert run(["detect", "--ell", "4"])[0] == 1
    assert run(["detect", "--in", str(tmp_path / "missing.hsbm"), "--ell", "4"])[0] == 2
    assert run(["--help"])[0] == 0
    assert "usage" in capsys.readouterr().out


def test_threads_env(monkeypatch, graph):
    monkeypatch.setenv("KIKUCHI_THREADS", "x")
    assert run(["moments"])[0] == 1
    monkeypatch.setenv("KIKUCHI_THREADS", "1")
    assert run(["moments"])[0] == 0


def test_moments_text_and_json():
    code, out = run(["moments", "--k", "2", "--p", "4", "--format", "json", "--eps", "0.1", "--lam", "2"])
    d = json.loads(out)
    assert d["mu"] == pytest.approx(1 / 64) and "W(2,0)_mean" in d
    code, out = run(["moments"])
    assert "mu=0.015625" in out.split("\n")


def test_lcdf_overlap_estimate_csv():
    code, out = run(["lcdf", "--n", "100", "--D", "1,4"])
    assert code == 0 and out.split("\n")[0] == "D,beta_lcdf,n,p,k" and len(out.strip().split("\n")) == 3
    code, out = run(["overlap", "--n", "12", "--beta", "0.5", "--trials", "2"])
    assert out.split("\n")[0] == "n,p,k,ell,beta,seed,stat_name,value,stderr"
    code, out = run(["estimate", "--n", "1024", "--ell", "8,sqrt"])
    header, row = out.split("\n")[:2]
    assert header.startswith("n,p,ell") and row.split(",")[header.split(",").index("qubits")] == "80"
    assert run(["estimate", "--ell", "x"])[0] == 1


def test_qsim_verb(tmp_path):
    path = str(tmp_path / "q.hsbm")
    run(["sample", "--n", "12", "--theta0", "0.45", "--eps", "0.44", "--planted", "--seed", "3", "--out", path])
    code, out = run(["qsim", "--in", path, "--shots", "20", "--amp", "on", "--bits", "6"])
    rep = json.loads(out.split("\n")[0])
    assert code == 0 and rep["amplified"] and rep["bits"] == 6


def test_sweep_and_calibrate(tmp_path):
    spec = tmp_path / "s.txt"
    spec.write_text("n=10\nell=4\nbeta=0.5\ntrials=2\n")
    code, out = run(["sweep", "--spec", str(spec)])
    assert code == 0 and out.split("\n")[1].startswith("n,k,p,ell,beta")
    out_csv = tmp_path / "o.csv"
    assert run(["sweep", "--spec", str(spec), "--out", str(out_csv)])[0] == 0
    assert (tmp_path / "o.csv.run.json").exists()
    code, out = run(["calibrate", "--n", "10", "--trials", "2"])
    assert code == 0 and json.loads(out)["k"] == 2
