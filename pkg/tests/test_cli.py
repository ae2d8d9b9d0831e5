import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from spdsparse.cli import main
from spdsparse.data import load_dictionary


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    rc = main(["synth", "--classes", "3", "--per-class", "16", "--dim", "4", "--seed", "3",
               "--train-per-class", "8", "--out", str(d / "train.json"),
               "--test-out", str(d / "test.json")])
    assert rc == 0
    return d


def test_classify_report(synth_files, tmp_path):
    out = tmp_path / "r.json"
    rc = main(["classify", "--dict", str(synth_files / "train.json"),
               "--query", str(synth_files / "test.json"), "--kernel", "s", "--beta", "1",
               "--out", str(out)])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["schema"] == "report/1"
    conf = np.array(rep["confusion"])
    assert rep["classes"] == ["0", "1", "2"]
    np.testing.assert_array_equal(conf.sum(axis=1), [8, 8, 8])
    assert rep["accuracy"] == pytest.approx(np.trace(conf) / conf.sum())
    assert rep["accuracy"] >= 0.9
    q = rep["per_query"][0]
    assert set(q["residuals"]) == {"0", "1", "2"}
    assert q["predicted"] == min(q["residuals"], key=q["residuals"].get)
    assert set(rep["timings_ms"]) == {"load", "gram", "coding"}
    assert rep["config"]["kernel"] == "stein"


def test_code_self_coding(synth_files, tmp_path):
    out = tmp_path / "c.json"
    train = str(synth_files / "train.json")
    rc = main(["code", "--dict", train, "--input", train, "--kernel", "j", "--lambda", "0.001",
               "--out", str(out)])
    assert rc == 0
    codes = json.loads(out.read_text())
    assert len(codes) == 24
    for i, c in enumerate(codes):
        assert int(np.argmax(np.abs(c["coefficients"]))) == i
        assert {"objective", "iterations", "truncated"} <= set(c)


def test_learn_outputs_and_determinism(synth_files, tmp_path):
    args = ["learn", "--train", str(synth_files / "train.json"), "--atoms", "5", "--iters", "3",
            "--kernel", "s", "--beta", "1.5", "--lambda", "0.01", "--seed", "2"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.json"), "--threads", "3"]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    trace = json.loads((tmp_path / "a.trace.json").read_text())
    assert trace["energies"][-1] < trace["energies"][0] <= trace["initial_energy"] + 1e-12
    assert len(load_dictionary(tmp_path / "a.json")) == 5
    assert main(args + ["--out", str(tmp_path / "k.json"), "--init", "kmeans"]) == 0


def test_covdesc(tmp_path):
    Image.fromarray(np.full((256, 256), 3, np.uint8)).save(tmp_path / "c.pgm")
    assert main(["covdesc", "--input", str(tmp_path / "c.pgm"), "--out", str(tmp_path / "t.json")]) == 0
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["dim"] == 5 and len(doc["items"]) == 64
    np.savetxt(tmp_path / "f.csv", np.random.default_rng(0).normal(size=(20, 6)), delimiter=",")
    assert main(["covdesc", "--mode", "skeleton", "--input", str(tmp_path / "f.csv"),
                 "--out", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["dim"] == 6


def test_bench_csv(capsys):
    assert main(["bench", "--dims", "3", "--atoms", "5,10,20", "--kernel", "s", "--reps", "2"]) == 0
    captured = capsys.readouterr()
    rows = list(csv.reader(io.StringIO(captured.out)))
    assert rows[0][:6] == ["op", "n", "N", "kernel", "mean_ms", "std_ms"]
    assert len(rows) == 1 + 1 + 3
    assert "R^2" in captured.err


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_exit_codes(synth_files, tmp_path, capsys):
    train = str(synth_files / "train.json")
    empty = _write(tmp_path / "empty.json", "")
    nonpd = _write(tmp_path / "npd.json", '{"version":1,"dim":2,"items":[{"data":[1,2,2,1]}]}')
    no_items = _write(tmp_path / "none.json", '{"version":1,"dim":0,"items":[]}')
    unlabeled = tmp_path / "u.json"
    main(["learn", "--train", train, "--atoms", "2", "--iters", "1", "--out", str(unlabeled)])
    other_dim = tmp_path / "o.json"
    main(["synth", "--dim", "3", "--per-class", "2", "--out", str(other_dim)])
    out = str(tmp_path / "x.json")
    cases = [
        (["code", "--dict", train, "--input", train, "--kernel", "s", "--beta", "1.2"], r"\{0.5, 1, 1.5\} or beta > 1.5"),
        (["code", "--dict", train, "--input", empty], "invalid JSON"),
        (["code", "--dict", train, "--input", no_items], "no matrices"),
        (["code", "--dict", nonpd, "--input", train], "not positive definite"),
        (["learn", "--train", train, "--atoms", "25"], "exceeds"),
        (["classify", "--dict", str(unlabeled), "--query", train], "labeled"),
        (["classify", "--dict", train, "--query", str(other_dim)], "does not match"),
        (["covdesc", "--mode", "skeleton", "--input", _write(tmp_path / "one.csv", "1,2,3\n")], "two frames"),
        (["covdesc", "--input", _write(tmp_path / "bad.pgm", "P5 junk")], "cannot read"),
        (["code", "--dict", train, "--input", str(tmp_path / "missing.json")], "No such file"),
    ]
    for argv, msg in cases:
        capsys.readouterr()
        assert main(argv + ["--out", out]) == 2, argv
        assert pytest.importorskip("re").search(msg, capsys.readouterr().err), argv
    assert main(["bench", "--reps", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["code", "--dict", train])
    assert exc.value.code == 2


def test_strict_truncation_exit_code(synth_files, tmp_path, capsys):
    train, test = str(synth_files / "train.json"), str(synth_files / "test.json")
    argv = ["code", "--dict", train, "--input", test, "--lambda", "0.001", "--max-steps", "1",
            "--out", str(tmp_path / "c.json")]
    assert main(argv) == 0
    assert "step budget" in capsys.readouterr().err
    assert main(argv + ["--strict"]) == 3
    assert main(argv[:-2] + ["--max-steps", "100000", "--strict", "--out", str(tmp_path / "c.json")]) == 0
    learn = ["learn", "--train", train, "--atoms", "6", "--iters", "1", "--lambda", "0.001",
             "--max-steps", "1", "--strict", "--out", str(tmp_path / "d.json")]
    assert main(learn) == 3


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "spdsparse", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
