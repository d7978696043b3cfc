import json

import numpy as np
import pytest

from treegrad import rotation
from treegrad.cli import main
from treegrad.data import SyntheticSpec, generate_synthetic, random_direction


def write_csv(path, X, y, names=None):
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header=",".join(names + ["y"]), comments="",
               fmt="%.17g")
    return path


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    a = np.array([0.48, 0.6, 0.64])
    d = generate_synthetic(SyntheticSpec("log-ridge", 3, a, seed=2), 3000)
    data = write_csv(root / "d.csv", 4 * d.features - 1, d.response)
    const = write_csv(root / "c.csv", d.features[:200], np.full(200, 2.5))
    ridge = generate_synthetic(SyntheticSpec("ridge-cosine", 3, random_direction(3, 5), seed=3), 10_000)
    ridge_csv = write_csv(root / "r.csv", ridge.features, ridge.response)
    assert main(["fit", "--input", str(data), "--target", "y", "--max-depth", "7", "--output",
                 str(root / "m.json")]) == 0
    assert main(["fit", "--input", str(data), "--target", "y", "--trees", "4", "--max-depth", "6",
                 "--output", str(root / "f.json")]) == 0
    assert main(["fit", "--input", str(const), "--target", "y", "--output", str(root / "c.json")]) == 0
    assert main(["fit", "--input", str(ridge_csv), "--target", "y", "--mode", "cyclic", "--max-depth", "12",
                 "--output", str(root / "ridge.json")]) == 0
    return root


def run(args, capsys):
    code = main([str(a) for a in args])
    return code, capsys.readouterr()


def test_fit_prints_summary(ws, capsys):
    code, out = run(["fit", "--input", ws / "d.csv", "--target", "y", "--max-depth", "3", "--output",
                     ws / "tmp.json"], capsys)
    assert code == 0
    assert "depth=3" in out.out and "leaves=8" in out.out and "train_rmse=" in out.out


def test_fit_usage_and_data_errors(ws, capsys):
    with pytest.raises(SystemExit) as e:
        main(["fit", "--input", str(ws / "d.csv"), "--target", "y", "--max-depth", "0", "--output", "x"])
    assert e.value.code == 2
    capsys.readouterr()
    code, out = run(["fit", "--input", ws / "d.csv", "--target", "nope", "--output", ws / "x.json"], capsys)
    assert code == 3 and "nope" in out.err and out.err.count("\n") == 1
    code, _ = run(["fit", "--input", ws / "missing.csv", "--target", "y", "--output", ws / "x.json"], capsys)
    assert code == 3


def test_fit_is_byte_identical(ws, tmp_path, capsys):
    for name in ("a.json", "b.json"):
        run(["fit", "--input", ws / "d.csv", "--target", "y", "--trees", "3", "--jobs", "2", "--seed", "1",
             "--output", tmp_path / name], capsys)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_grad(ws, tmp_path, capsys):
    code, out = run(["grad", "--model", ws / "m.json", "--points", ws / "d.csv"], capsys)
    assert code == 0
    lines = out.out.strip().split("\n")
    assert lines[0] == "d_x1,d_x2,d_x3" and len(lines) == 3001
    code, out = run(["grad", "--model", ws / "c.json", "--points", ws / "c.csv"], capsys)
    assert all(float(v) == 0.0 for line in out.out.strip().split("\n")[1:] for v in line.split(","))
    bad = write_csv(tmp_path / "bad.csv", np.zeros((2, 2)), np.zeros(2))
    code, _ = run(["grad", "--model", ws / "m.json", "--points", bad], capsys)
    assert code == 3


def test_grad_single_point_matches_model(ws, tmp_path, capsys):
    from treegrad.cli import _load_model
    model = _load_model(ws / "f.json")
    x = np.array([[0.5, 1.5, 2.0]])
    pts = write_csv(tmp_path / "p.csv", x, [0.0])
    _, out = run(["grad", "--model", ws / "f.json", "--points", pts], capsys)
    got = np.array([float(v) for v in out.out.strip().split("\n")[1].split(",")])
    np.testing.assert_array_equal(got, model.est.grad_at(model.to_unit(x[0])))


def test_tbas(ws, tmp_path, capsys):
    code, out = run(["tbas", "--model", ws / "c.json", "--measure", "uniform"], capsys)
    assert code == 0 and json.loads(out.out)["eigenvalues"] == [0.0, 0.0, 0.0]
    code, out = run(["tbas", "--model", ws / "ridge.json", "--measure", "uniform"], capsys)
    w = json.loads(out.out)["eigenvalues"]
    assert w[0] / w[1] > 5
    rot = tmp_path / "rot.csv"
    code, out = run(["tbas", "--model", ws / "m.json", "--input", ws / "d.csv", "--rotate", rot], capsys)
    rows = rot.read_text().strip().split("\n")
    assert len(rows) == 3001
    assert len(rows[0].split(",")) == 3 + rotation.n_components(3)
    code, out = run(["tbas", "--model", ws / "m.json", "--rotate", rot], capsys)
    assert code == 2


def test_tbas_measures(ws, capsys):
    _, train = run(["tbas", "--model", ws / "m.json"], capsys)
    _, given = run(["tbas", "--model", ws / "m.json", "--measure", "empirical", "--input", ws / "d.csv"], capsys)
    assert json.loads(train.out)["matrix"] == json.loads(given.out)["matrix"]
    _, mc = run(["tbas", "--model", ws / "f.json", "--samples", "2000", "--seed", "3"], capsys)
    assert json.loads(mc.out)["model"]["estimator"] == "monte-carlo"


def test_tbig(ws, capsys):
    code, out = run(["tbig", "--model", ws / "m.json", "--x", "1,1,1", "--x-ref", "1,1,1"], capsys)
    assert code == 0 and json.loads(out.out)["ig"] == [0.0, 0.0, 0.0]
    _, out = run(["tbig", "--model", ws / "m.json", "--row", 5, "--input", ws / "d.csv"], capsys)
    res = json.loads(out.out)
    assert res["m"] == 500 and res["reference"] == "training-mean"
    _, ex = run(["tbig", "--model", ws / "m.json", "--row", 5, "--input", ws / "d.csv", "--exact"], capsys)
    _, mc = run(["tbig", "--model", ws / "m.json", "--row", 5, "--input", ws / "d.csv", "--samples", 1_000_000],
                capsys)
    exact, est = np.array(json.loads(ex.out)["ig"]), np.array(json.loads(mc.out)["ig"])
    big = np.abs(exact) > 1e-8
    assert (np.abs(est - exact)[big] <= 0.01 * np.abs(exact)[big]).all()


def test_tbig_errors(ws, capsys):
    assert run(["tbig", "--model", ws / "m.json", "--x", "1,2"], capsys)[0] == 3
    assert run(["tbig", "--model", ws / "f.json", "--x", "1,2,3", "--exact"], capsys)[0] == 2
    assert run(["tbig", "--model", ws / "m.json"], capsys)[0] == 2
    assert run(["tbig", "--model", ws / "m.json", "--row", 1], capsys)[0] == 2
    assert run(["tbig", "--model", ws / "m.json", "--row", 99999, "--input", ws / "d.csv"], capsys)[0] == 3
    assert run(["tbig", "--model", ws / "nope.json", "--x", "1,2,3"], capsys)[0] == 3


def test_rotate(ws, capsys):
    code, out = run(["rotate", "--input", ws / "d.csv", "--target", "y", "--folds", 3,
                     "--rotation", "tbas,identity"], capsys)
    assert code == 0
    lines = out.out.strip().split("\n")
    assert lines[0] == "rotation,fold,rmse" and len(lines) == 7
    with pytest.raises(SystemExit) as e:
        main(["rotate", "--input", str(ws / "d.csv"), "--target", "y", "--rotation", "spin"])
    assert e.value.code == 2


def test_experiment(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code, _ = run(["experiment", "subspace-lowdim", "--dims", "2", "--sizes", "100,200", "--replicates", 2,
                   "--output", out], capsys)
    assert code == 0
    assert out.read_text().startswith("experiment,replicate,P,N,depth,density,sigma,rho,rotation,fold,metric")
    code, _ = run(["experiment", "noise", "--replicates", 0, "--output", out], capsys)
    assert code == 2
    code, _ = run(["experiment", "rotation-cv", "--folds", 3, "--output", tmp_path], capsys)
    assert (tmp_path / "rotation-cv.csv").exists()


def test_experiment_trailing_slash_creates_directory(tmp_path, capsys):
    target = tmp_path / "new" / "dir"
    code, _ = run(["experiment", "subspace-lowdim", "--dims", "2", "--sizes", "100", "--replicates", 1,
                   "--output", f"{target}/"], capsys)
    assert code == 0
    assert (target / "subspace-lowdim.csv").is_file()
