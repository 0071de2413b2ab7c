import csv
import json

import numpy as np
import pytest

from dica.cli import main, median_target_bandwidth, read_uci_telemonitoring
from dica.domains import DomainDataset, coefficient_matrix, distributional_variance, read_dataset_csv, write_dataset_csv
from dica.downstream import PipelineConfig, metrics, run_pipeline
from dica.errors import ParseError
from dica.kernels import KernelSpec, pooled_gram
from dica.synthdata import SynthToyConfig, make_toy
from dica.transform import FitConfig, fit

SMALL_CLASSIFY = ["--reps", "2", "--n-domains", "4", "--n-test-domains", "3", "--per-domain-n", "30"]


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _toy_small(out, seed=0):
    return main(["toy", "--seed", str(seed), "--out-dir", str(out), "--n-domains", "3", "--n-test-domains", "3"])


def test_toy_outputs_and_manifest(tmp_path):
    assert _toy_small(tmp_path) == 0
    for name in ("toy_train.csv", "toy_test.csv", "toy_kpca.csv", "toy_udica.csv", "toy_coir.csv", "toy_dica.csv"):
        assert (tmp_path / name).exists()
    report = json.loads((tmp_path / "toy_report.json").read_text())
    assert set(report["methods"]) == {"kpca", "udica", "coir", "dica"}
    for r in report["methods"].values():
        assert len(r["gamma"]) == 2 and r["heldout_dispersion"] >= 0
        assert set(r["bound"]) == {"dist_term", "complexity_term"}
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [0]
    assert "numpy" in manifest["versions"]


def test_toy_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _toy_small(a, seed=4) == 0
    assert _toy_small(b, seed=4) == 0
    for f in sorted(a.glob("*.csv")):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_toy_features_match_library(tmp_path):
    assert _toy_small(tmp_path, seed=2) == 0
    data = make_toy(SynthToyConfig(n_domains=6, seed=2))
    train, test = data.subset(range(3)), data.subset(range(3, 6))
    rbf = KernelSpec("gaussian-rbf", 1.0)
    t = fit(train, rbf, rbf, FitConfig("dica", m=2, epsilon=1e-4, lam=0.1))
    rows = _read_rows(tmp_path / "toy_dica.csv")
    got = np.array([[float(r["e1"]), float(r["e2"])] for r in rows])
    want = np.vstack([t.train_features()] + [t.features(d.inputs) for d in test.domains])
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_toy_needs_three_heldout(tmp_path, capsys):
    assert main(["toy", "--out-dir", str(tmp_path), "--n-test-domains", "2"]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config_error"


def test_classify_report_matches_predictions(tmp_path):
    assert main(["classify", "--out-dir", str(tmp_path), "--mode", "kpca,dica"] + SMALL_CLASSIFY) == 0
    report = json.loads((tmp_path / "classify_report.json").read_text())
    rows = _read_rows(tmp_path / "predictions.csv")
    for kernel in ("pooling", "distributional"):
        for method in ("kpca", "dica"):
            accs = []
            for rep in ("0", "1"):
                sel = [r for r in rows if r["rep"] == rep and r["method"] == method and r["kernel"] == kernel]
                accs.append(np.mean([float(r["y_true"]) == float(r["y_pred"]) for r in sel]))
            cell = report["table"][kernel][method]
            assert cell["mean"] == pytest.approx(np.mean(accs), abs=1e-12)
            assert cell["n"] == 2
    assert report["seeds"] == [0, 1]


def test_classify_without_shift_kernels_agree(tmp_path):
    args = ["classify", "--out-dir", str(tmp_path), "--mode", "dica", "--shift-scale", "0", "--reps", "5",
            "--n-domains", "4", "--n-test-domains", "3", "--per-domain-n", "40"]
    assert main(args) == 0
    table = json.loads((tmp_path / "classify_report.json").read_text())["table"]
    pool, dist = table["pooling"]["dica"], table["distributional"]["dica"]
    assert abs(pool["mean"] - dist["mean"]) <= 2 * max(pool["std"], dist["std"], 1e-3)


def test_classify_grid(tmp_path):
    args = ["classify", "--out-dir", str(tmp_path), "--mode", "kpca", "--grid", "m=1,2", "--folds", "2"] + SMALL_CLASSIFY
    assert main(args) == 0
    report = json.loads((tmp_path / "classify_report.json").read_text())
    assert all(h["config"]["m"] in (1, 2) for h in report["hyperparameters"])


def test_classify_bad_grid_axis(tmp_path, capsys):
    assert main(["classify", "--out-dir", str(tmp_path), "--grid", "depth=1,2"] + SMALL_CLASSIFY) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "config_error"


def test_regress_synthetic_matches_library(tmp_path):
    args = ["regress", "--out-dir", str(tmp_path), "--reps", "1", "--mode", "dica", "--n-domains", "4",
            "--n-test-domains", "2", "--poisson-mean", "20", "--seed", "3"]
    assert main(args) == 0
    report = json.loads((tmp_path / "regress_report.json").read_text())
    data = make_toy(SynthToyConfig(n_domains=6, seed=3, poisson_mean=20))
    train, test = data.subset(range(4)), data.subset(range(4, 6))
    sigma3 = median_target_bandwidth([train])
    assert report["sigma3"] == [sigma3]
    _, yte, _ = test.flatten()
    for kernel in ("pooling", "distributional"):
        cfg = PipelineConfig(method="dica", kernel=kernel, lam=0.1, sigma_y=sigma3)
        res = run_pipeline(train, test, cfg, "regression")
        want = metrics(yte, res.predictions, "regression")
        assert report["table"][kernel]["dica"]["y"]["mean"] == pytest.approx(want, rel=1e-12)


def _write_uci(path, n_subjects=5, rows_per=12, seed=0):
    rng = np.random.default_rng(seed)
    header = ["subject#", "age", "sex", "test_time", "motor_UPDRS", "total_UPDRS"] + [f"f{j}" for j in range(4)]
    lines = [",".join(header)]
    for s in range(1, n_subjects + 1):
        for r in range(rows_per):
            f = rng.standard_normal(4) + 0.3 * s
            motor = 20 + 3 * f[0] + s
            lines.append(",".join(str(v) for v in [s, 60 + s, s % 2, r, motor, motor * 1.3, *f]))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_uci_parser(tmp_path):
    p = _write_uci(tmp_path / "uci.csv")
    xs, ys, ids, names = read_uci_telemonitoring(p)
    assert ids == [1, 2, 3, 4, 5]
    assert names == ["f0", "f1", "f2", "f3"]
    assert xs[0].shape == (12, 4) and ys[0].shape == (12, 2)
    np.testing.assert_allclose(ys[0][:, 1], 1.3 * ys[0][:, 0])


def test_uci_parser_errors(tmp_path):
    p = _write_uci(tmp_path / "uci.csv")
    lines = p.read_text().splitlines()
    lines[3] = lines[3].replace(lines[3].split(",")[7], "abc", 1)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as exc:
        read_uci_telemonitoring(bad)
    assert exc.value.row == 4
    short = tmp_path / "short.csv"
    short.write_text("\n".join(lines[:2] + ["1,2,3"]) + "\n")
    with pytest.raises(ParseError) as exc:
        read_uci_telemonitoring(short)
    assert exc.value.row == 3
    nocol = tmp_path / "nocol.csv"
    nocol.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError) as exc:
        read_uci_telemonitoring(nocol)
    assert exc.value.row == 1


def test_regress_uci_layout(tmp_path):
    p = _write_uci(tmp_path / "uci.csv", n_subjects=6)
    args = ["regress", "--dataset", str(p), "--out-dir", str(tmp_path / "run"), "--reps", "1",
            "--n-train-domains", "4", "--per-domain-n", "8"]
    assert main(args) == 0
    report = json.loads((tmp_path / "run" / "regress_report.json").read_text())
    assert report["targets"] == ["motor_UPDRS", "total_UPDRS"]
    for kernel in ("pooling", "distributional"):
        for method in ("input", "kpca", "udica", "coir", "dica"):
            for t in report["targets"]:
                assert np.isfinite(report["table"][kernel][method][t]["mean"])
    assert set(report["lls"]) == set(report["targets"])


def test_regress_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("subject#,motor_UPDRS,total_UPDRS,f0\n1,2,3,x\n")
    assert main(["regress", "--dataset", str(bad), "--out-dir", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "parse_error" and err["row"] == 2


def test_missing_file_exit(tmp_path, capsys):
    assert main(["variance", "--dataset", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "io_error"


def test_variance_duplicated_domains_zero(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 2))
    p = write_dataset_csv(DomainDataset.from_arrays([x, x, x]), tmp_path / "dup.csv")
    assert main(["variance", "--dataset", str(p), "--out-dir", str(tmp_path), "--sigma-x", "1"]) == 0
    assert abs(float(capsys.readouterr().out.strip())) <= 1e-10
    single = write_dataset_csv(DomainDataset.from_arrays([x]), tmp_path / "one.csv")
    assert main(["variance", "--dataset", str(single), "--out-dir", str(tmp_path), "--sigma-x", "1"]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.0


def test_variance_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(1)
    data = DomainDataset.from_arrays([rng.standard_normal((8, 2)) + i for i in range(3)])
    p = write_dataset_csv(data, tmp_path / "d.csv")
    assert main(["variance", "--dataset", str(p), "--out-dir", str(tmp_path), "--sigma-x", "0.7"]) == 0
    got = float(capsys.readouterr().out.strip())
    loaded = read_dataset_csv(p)
    want = distributional_variance(pooled_gram(KernelSpec("gaussian-rbf", 0.7), loaded), coefficient_matrix(loaded.sizes))
    assert got == want
    saved = json.loads((tmp_path / "variance.json").read_text())
    assert saved["variance"] == want


def test_gen_roundtrip(tmp_path):
    assert main(["gen", "toy", "--seed", "5", "--n-domains", "3", "--out-dir", str(tmp_path)]) == 0
    loaded = read_dataset_csv(tmp_path / "toy.csv")
    data = make_toy(SynthToyConfig(n_domains=3, seed=5))
    assert loaded.sizes == data.sizes
    np.testing.assert_array_equal(loaded.flatten()[0], data.flatten()[0])
