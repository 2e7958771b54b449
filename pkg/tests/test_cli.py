import json

import pytest

from gaboost import cli, evaluation, ga


@pytest.fixture
def data_dir(text_csv, tmp_path):
    out = tmp_path / "data"
    assert cli.main(["vectorize", "--csv", str(text_csv), "--out", str(out)]) == 0
    return out


def _optimize(data_dir, out, *extra):
    args = ["optimize", "--data", str(data_dir), "--F", "20", "--P", "6", "--C", "3", "--G", "2",
            "--out", str(out), *extra]
    return cli.main(args)


def test_vectorize_report_line_and_idempotence(text_csv, tmp_path, capsys):
    assert cli.main(["vectorize", "--csv", str(text_csv), "--out", str(tmp_path / "a")]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("rows=300 features=") and line.endswith("%")
    assert cli.main(["vectorize", "--csv", str(text_csv), "--out", str(tmp_path / "b")]) == 0
    for name in ("matrix.txt", "vocab.tsv", "labels.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_vectorize_empty_csv(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("text,label\n")
    assert cli.main(["vectorize", "--csv", str(p), "--out", str(tmp_path / "o")]) != 0
    assert "error" in capsys.readouterr().err


def test_vectorize_bad_label_names_row(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("text,label\nhello,Ham\nhi,Junk\n")
    assert cli.main(["vectorize", "--csv", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "row 3" in capsys.readouterr().err


def test_optimize_outputs(data_dir, tmp_path):
    out = tmp_path / "opt"
    assert _optimize(data_dir, out) == 0
    eid = "F20-P6-C3-G2"
    curve = ga.read_curve(out / f"{eid}_curve.csv")
    assert [s.generation for s in curve] == [0, 1, 2]
    ch, doc = ga.read_best(out / f"{eid}_best.json")
    assert doc["experiment_id"] == eid and len(doc["terms"]) == len(ch.feature_genes)
    assert ga.read_experiment_table(out / f"{eid}_experiment.csv")[0][0] == eid
    assert (out / "run.log").exists()


def test_optimize_id_from_ratio(data_dir, tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["optimize", "--data", str(data_dir), "--F", "20", "--P", "10",
                     "--crossover-ratio", "0.6", "--G", "1", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("F20-P10-C6-G1, ")


def test_optimize_bad_ratio_is_usage_error(data_dir):
    with pytest.raises(SystemExit) as exc:
        cli.main(["optimize", "--data", str(data_dir), "--crossover-ratio", "1.5"])
    assert exc.value.code == 2


def test_optimize_sweep(data_dir, tmp_path):
    out = tmp_path / "sw"
    assert _optimize(data_dir, out, "--sweep", "crossover=0.5:1.0:0.5") == 0
    rows = ga.read_experiment_table(out / "sweep_experiments.csv")
    assert [r[0] for r in rows] == ["F20-P6-C3-G2", "F20-P6-C6-G2"]
    lines = (out / "sweep_curves.csv").read_text().splitlines()
    assert lines[0] == "experiment_id,generation,best_fitness,mean_fitness" and len(lines) == 7


def test_parse_sweep():
    grid = cli.parse_sweep(["crossover=0.1:1.0:0.1"])
    assert [g["crossover_ratio"] for g in grid] == [round(0.1 * i, 10) for i in range(1, 11)]
    grid = cli.parse_sweep(["F=1,5", "P=10,20"])
    assert grid[1] == {"feature_percent": 1.0, "population_size": 20}
    with pytest.raises(cli.CliError):
        cli.parse_sweep(["speed=1,2"])


def test_interrupt_flushes_partial_curve(data_dir, tmp_path, monkeypatch):
    real_run = ga.run

    def interrupted(X, y, config, on_generation=None):
        def cb(stats):
            on_generation(stats)
            raise KeyboardInterrupt
        return real_run(X, y, config, cb)

    monkeypatch.setattr(ga, "run", interrupted)
    out = tmp_path / "int"
    assert _optimize(data_dir, out) == 130
    lines = (out / "F20-P6-C3-G2_curve.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,")


def test_config_file_precedence(data_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"P": 8, "C": 4, "G": 1, "F": 20}))
    out = tmp_path / "c"
    assert cli.main(["optimize", "--config", str(cfg), "--data", str(data_dir),
                     "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("F20-P8-C4-G1, ")
    assert cli.main(["optimize", "--config", str(cfg), "--data", str(data_dir), "--P", "6",
                     "--C", "2", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("F20-P6-C2-G1, ")


def test_output_dir_env_var(data_dir, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["optimize", "--data", str(data_dir), "--F", "20", "--P", "4", "--C", "2",
                     "--G", "1"]) == 0
    assert (tmp_path / "envout" / "F20-P4-C2-G1_best.json").exists()


def test_validate_and_compare_and_report(data_dir, tmp_path, capsys):
    out = tmp_path / "o"
    assert _optimize(data_dir, out) == 0
    best = out / "F20-P6-C3-G2_best.json"
    for name, seed in (("a", "1"), ("b", "2")):
        assert cli.main(["validate", "--data", str(data_dir), "--chromosome", str(best),
                         "--repeats", "2", "--folds", "3", "--seed", seed, "--name", name,
                         "--out", str(out)]) == 0
    rows = evaluation.read_fold_csv(out / "a_folds.csv")
    assert len(rows) == 6
    summary = (out / "a_summary.csv").read_text().splitlines()
    assert summary[0] == "metric,min,avg,max,sd" and len(summary) == 10

    (out / "c_folds.csv").write_bytes((out / "a_folds.csv").read_bytes())
    cmp_dir = tmp_path / "cmp"
    runs = [str(out / f"{n}_folds.csv") for n in "abc"]
    assert cli.main(["compare", "--runs", *runs, "--out", str(cmp_dir)]) == 0
    from gaboost import stats
    cells = stats.read_wilcoxon_matrix(cmp_dir / "wilcoxon.csv")
    assert cells[("c", "a")] == "NA"
    assert (cmp_dir / "kruskal.csv").read_text().startswith("group_list,p_value\n")

    rep = tmp_path / "rep"
    assert cli.main(["report", "--runs", *runs[:2], "--chromosomes", str(best),
                     "--out", str(rep)]) == 0
    assert (rep / "describe.csv").read_text().splitlines()[0] == "run,mean,sd,min,q25,median,q75,max"
    assert len((rep / "ham_positive.csv").read_text().splitlines()) == 1 + 2 * 4
    assert (rep / "feature_frequency.csv").read_text().startswith("FeatureText,FNo,Freq,F20-P6-C3-G2")


def test_compare_mismatched_folds(data_dir, tmp_path, capsys):
    a, b = tmp_path / "a_folds.csv", tmp_path / "b_folds.csv"
    header = "repeat,fold,accuracy,gmean,auc,tpr,tnr,ppv,fpr,f1,npv\n"
    row = "0,{},0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5\n"
    a.write_text(header + row.format(0) + row.format(1))
    b.write_text(header + row.format(0))
    assert cli.main(["compare", "--runs", str(a), str(b), "--out", str(tmp_path / "o")]) == 1
    assert "do not pair up" in capsys.readouterr().err


def test_compare_chi2_and_pca_arms(data_dir, tmp_path):
    out = tmp_path / "arms"
    assert cli.main(["compare", "--data", str(data_dir), "--chi2-k", "5", "--pca-k", "1:2",
                     "--repeats", "1", "--folds", "3", "--out", str(out)]) == 0
    assert len(evaluation.read_fold_csv(out / "chi2_folds.csv")) == 3
    assert len((out / "chi2_features.tsv").read_text().splitlines()) == 5
    assert (out / "pca.csv").read_text().splitlines()[0] == "components,accuracy,sd"


def test_validate_out_of_range_feature(data_dir, tmp_path, capsys):
    doc = {"booster": dict(zip(ga.BOOSTER_GENES, (0.3, 10, 3, 1.0, 0.1, 1.0, 1.0))),
           "features": [0, 100000]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert cli.main(["validate", "--data", str(data_dir), "--chromosome", str(p),
                     "--repeats", "1", "--folds", "2", "--out", str(tmp_path)]) == 1
    assert "out of range" in capsys.readouterr().err


def test_validate_smoke_on_1k_rows_under_a_minute(tmp_path):
    import time

    from conftest import write_text_corpus

    csv_path = write_text_corpus(tmp_path / "big.csv", n_rows=1000, seed=4)
    data = tmp_path / "d"
    assert cli.main(["vectorize", "--csv", str(csv_path), "--out", str(data)]) == 0
    assert _optimize(data, tmp_path / "o") == 0
    t0 = time.perf_counter()
    assert cli.main(["validate", "--data", str(data), "--chromosome",
                     str(tmp_path / "o" / "F20-P6-C3-G2_best.json"), "--repeats", "1",
                     "--folds", "2", "--out", str(tmp_path / "o")]) == 0
    assert time.perf_counter() - t0 < 60
