import csv
import json
import os

import numpy as np
import pytest

from plrp.cli import main, p_grid, parse_method, parse_variants
from plrp.rasters import read_ppm


@pytest.fixture(scope="module")
def genome_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("genome")
    assert main(["gen-data", "--kind", "genome", "--n", "48", "--seed", "5",
                 "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def shapes_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("shapes")
    assert main(["gen-data", "--kind", "shapes", "--n", "40", "--seed", "5",
                 "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def genome_model(tmp_path_factory, genome_dir):
    d = tmp_path_factory.mktemp("model")
    path = d / "genome4.json"
    assert main(["train", "--data", str(genome_dir), "--preset", "genome-4",
                 "--out", str(path), "--epochs", "2", "--lr", "0.3", "--seed", "1"]) == 0
    return path


@pytest.fixture(scope="module")
def shapes_model(tmp_path_factory, shapes_dir):
    d = tmp_path_factory.mktemp("model")
    path = d / "toy.json"
    assert main(["train", "--data", str(shapes_dir), "--preset", "toy-image",
                 "--out", str(path), "--epochs", "2", "--lr", "0.1", "--seed", "1"]) == 0
    return path


def _read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_parse_method_tokens():
    assert parse_method("lrp").token == "lrp"
    assert parse_method("plrp-lambda").mode == "fixed"
    assert parse_method("plrp-m:gain").mode == "gain"
    with pytest.raises(ValueError):
        parse_method("anything-else")
    with pytest.raises(ValueError):
        parse_method("lrp:gain")
    assert len(parse_variants("lrp,plrp-lambda,plrp-m:gain")) == 3


def test_p_grid_default_has_twenty_values():
    grid = p_grid(0.0, 0.95, 0.05)
    assert len(grid) == 20
    assert grid[0] == 0.0 and grid[-1] == 0.95


def test_missing_dataset_is_usage_documented_data_error(tmp_path):
    rc = main(["train", "--data", str(tmp_path / "missing"), "--preset", "genome-4",
               "--out", str(tmp_path / "m.json")])
    assert rc == 2


def test_missing_required_flag_exits_one(capsys):
    rc = main(["train", "--preset", "genome-4"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_train_writes_model_log_and_accuracy_line(genome_model, capsys):
    assert os.path.exists(genome_model)
    log = str(genome_model).replace(".json", "_train_log.csv")
    rows = _read_rows(log)
    assert [r["epoch"] for r in rows] == ["0", "1"]


def test_train_is_reproducible(tmp_path, genome_dir, genome_model):
    other = tmp_path / "again.json"
    assert main(["train", "--data", str(genome_dir), "--preset", "genome-4",
                 "--out", str(other), "--epochs", "2", "--lr", "0.3", "--seed", "1"]) == 0
    assert other.read_bytes() == genome_model.read_bytes()


def test_explain_p0_plrp_files_identical_to_lrp(tmp_path, genome_dir, genome_model):
    out_a = tmp_path / "lrp"
    out_b = tmp_path / "plrp0"
    assert main(["explain", "--model", str(genome_model), "--data", str(genome_dir),
                 "--index", "3", "--variant", "lrp", "--out", str(out_a),
                 "--no-figures"]) == 0
    assert main(["explain", "--model", str(genome_model), "--data", str(genome_dir),
                 "--index", "3", "--variant", "plrp-lambda", "--p", "0.0",
                 "--out", str(out_b), "--no-figures"]) == 0
    assert (out_a / "trace.json").read_bytes() == (out_b / "trace.json").read_bytes()
    assert (out_a / "logo.tsv").read_bytes() == (out_b / "logo.tsv").read_bytes()


def test_explain_genome_logo_table_has_250_positions(tmp_path, genome_dir, genome_model):
    out = tmp_path / "exp"
    assert main(["explain", "--model", str(genome_model), "--data", str(genome_dir),
                 "--index", "0", "--variant", "plrp-lambda", "--p", "0.25",
                 "--out", str(out), "--no-figures"]) == 0
    with open(out / "logo.tsv") as f:
        lines = f.read().strip().splitlines()
    assert lines[0] == "position\tbase\trelevance"
    assert len(lines) == 1 + 250 * 4
    trace = json.loads((out / "trace.json").read_text())
    assert trace["pruneRecords"]


def test_explain_image_heatmap_matches_input_size(tmp_path, shapes_dir, shapes_model):
    out = tmp_path / "img"
    assert main(["explain", "--model", str(shapes_model), "--data", str(shapes_dir),
                 "--index", "1", "--variant", "lrp", "--out", str(out)]) == 0
    img, _ = read_ppm(out / "heatmap.ppm")
    assert img.shape == (16, 16, 3)
    assert (out / "heatmap.png").exists()


def test_explain_index_out_of_range_is_data_error(tmp_path, genome_dir, genome_model):
    rc = main(["explain", "--model", str(genome_model), "--data", str(genome_dir),
               "--index", "999", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_sweep_row_counts_reproducibility_and_skips(tmp_path, genome_dir, genome_model):
    out = tmp_path / "sweep"
    args = ["sweep", "--model", str(genome_model), "--data", str(genome_dir),
            "--out", str(out), "--variants", "lrp,plrp-lambda,plrp-m",
            "--p-start", "0.0", "--p-end", "0.4", "--p-step", "0.2",
            "--metrics", "gini,entropy,rma,faithAUC", "--seed", "3", "--no-figures"]
    assert main(args) == 0
    rows = _read_rows(out / "metrics.csv")
    data = [r for r in rows if r["sampleId"] != "median"]
    medians = [r for r in rows if r["sampleId"] == "median"]
    # 48 samples x (1 baseline row + 3 p-values x 2 pruned methods)
    assert len(data) == 48 * (1 + 3 * 2)
    assert len(medians) == 1 + 3 * 2
    skips = _read_rows(out / "skipped_metrics.csv")
    assert {s["metric"] for s in skips} == {"faithAUC"}
    # determinism: byte-identical on a re-run
    out2 = tmp_path / "sweep2"
    args[6] = str(out2)
    assert main(args) == 0
    assert (out / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()


def test_sweep_lrp_only_single_row_per_sample(tmp_path, genome_dir, genome_model):
    out = tmp_path / "lrponly"
    assert main(["sweep", "--model", str(genome_model), "--data", str(genome_dir),
                 "--out", str(out), "--variants", "lrp", "--metrics", "gini",
                 "--no-figures"]) == 0
    data = [r for r in _read_rows(out / "metrics.csv") if r["sampleId"] != "median"]
    assert len(data) == 48
    assert all(r["pOrMinGain"] == "" for r in data)


def test_sweep_figures_rendered(tmp_path, shapes_dir, shapes_model):
    out = tmp_path / "sweepfig"
    assert main(["sweep", "--model", str(shapes_model), "--data", str(shapes_dir),
                 "--out", str(out), "--variants", "lrp,plrp-lambda",
                 "--p-start", "0.0", "--p-end", "0.5", "--p-step", "0.25",
                 "--metrics", "gini,rma"]) == 0
    assert (out / "fig_gini_vs_p.png").exists()
    assert (out / "fig_rma_vs_p.png").exists()


def test_flip_on_genome_data_is_rejected(tmp_path, genome_dir, genome_model):
    rc = main(["flip", "--model", str(genome_model), "--data", str(genome_dir),
               "--out", str(tmp_path / "f")])
    assert rc == 2


def test_flip_writes_curves_and_auc(tmp_path, shapes_dir, shapes_model):
    out = tmp_path / "flip"
    assert main(["flip", "--model", str(shapes_model), "--data", str(shapes_dir),
                 "--out", str(out), "--variants", "lrp,plrp-lambda", "--p", "0.15",
                 "--patch-size", "2", "--flip-steps", "16", "--no-figures"]) == 0
    curves = _read_rows(out / "curves.csv")
    assert {r["method"] for r in curves} == {"lrp", "plrp-lambda"}
    assert all(float(r["score"]) == 1.0 for r in curves if r["fraction"] == "0.0")
    aucs = _read_rows(out / "auc_summary.csv")
    assert len(aucs) == 2


def test_report_renders_from_existing_csv(tmp_path, genome_dir, genome_model):
    sweep_out = tmp_path / "s"
    assert main(["sweep", "--model", str(genome_model), "--data", str(genome_dir),
                 "--out", str(sweep_out), "--variants", "plrp-lambda",
                 "--p-start", "0.0", "--p-end", "0.4", "--p-step", "0.2",
                 "--metrics", "gini", "--no-figures"]) == 0
    rep = tmp_path / "rep"
    assert main(["report", "--metrics", str(sweep_out / "metrics.csv"),
                 "--out", str(rep)]) == 0
    assert (rep / "fig_gini_vs_p.png").exists()


def test_gen_data_custom_motifs(tmp_path):
    out = tmp_path / "custom"
    assert main(["gen-data", "--kind", "genome", "--n", "4", "--seed", "1",
                 "--motifs", "0:GATTACA,1:CCGG", "--out", str(out)]) == 0
    meta = json.loads((out / "dataset.json").read_text())
    assert meta["motifs"] == {"0": "GATTACA", "1": "CCGG"}
