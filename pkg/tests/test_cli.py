import json
import os

import numpy as np
import pytest

from discobox import cli, corrmetric, membank, synthgen
from discobox.tensors import read_bundle

from cli_helpers import make_refine_input, make_single_roi


def run(argv):
    return cli.main([str(a) for a in argv])


def test_refine_runs_and_writes_labels(tmp_path):
    inp = tmp_path / "in.dbxb"
    out = tmp_path / "out.dbxb"
    make_refine_input(inp, [0, 1], size=12)
    assert run(["refine", "--input", inp, "--output", out,
                "--set", "roi_size=12", "--set", "mf_iters=3"]) == 0
    bundle = read_bundle(out)
    for i in range(2):
        label = bundle.get(f"label/roi-{i}")
        assert label.dtype == np.uint8 and label.shape == (12, 12)
        assert set(np.unique(label)) <= {0, 1}
    rows = json.loads(bytes(bundle.get("report.json")).decode("utf-8"))["losses"]
    assert [r["id"] for r in rows] == ["roi-0", "roi-1"]
    for r in rows:
        assert np.isfinite(r["total"])


def test_refine_is_deterministic(tmp_path):
    inp = tmp_path / "in.dbxb"
    make_refine_input(inp, [3, 4], size=12)
    args = ["refine", "--input", inp, "--set", "roi_size=12", "--set", "mf_iters=3"]
    assert run(args + ["--output", tmp_path / "a.dbxb"]) == 0
    assert run(args + ["--output", tmp_path / "b.dbxb"]) == 0
    assert (tmp_path / "a.dbxb").read_bytes() == (tmp_path / "b.dbxb").read_bytes()


def test_refine_bank_snapshot_roundtrip(tmp_path):
    inp = tmp_path / "in.dbxb"
    bank_path = tmp_path / "bank.dbxb"
    make_refine_input(inp, [5, 6], size=16)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb",
                "--bank-out", bank_path, "--set", "roi_size=16",
                "--set", "mf_iters=2"]) == 0
    bank = membank.restore(read_bundle(bank_path))
    assert bank.size(1) == 2


def test_refine_empty_bundle_succeeds(tmp_path):
    from discobox.tensors import TensorBundle, write_bundle
    inp = tmp_path / "empty.dbxb"
    out = tmp_path / "out.dbxb"
    write_bundle(TensorBundle(), inp)
    assert run(["refine", "--input", inp, "--output", out]) == 0
    bundle = read_bundle(out)
    assert json.loads(bytes(bundle.get("report.json")).decode("utf-8"))["losses"] == []


def test_refine_missing_array_exit_2(tmp_path):
    from cli_helpers import bundle_from_objects
    from discobox.tensors import write_bundle
    obj, _ = synthgen.gen_shape_roi(0, 12)
    bundle = bundle_from_objects([obj])
    del bundle.arrays[f"mask/{obj.id}"]
    inp = tmp_path / "in.dbxb"
    write_bundle(bundle, inp)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb"]) == 2


def test_refine_bad_magic_exit_2(tmp_path):
    inp = tmp_path / "junk.dbxb"
    inp.write_bytes(b"NOPE" + b"\x00" * 32)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb"]) == 2


def test_refine_missing_file_exit_2(tmp_path):
    assert run(["refine", "--input", tmp_path / "nope.dbxb",
                "--output", tmp_path / "o.dbxb"]) == 2


def test_unknown_config_key_exit_2(tmp_path):
    inp = tmp_path / "in.dbxb"
    make_refine_input(inp, [0], size=12)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb",
                "--set", "bogus=1"]) == 2


def test_config_file_applies(tmp_path):
    inp = tmp_path / "in.dbxb"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment line\nroi_size = 12\nmf_iters = 2\n")
    make_refine_input(inp, [0], size=12)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb",
                "--config", cfg]) == 0
    label = read_bundle(tmp_path / "o.dbxb").get("label/roi-0")
    assert label.shape == (12, 12)


def test_numeric_error_exit_3(tmp_path, monkeypatch):
    from discobox.errors import NumericalUnderflow

    def boom(*a, **k):
        raise NumericalUnderflow("forced")

    monkeypatch.setattr(cli, "refine_batch", boom)
    inp = tmp_path / "in.dbxb"
    make_refine_input(inp, [0], size=12)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb"]) == 3


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("DISCOBOX_THREADS", "2")
    inp = tmp_path / "in.dbxb"
    make_refine_input(inp, [0, 1], size=12)
    assert run(["refine", "--input", inp, "--output", tmp_path / "o.dbxb",
                "--set", "roi_size=12", "--set", "mf_iters=2"]) == 0


def test_match_outputs(tmp_path):
    a = make_single_roi(tmp_path / "a.dbxb", 0, size=8)
    make_single_roi(tmp_path / "b.dbxb", 1, size=8)
    assert run(["match", "--a", tmp_path / "a.dbxb", "--b", tmp_path / "b.dbxb",
                "--out", tmp_path / "m.dbxb", "--set", "roi_size=8",
                "--set", "icm_iters=1"]) == 0
    bundle = read_bundle(tmp_path / "m.dbxb")
    plan = bundle.get("plan")
    assert plan.shape == (64, 64)
    assert bundle.get("targets").shape == (8, 8)
    assert bundle.get("confidence").shape == (8, 8)
    assert np.all(plan >= 0)


def test_match_rejects_multi_object_bundle(tmp_path):
    make_refine_input(tmp_path / "two.dbxb", [0, 1], size=8)
    make_single_roi(tmp_path / "b.dbxb", 1, size=8)
    assert run(["match", "--a", tmp_path / "two.dbxb", "--b", tmp_path / "b.dbxb",
                "--out", tmp_path / "m.dbxb", "--set", "roi_size=8"]) == 2


def test_eval_corr_writes_report_trio(tmp_path):
    gt, preds = synthgen.gen_metric_fixture(seed=0, n_pairs=3)
    corrmetric.dump_annotations(tmp_path / "gt.json", gt)
    corrmetric.dump_predictions(tmp_path / "pred.json", preds)
    rpt = tmp_path / "report.json"
    assert run(["eval-corr", "--gt", tmp_path / "gt.json",
                "--pred", tmp_path / "pred.json", "--report", rpt]) == 0
    data = json.loads(rpt.read_text())
    assert data["mean_ap"] == pytest.approx(1.0)
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "report.png").stat().st_size > 0


def test_eval_corr_malformed_json_exit_2(tmp_path):
    (tmp_path / "gt.json").write_text("{not json")
    (tmp_path / "pred.json").write_text('{"predictions": []}')
    assert run(["eval-corr", "--gt", tmp_path / "gt.json",
                "--pred", tmp_path / "pred.json",
                "--report", tmp_path / "r.json"]) == 2


def test_bench_writes_csv_and_figure(tmp_path):
    out = tmp_path / "bench.csv"
    assert run(["bench", "--roi-size", 4, "--pairs", 1, "--out", out]) == 0
    assert out.exists()
    assert (tmp_path / "bench.png").stat().st_size > 0


def test_bench_zero_roi_size_exit_2(tmp_path):
    assert run(["bench", "--roi-size", 0]) == 2


def test_console_script_installed():
    import shutil
    import subprocess
    exe = shutil.which("discobox")
    assert exe is not None
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "refine" in proc.stdout
