"""Command-line interface: exit codes, artifacts, and output formats."""

import os

import numpy as np
import pytest

from dfformer.cli import main

TINY = """
model.name = nano-df
model.input = 32
model.classes = 4
train.epochs = 2
train.warmup_epochs = 1
train.batch_size = 8
train.lr = 4e-3
data.train_per_class = 4
data.test_per_class = 4
"""


def _cfg_file(tmp_path, text=TINY):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["params", "--bogus-flag"])
    assert err.value.code == 1


def test_validation_error_exits_2(capsys):
    assert main(["params", "--model", "nano-nothing"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["eval", "--model", "nano-df", "--images", "x.idx"]) == 2
    assert "--images and --labels go together" in capsys.readouterr().err


def test_io_error_exits_3(tmp_path, capsys):
    missing = str(tmp_path / "nope.dfck")
    assert main(["eval", "--model", "nano-df", "--ckpt", missing]) == 3
    assert "i/o error" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 3


def test_bad_config_key_exits_2(tmp_path, capsys):
    path = _cfg_file(tmp_path, "model.name = nano-df\ntrain.momentum = 0.9\n")
    assert main(["train", "--config", path]) == 2
    assert "momentum" in capsys.readouterr().err


def test_oracles_all_pass(capsys):
    assert main(["oracles"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l.strip()]
    assert len(lines) == 4
    assert all("PASS" in l for l in lines)


def test_params_output(capsys):
    assert main(["params", "--model", "nano-df"]) == 0
    out = capsys.readouterr().out
    assert "nano-df: 540298 parameters" in out
    assert "0.54M" in out


def test_flops_output(capsys):
    assert main(["flops", "--model", "dfformer-s18"]) == 0
    out = capsys.readouterr().out
    assert "dfformer-s18 @224: 3.960G MACs" in out
    assert "conv 3.794G" in out
    assert "spectral 0.166G" in out
    assert main(["flops", "--model", "dfformer-s18",
                 "--resolution", "100"]) == 2


def test_train_writes_artifacts_and_eval_reads_them(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    out = str(tmp_path / "run")
    assert main(["train", "--config", cfg, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "final train accuracy" in text
    assert "held-out accuracy" in text
    ckpt = os.path.join(out, "model.dfck")
    assert os.path.exists(ckpt)
    hist = open(os.path.join(out, "history.csv")).read().splitlines()
    assert hist[0] == "epoch,loss,acc"
    assert len(hist) == 3  # header + 2 epochs
    assert main(["eval", "--config", cfg, "--ckpt", ckpt]) == 0
    assert "accuracy" in capsys.readouterr().out


def test_train_is_deterministic_across_runs(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    a = str(tmp_path / "a")
    b = str(tmp_path / "b")
    assert main(["train", "--config", cfg, "--out", a]) == 0
    assert main(["train", "--config", cfg, "--out", b]) == 0
    capsys.readouterr()
    blob_a = open(os.path.join(a, "model.dfck"), "rb").read()
    blob_b = open(os.path.join(b, "model.dfck"), "rb").read()
    assert blob_a == blob_b


def test_gradcheck_tiny_model(tmp_path, capsys):
    text = """
    model.name = nano-df
    model.input = 32
    model.classes = 2
    stages[2].depth = 1
    stages[3].depth = 1
    """
    assert main(["gradcheck", "--config", _cfg_file(tmp_path, text),
                 "--samples", "1"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "worst relative error" in out


def test_bench_csv_and_error_rows(tmp_path, capsys):
    out = str(tmp_path / "bench")
    code = main([
        "bench", "--models", "nano-df", "--resolutions", "48,64",
        "--repeats", "1", "--batch", "1", "--out", out,
    ])
    assert code == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "model,resolution,seconds_per_image,macs,est_bytes"
    rows = [l for l in lines[1:] if l]
    # the 48 run is skipped with a diagnostic, the 64 run still happens
    assert len(rows) == 1
    assert rows[0].startswith("nano-df,64,")
    assert ("skip nano-df@48: input extent 48 is not a multiple of the "
            "total stride 32") in captured.err
    disk = open(os.path.join(out, "bench.csv")).read()
    assert disk == captured.out


def test_bench_kernels_csv(capsys):
    assert main(["bench", "--kernels", "--repeats", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "backend,op,size,seconds"
    backends = {l.split(",")[0] for l in lines[1:] if l}
    assert "python" in backends


def test_spectrum_writes_csv(tmp_path, capsys):
    out = str(tmp_path / "spec")
    assert main(["spectrum", "--model", "nano-df", "--batch", "4",
                 "--out", out]) == 0
    assert "wrote" in capsys.readouterr().out
    lines = open(os.path.join(out, "spectrum.csv")).read().splitlines()
    assert lines[0] == "freq,delta_log_amp,layer"
    layers = {l.rsplit(",", 1)[1] for l in lines[1:] if l}
    assert "down.0" in layers
    assert "stage0.block0.mixer" in layers


def test_viz_filters_writes_ppm(tmp_path, capsys):
    out = str(tmp_path / "viz")
    assert main(["viz-filters", "--model", "nano-df", "--max-filters", "2",
                 "--out", out]) == 0
    assert "filter images" in capsys.readouterr().out
    files = sorted(os.listdir(out))
    assert files
    assert all(f.endswith(".ppm") for f in files)
    assert any("basis.weights" in f for f in files)
    blob = open(os.path.join(out, files[0]), "rb").read()
    assert blob.startswith(b"P6\n")


def test_cka_self_comparison_diagonal(tmp_path, capsys):
    out = str(tmp_path / "cka")
    code = main([
        "cka", "--model-a", "nano-df", "--model-b", "nano-df",
        "--batches", "2", "--batch", "8", "--out", out,
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "mean diagonal similarity 1.0000" in text
    lines = open(os.path.join(out, "cka.csv")).read().splitlines()
    header = lines[0].split(",")
    assert header[1] == "down.0"
    first = lines[1].split(",")
    assert first[0] == "down.0"
    assert float(first[1]) == pytest.approx(1.0, abs=1e-6)


def test_cka_between_families(capsys):
    code = main([
        "cka", "--model-a", "nano-df", "--model-b", "nano-gf",
        "--batches", "2", "--batch", "8",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "mean diagonal similarity" in out
    values = [
        float(tok)
        for line in out.splitlines()[1:]
        if "," in line
        for tok in line.split(",")[1:]
    ]
    assert values
    assert all(-0.5 <= v <= 1.0 + 1e-9 for v in values)
