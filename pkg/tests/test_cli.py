"""End-to-end runs of every subcommand through main(argv)."""

import json

import numpy as np
import pytest

from latentwalk import load_arrays, read_checkpoint_header
from latentwalk.cli import main

FAST = ("train_size = 96\n"
        "test_size = 64\n"
        "epochs = 2\n"
        "batch_size = 32\n"
        "chains = 24\n"
        "steps = 0,1\n")


@pytest.fixture
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST)
    return str(path)


def _train(tmp_path, fast_cfg, variant="vae", seed=1):
    out = tmp_path / f"{variant}-run"
    code = main(["train", "--variant", variant, "--seed", str(seed),
                 "--config", fast_cfg, "--out", str(out)])
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# train


def test_train_writes_expected_artifacts(tmp_path, fast_cfg):
    out = _train(tmp_path, fast_cfg)
    assert (out / "manifest.json").exists()
    assert (out / "losses.csv").exists()
    assert (out / "model.ckpt").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "train"
    assert manifest["config"]["train"]["epochs"] == 2
    assert manifest["seed"] == 1
    header = read_checkpoint_header(out / "model.ckpt")
    assert header["model"]["variant"] == "vae"
    lines = (out / "losses.csv").read_text().strip().splitlines()
    assert len(lines) == 3  # header + 2 epochs


def test_train_all_four_variants(tmp_path, fast_cfg):
    for variant in ("vae", "dvae", "aae", "daae"):
        out = _train(tmp_path, fast_cfg, variant=variant)
        header = read_checkpoint_header(out / "model.ckpt")
        expected_base = "vae" if variant in ("vae", "dvae") else "aae"
        assert header["model"]["variant"] == expected_base
        assert header["model"]["denoising"] == variant.startswith("d")


# ---------------------------------------------------------------------------
# sample


def test_sample_produces_grids_and_trace(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg)
    out = tmp_path / "samples"
    code = main(["sample", "--checkpoint", str(run / "model.ckpt"),
                 "--seed", "9", "--config", fast_cfg, "--out", str(out)])
    assert code == 0
    for step in (0, 1):
        assert (out / f"samples_step{step}_decoded.csv").exists()
        assert (out / f"samples_step{step}_latents.csv").exists()
    arrays, extra = load_arrays(out / "trace.bin")
    assert "z0" in arrays
    assert extra["steps"] == 1
    latents = np.loadtxt(out / "samples_step0_latents.csv", delimiter=",",
                         skiprows=1)
    assert latents.shape == (24, 2)


def test_sample_missing_checkpoint_fails_cleanly(tmp_path, fast_cfg, capsys):
    code = main(["sample", "--checkpoint", str(tmp_path / "nope.ckpt"),
                 "--config", fast_cfg, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error" in capsys.readouterr().err.lower()


# ---------------------------------------------------------------------------
# interpolate / reconstruct


def test_interpolate_grid_outputs(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg)
    out = tmp_path / "interp"
    code = main(["interpolate", "--checkpoint", str(run / "model.ckpt"),
                 "--seed", "2", "--config", fast_cfg, "--out", str(out),
                 "--rows", "3", "--cols", "3", "--indices", "0,1,2,3"])
    assert code == 0
    grid = np.loadtxt(out / "grid_step0_latents.csv", delimiter=",", skiprows=1)
    assert grid.shape == (9, 2)


def test_interpolate_bad_indices_rejected(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg)
    code = main(["interpolate", "--checkpoint", str(run / "model.ckpt"),
                 "--config", fast_cfg, "--out", str(tmp_path / "o"),
                 "--indices", "0,1,2,100000"])
    assert code == 1


def test_reconstruct_reports_errors_per_sample(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg, variant="dvae")
    out = tmp_path / "recon"
    code = main(["reconstruct", "--checkpoint", str(run / "model.ckpt"),
                 "--seed", "4", "--config", fast_cfg, "--out", str(out),
                 "--n", "8"])
    assert code == 0
    lines = (out / "errors.csv").read_text().strip().splitlines()
    assert lines[0] == "index,corruption_sq_error,reconstruction_sq_error"
    assert len(lines) == 9


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_writes_report(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg)
    out = tmp_path / "eval"
    code = main(["evaluate", "--checkpoint", str(run / "model.ckpt"),
                 "--seed", "6", "--config", fast_cfg, "--out", str(out)])
    assert code == 0
    text = (out / "report.csv").read_text()
    assert "mmd_to_encoded" in text
    data_lines = [l for l in text.splitlines()
                  if l and not l.startswith("#") and not l.startswith("step")]
    assert len(data_lines) == 2  # steps 0 and 1


def test_evaluate_is_seed_deterministic(tmp_path, fast_cfg):
    run = _train(tmp_path, fast_cfg)
    outs = []
    for tag in ("e1", "e2"):
        out = tmp_path / tag
        assert main(["evaluate", "--checkpoint", str(run / "model.ckpt"),
                     "--seed", "11", "--config", fast_cfg,
                     "--out", str(out)]) == 0
        outs.append((out / "report.csv").read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# oracle-check


def test_oracle_check_passes_by_default(tmp_path, capsys):
    code = main(["oracle-check", "--out", str(tmp_path / "oc"),
                 "--chains", "2000"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "PASS" in printed
    assert "FAIL" not in printed


def test_oracle_check_flags_divergence(tmp_path, capsys):
    code = main(["oracle-check", "--out", str(tmp_path / "oc"),
                 "--chains", "500", "--spectral-radius", "1.1"])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# usage errors


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["sample"])  # --checkpoint is required
    assert exc.value.code == 2


def test_bad_config_file_returns_one(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("epochs = tomorrow\n")
    code = main(["train", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "line 1" in capsys.readouterr().err


def test_manifest_written_before_outputs(tmp_path, fast_cfg):
    """Interpolate with out-of-range corners still leaves a manifest behind."""
    run = _train(tmp_path, fast_cfg)
    out = tmp_path / "doomed"
    code = main(["interpolate", "--checkpoint", str(run / "model.ckpt"),
                 "--config", fast_cfg, "--out", str(out),
                 "--indices", "0,1,2,100000"])
    assert code == 1
    assert (out / "manifest.json").exists()
