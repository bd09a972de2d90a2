import json

import numpy as np
import pytest

from src.db.checkpoint import save_checkpoint
from src.db.tensor_store import TensorStore, load_tensors
from src.main import cli
from src.models.nbnet import build
from src.utils.image_io import read_image, write_image
from src.utils.manifest import DatasetManifest
from src.utils.toy_images import write_toy_corpus


@pytest.fixture
def ckpt(tmp_path, tiny_config):
    return save_checkpoint(build(tiny_config, seed=0), tmp_path / "tiny.nbt")


def _effective_config(out: str) -> dict:
    head, _, rest = out.partition("\n")
    assert head == "# effective configuration"
    decoder = json.JSONDecoder()
    config, _ = decoder.raw_decode(rest)
    return config


def test_presets_lists_every_name(capsys):
    assert cli(["presets", "--size", "64"]) == 0
    out = capsys.readouterr().out
    assert _effective_config(out) == {"command": "presets", "size": 64}
    for name in ("unet_plain", "unet_blocks_ssa", "k1", "dotprod", "overfit1", "tiny-awgn"):
        assert name in out


def test_gradcheck_ssa_suite(capsys):
    assert cli(["gradcheck", "--module", "ssa", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and "checks passed" in out


def test_usage_errors_exit_with_one(capsys):
    assert cli(["gradcheck", "--bogus"]) == 1
    assert cli([]) == 1
    assert "usage" in capsys.readouterr().err


def test_denoise_writes_an_image(tmp_path, ckpt, tiny_config, capsys):
    src = write_image(np.random.default_rng(0).uniform(size=(1, 3, 16, 16)), tmp_path / "in.ppm")
    out = tmp_path / "out.ppm"
    assert cli(["denoise", "--ckpt", str(ckpt), "--in", str(src), "--out", str(out)]) == 0
    assert read_image(out).shape == (1, 3, 16, 16)
    config = _effective_config(capsys.readouterr().out)
    assert config["command"] == "denoise"
    assert config["network"] == tiny_config.to_dict() and config["step"] == 0


def test_denoise_rejects_non_divisible_sizes(tmp_path, ckpt, capsys):
    src = write_image(np.zeros((1, 3, 18, 16)), tmp_path / "odd.ppm")
    assert cli(["denoise", "--ckpt", str(ckpt), "--in", str(src), "--out", str(tmp_path / "o.ppm")]) == 2
    assert "divisible" in capsys.readouterr().err
    assert not (tmp_path / "o.ppm").exists()


def test_missing_checkpoint_is_a_runtime_error(tmp_path, capsys):
    src = write_image(np.zeros((1, 3, 16, 16)), tmp_path / "in.ppm")
    assert cli(["denoise", "--ckpt", str(tmp_path / "none.nbt"), "--in", str(src), "--out", "x.ppm"]) == 2
    assert "error:" in capsys.readouterr().err


def test_synth_noise_then_paired_eval(tmp_path, ckpt, capsys):
    manifest, _ = write_toy_corpus(tmp_path / "data", count=2, size=16, seed=0)
    pairs = tmp_path / "pairs"
    args = ["synth-noise", "--data", str(tmp_path / "data" / "toy.tsv"), "--noise", "awgn:25", "--out-dir", str(pairs)]
    assert cli(args) == 0
    paired = DatasetManifest.load(pairs / "manifest.tsv")
    assert paired.paired and len(paired) == len(manifest)

    records = tmp_path / "records.tsv"
    assert cli(["eval", "--ckpt", str(ckpt), "--data", str(pairs / "manifest.tsv"), "--paired",
                "--records", str(records)]) == 0
    assert "psnr_db" in capsys.readouterr().out
    assert len(records.read_text(encoding="utf-8").splitlines()) == 3


def test_export_basis(tmp_path, ckpt, capsys):
    src = write_image(np.random.default_rng(1).uniform(size=(1, 3, 16, 16)), tmp_path / "in.ppm")
    out_dir = tmp_path / "basis"
    assert cli(["export-basis", "--ckpt", str(ckpt), "--in", str(src), "--layer", "1", "--out-dir", str(out_dir)]) == 0
    config = _effective_config(capsys.readouterr().out)
    assert config["network"]["stages"] == 2 and config["step"] == 0
    assert sorted(p.name for p in out_dir.glob("*.pgm")) == [f"basis_{k:02d}.pgm" for k in range(4)]
    assert read_image(out_dir / "basis_00.pgm").shape == (1, 1, 8, 8)
    tensors, meta = load_tensors(out_dir / "basis.nbt")
    assert tensors["V"].shape == (1, 64, 4)
    assert (meta["stage"], meta["K"]) == (1, 4)


def test_export_basis_rejects_unknown_layer(tmp_path, ckpt):
    src = write_image(np.zeros((1, 3, 16, 16)), tmp_path / "in.ppm")
    assert cli(["export-basis", "--ckpt", str(ckpt), "--in", str(src), "--layer", "2", "--out-dir", str(tmp_path)]) == 2


def test_train_from_cli(tmp_path, capsys):
    write_toy_corpus(tmp_path / "data", count=2, size=16, seed=0)
    net = tmp_path / "net.json"
    net.write_text(json.dumps({"stages": 2, "base_channels": 8, "K": 4}), encoding="utf-8")
    train = tmp_path / "train.json"
    train.write_text(json.dumps({"total_iters": 2, "batch": 1, "patch": 16}), encoding="utf-8")
    out_dir = tmp_path / "run"
    args = ["train", "--net", str(net), "--train", str(train), "--data", str(tmp_path / "data" / "toy.tsv"),
            "--noise", "awgn:25", "--out-dir", str(out_dir)]
    assert cli(args) == 0
    out = capsys.readouterr().out
    assert _effective_config(out)["train"]["total_iters"] == 2
    assert (out_dir / "final.nbt").is_file()
    assert len((out_dir / "metrics.log").read_text(encoding="utf-8").splitlines()) == 2


def test_malformed_checkpoint_is_a_runtime_error(tmp_path, tiny_config, capsys):
    store = TensorStore(metadata={"format": "nbnet-checkpoint", "version": 1})
    store.update(build(tiny_config).params, prefix="param/")
    store.save(tmp_path / "bad.nbt")
    src = write_image(np.zeros((1, 3, 16, 16)), tmp_path / "in.ppm")
    assert cli(["denoise", "--ckpt", str(tmp_path / "bad.nbt"), "--in", str(src), "--out", "x.ppm"]) == 2
    assert "network configuration" in capsys.readouterr().err


def test_gradcheck_nbnet_suite(capsys):
    assert cli(["gradcheck", "--module", "nbnet", "--seed", "0"]) == 0
    assert "1/1 checks passed" in capsys.readouterr().out
