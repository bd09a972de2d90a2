import json

import pytest

from src.config import settings
from src.config.schema import NetworkConfig, NoiseSpec, SsaConfig, TrainConfig, load_json
from src.utils.errors import ConfigurationError


def test_defaults_follow_settings():
    net = NetworkConfig()
    assert (net.stages, net.base_channels, net.K) == (4, 32, 16)
    assert net.leaky_slope == settings.LEAKY_SLOPE
    assert net.ssa.gram_eps == settings.GRAM_EPS
    assert TrainConfig().seed == settings.SEED


def test_network_round_trips_through_json(tmp_path):
    net = NetworkConfig(stages=3, fusion="add", ssa=SsaConfig(K=8, variant="dot_product"))
    path = tmp_path / "net.json"
    path.write_text(json.dumps(net.to_dict()), encoding="utf-8")
    assert NetworkConfig.from_dict(load_json(path)) == net


def test_top_level_k_is_accepted():
    assert NetworkConfig.from_dict({"K": 4, "base_channels": 8}).ssa.K == 4


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigurationError, match="widht"):
        NetworkConfig.from_dict({"widht": 3})
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"learning_rate": 1e-3})


@pytest.mark.parametrize(
    "kwargs",
    [
        {"stages": 0},
        {"fusion": "sum"},
        {"leaky_slope": 1.0},
        {"base_channels": 16, "ssa": SsaConfig(K=16)},
    ],
)
def test_invalid_network_configs(kwargs):
    with pytest.raises(ConfigurationError):
        NetworkConfig(**kwargs)


def test_k_limit_ignored_without_ssa():
    assert NetworkConfig(base_channels=4, ssa=SsaConfig(K=16, enabled=False)).K == 16


@pytest.mark.parametrize("field_name, value", [("basis_source", "x3"), ("variant", "cosine"), ("gram_eps", -1.0), ("K", 0)])
def test_invalid_ssa_configs(field_name, value):
    with pytest.raises(ConfigurationError):
        SsaConfig(**{field_name: value})


def test_train_config_checks():
    with pytest.raises(ConfigurationError):
        TrainConfig(eta_min=1.0, lr0=1e-3)
    with pytest.raises(ConfigurationError):
        TrainConfig(betas=(0.9, 1.0))
    cfg = TrainConfig.from_dict({"betas": [0.5, 0.9], "patch": 64})
    assert cfg.betas == (0.5, 0.9)
    assert cfg.to_dict()["betas"] == [0.5, 0.9]
    cfg.validate_for(NetworkConfig())
    with pytest.raises(ConfigurationError, match="divisible"):
        TrainConfig(patch=24).validate_for(NetworkConfig())


def test_noise_spec_parse():
    spec = NoiseSpec.parse("awgn:25", seed=3)
    assert spec.sigma == pytest.approx(25 / 255) and spec.seed == 3
    assert spec.describe() == "awgn:25"
    assert NoiseSpec.parse("noniid:test2").mask_id == "test2"
    for bad in ("awgn", "awgn:x", "speckle:3", "noniid:constant", "awgn:0"):
        with pytest.raises(ConfigurationError):
            NoiseSpec.parse(bad)


def test_debug_noise_settings():
    assert NoiseSpec(kind="awgn", sigma=0.0, debug=True).sigma == 0.0
    assert NoiseSpec(kind="noniid", mask_id="constant", debug=True).mask_id == "constant"
    assert NoiseSpec.from_dict(NoiseSpec(seed=9).to_dict()).with_seed(2).seed == 2


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        load_json(path)


def test_settings_are_module_attributes_read_from_the_environment(monkeypatch):
    import importlib

    import src.config

    monkeypatch.setenv("NBNET_GRAM_EPS", "0.001")
    monkeypatch.setenv("NBNET_NUM_WORKERS", "3")
    try:
        importlib.reload(settings)
        assert settings.GRAM_EPS == 1e-3 and settings.NUM_WORKERS == 3
    finally:
        monkeypatch.undo()
        importlib.reload(settings)
    for key in ("LOG_LEVEL", "GRAM_EPS", "LEAKY_SLOPE", "DATA_ROOT", "CHECKPOINT_DIR", "NUM_WORKERS", "SEED"):
        assert hasattr(settings, key)
    assert not hasattr(src.config, "get")
