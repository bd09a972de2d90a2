from dataclasses import replace

import pytest

from src.config.schema import NetworkConfig, SsaConfig
from src.models.cost import MODULE_ORDER, count_params_and_flops, solve_macs
from src.models.layers import ConvSpec, conv_macs
from src.models.nbnet import build
from src.utils.errors import ConfigurationError

REFERENCE_PARAMS = 13.31e6


def test_single_conv_mac_count():
    assert conv_macs(32, 32, 3, 16, 16) == 2_359_296
    assert ConvSpec("c", 32, 32, 3, 1, 1).macs(16, 16) == 2_359_296


def test_strided_and_transposed_macs():
    down = ConvSpec("d", 8, 8, 4, 2, 1, scale=2)
    assert down.macs(32, 32) == 8 * 8 * 16 * 16 * 16
    up = ConvSpec("u", 16, 8, 2, 2, 0, transposed=True, scale=1)
    assert up.macs(32, 32) == 16 * 8 * 32 * 32
    assert up.weight_shape == (16, 8, 2, 2)
    assert up.fan_in == 16


def test_solve_macs():
    assert solve_macs(256, 16, 32) == 16 ** 3 + 2 * 256 * 16 * 16 + 2 * 256 * 16 * 32
    assert solve_macs(256, 16, 32, dot_product=True) == 2 * 256 * 16 * 32


def test_default_parameter_count():
    report = count_params_and_flops(NetworkConfig())
    assert report.params == 12_802_147
    assert abs(report.params - REFERENCE_PARAMS) / REFERENCE_PARAMS < 0.10


def test_default_breakdown():
    report = count_params_and_flops(NetworkConfig())
    frame = report.breakdown
    assert list(frame["module"]) == MODULE_ORDER
    by_module = dict(zip(frame["module"], frame["params"]))
    assert by_module["encoder"] == 2_608_960
    assert by_module["bottleneck"] == 3_671_552
    assert by_module["output"] == 867
    assert int(frame["params"].sum()) == report.params
    assert int(frame["macs"].sum()) == report.macs
    assert "parameters: 12,802,147" in report.format()


def test_count_matches_built_tensors(tiny_config):
    assert count_params_and_flops(tiny_config, 64, 64).params == build(tiny_config).param_count


@pytest.mark.parametrize("variant", ["projection", "dot_product"])
def test_count_matches_built_tensors_for_ablations(variant):
    config = NetworkConfig(stages=2, base_channels=8, skip_blocks=False, fusion="add",
                           ssa=SsaConfig(K=3, variant=variant, basis_block="wide"))
    assert count_params_and_flops(config, 32, 32).params == build(config).param_count


def test_doubling_width_roughly_quadruples_parameters():
    base = NetworkConfig()
    wide = replace(base, base_channels=64)
    ratio = count_params_and_flops(wide).params / count_params_and_flops(base).params
    assert 3.8 < ratio < 4.05


def test_macs_scale_with_input_area(tiny_config):
    small = count_params_and_flops(tiny_config, 32, 32)
    large = count_params_and_flops(tiny_config, 64, 64)
    assert small.params == large.params
    assert 3.5 < large.macs / small.macs <= 4.5


def test_size_must_be_divisible():
    with pytest.raises(ConfigurationError):
        count_params_and_flops(NetworkConfig(), 250, 256)
