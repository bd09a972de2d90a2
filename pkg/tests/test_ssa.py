import numpy as np
import pytest

from src.autograd import Tensor
from src.config.schema import SsaConfig
from src.models.layers import init_params
from src.models.ssa import BasisSet, basis_specs, dot_product_project, generate_basis, project, ssa_forward
from src.services.verification_service import ssa_suite
from src.utils.errors import NumericalError


def _params(config, channels, seed=0, dtype=np.float64):
    return init_params(basis_specs("", channels, config, scale=1), np.random.default_rng(seed), dtype=dtype)


def _basis(V, height, width):
    return BasisSet(V=Tensor(V), height=height, width=width)


def _explicit_projection(V, X):
    # B x N x K basis, B x C x H x W feature
    B, C, H, W = X.shape
    flat = X.reshape(B, C, H * W).transpose(0, 2, 1)
    out = np.stack([V[b] @ np.linalg.inv(V[b].T @ V[b]) @ V[b].T @ flat[b] for b in range(B)])
    return out.transpose(0, 2, 1).reshape(B, C, H, W)


def test_basis_shape_for_default_k():
    config = SsaConfig(K=16)
    rng = np.random.default_rng(0)
    x1 = Tensor(rng.standard_normal((1, 32, 16, 16)).astype(np.float32))
    x2 = Tensor(rng.standard_normal((1, 32, 16, 16)).astype(np.float32))
    basis = generate_basis(x1, x2, {k: Tensor(v) for k, v in _params(config, 32, dtype=np.float32).items()}, config)
    assert basis.V.shape == (1, 256, 16)
    assert basis.K == 16
    assert basis.maps().shape == (1, 16, 16, 16)


@pytest.mark.parametrize("source,channels_in", [("x1_and_x2", 8), ("x1_only", 4), ("x2_only", 4)])
def test_basis_block_input_width(source, channels_in):
    specs = basis_specs("dec0.ssa.", 4, SsaConfig(K=2, basis_source=source), scale=1)
    assert specs[0].name == "dec0.ssa.basis.conv1"
    assert specs[0].cin == channels_in
    assert specs[1].cout == 2


def test_wide_basis_block_has_a_head():
    specs = basis_specs("", 4, SsaConfig(K=2, basis_block="wide"), scale=1)
    assert [s.name for s in specs] == ["basis.conv1", "basis.conv2", "basis.head"]
    assert specs[-1].cin == 8 and specs[-1].cout == 2


def test_zero_basis_block_gives_degenerate_basis(rng):
    config = SsaConfig(K=3, gram_eps=0.0)
    params = _params(config, 4)
    for name in ("basis.conv2", "basis.proj"):
        params[f"{name}.weight"][...] = 0.0
        params[f"{name}.bias"][...] = 0.0
    tensors = {k: Tensor(v) for k, v in params.items()}
    x1, x2 = Tensor(rng.standard_normal((1, 4, 8, 8))), Tensor(rng.standard_normal((1, 4, 8, 8)))
    basis = generate_basis(x1, x2, tensors, config)
    assert not np.any(basis.V.data)
    with pytest.raises(NumericalError):
        ssa_forward(x1, x2, tensors, config)


def test_basis_generation_is_deterministic(rng):
    config = SsaConfig(K=3)
    tensors = {k: Tensor(v) for k, v in _params(config, 4).items()}
    x1, x2 = Tensor(rng.standard_normal((2, 4, 8, 8))), Tensor(rng.standard_normal((2, 4, 8, 8)))
    a = generate_basis(x1, x2, tensors, config).V.data
    b = generate_basis(x1, x2, tensors, config).V.data
    np.testing.assert_array_equal(a, b)


def test_projection_fixes_its_range(rng):
    V = rng.standard_normal((1, 64, 4))
    A = rng.standard_normal((1, 4, 3))
    X = np.matmul(V, A).transpose(0, 2, 1).reshape(1, 3, 8, 8)
    out = project(_basis(V, 8, 8), Tensor(X)).data
    np.testing.assert_allclose(out, X, atol=1e-8)


def test_constant_basis_projects_onto_channel_means(rng):
    X = rng.standard_normal((1, 2, 4, 4))
    out = project(_basis(np.ones((1, 16, 1)), 4, 4), Tensor(X)).data
    expected = np.broadcast_to(X.mean(axis=(2, 3), keepdims=True), X.shape)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_projection_matches_explicit_inverse(rng):
    V = rng.standard_normal((2, 16, 4))
    X = rng.standard_normal((2, 2, 4, 4))
    np.testing.assert_allclose(project(_basis(V, 4, 4), Tensor(X)).data, _explicit_projection(V, X), atol=1e-10)


def test_projection_depends_only_on_span(rng):
    V = rng.standard_normal((1, 36, 5))
    D = rng.standard_normal((5, 5)) + 3 * np.eye(5)
    X = Tensor(rng.standard_normal((1, 3, 6, 6)))
    np.testing.assert_allclose(
        project(_basis(V @ D, 6, 6), X).data, project(_basis(V, 6, 6), X).data, atol=1e-9
    )


def test_projection_does_not_expand_energy(rng):
    for _ in range(20):
        V = rng.standard_normal((1, 25, 3))
        X = rng.standard_normal((1, 4, 5, 5))
        out = project(_basis(V, 5, 5), Tensor(X)).data
        assert np.all(np.linalg.norm(out, axis=(2, 3)) <= np.linalg.norm(X, axis=(2, 3)) * (1 + 1e-5))


def test_projection_of_projection_is_unchanged(rng):
    basis = _basis(rng.standard_normal((1, 64, 4)), 8, 8)
    once = project(basis, Tensor(rng.standard_normal((1, 3, 8, 8))))
    twice = project(basis, once)
    assert np.max(np.abs(twice.data - once.data)) < 1e-10


def test_variants_agree_for_orthonormal_basis(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((64, 4)))
    basis = _basis(Q[None], 8, 8)
    X = Tensor(rng.standard_normal((1, 3, 8, 8)))
    np.testing.assert_allclose(dot_product_project(basis, X).data, project(basis, X).data, atol=1e-10)


def test_dot_product_is_not_scale_invariant(rng):
    V = rng.standard_normal((1, 64, 4))
    X = Tensor(rng.standard_normal((1, 3, 8, 8)))
    dot1 = dot_product_project(_basis(V, 8, 8), X).data
    dot2 = dot_product_project(_basis(2 * V, 8, 8), X).data
    np.testing.assert_allclose(dot2, 4 * dot1, rtol=1e-10)
    np.testing.assert_allclose(
        project(_basis(2 * V, 8, 8), X).data, project(_basis(V, 8, 8), X).data, atol=1e-10
    )


@pytest.mark.parametrize("projected", ["x1", "x2"])
def test_ssa_forward_preserves_shape(rng, projected):
    config = SsaConfig(K=4, projected_input=projected)
    tensors = {k: Tensor(v) for k, v in _params(config, 8).items()}
    x1, x2 = Tensor(rng.standard_normal((2, 8, 8, 8))), Tensor(rng.standard_normal((2, 8, 8, 8)))
    captured = {}
    out = ssa_forward(x1, x2, tensors, config, prefix="", capture=captured)
    assert out.shape == (2, 8, 8, 8)
    assert "" in captured


def test_ssa_gradients_for_both_variants():
    reports = ssa_suite(seed=1)
    assert [r.name for r in reports] == ["ssa_forward (projection)", "ssa_forward (dot_product)"]
    for report in reports:
        assert report.passed, report.format()
