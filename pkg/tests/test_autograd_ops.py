import numpy as np
import pytest

from src.autograd import (
    GradTape,
    Tensor,
    add,
    concat,
    crop2d,
    l1_loss,
    leaky_relu,
    mean,
    multiply,
    permute,
    reshape,
    sum_all,
)
from src.utils.errors import ConfigurationError, NumericalError


def test_default_dtype_is_float32_and_float64_is_kept():
    assert Tensor([1, 2, 3]).dtype == np.float32
    assert Tensor(np.zeros(2, dtype=np.float64)).dtype == np.float64


def test_leaky_relu_values():
    out = leaky_relu(Tensor(np.array([4.0, -1.0])), 0.2)
    np.testing.assert_allclose(out.data, [4.0, -0.2], rtol=1e-7)


def test_leaky_relu_rejects_slope_outside_unit_interval():
    with pytest.raises(ConfigurationError):
        leaky_relu(Tensor([1.0]), 1.5)


def test_concat_on_channel_axis():
    out = concat([Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.ones((1, 3, 4, 4)))], axis=1)
    assert out.shape == (1, 5, 4, 4)


def test_concat_incompatible_shapes():
    with pytest.raises(ConfigurationError):
        concat([Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 2, 5, 4)))], axis=1)


def test_flatten_is_inverted_exactly(rng):
    x = Tensor(rng.standard_normal((2, 3, 4, 5)))
    flat = permute(reshape(x, (2, 3, 20)), (0, 2, 1))
    assert flat.shape == (2, 20, 3)
    back = reshape(permute(flat, (0, 2, 1)), (2, 3, 4, 5))
    np.testing.assert_array_equal(back.data, x.data)
    assert sorted(flat.data.ravel()) == sorted(x.data.ravel())


def test_mean_gradient_is_one_over_n(rng):
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    with GradTape() as tape:
        y = mean(x)
    (g,) = tape.gradient(y, [x])
    np.testing.assert_allclose(g, np.full((3, 4), 1 / 12))


def test_crop2d_window_and_bounds():
    x = Tensor(np.arange(36, dtype=np.float64).reshape(1, 1, 6, 6))
    out = crop2d(x, 1, 2, 2, 3)
    np.testing.assert_array_equal(out.data[0, 0], [[8, 9, 10], [14, 15, 16]])
    with pytest.raises(ConfigurationError):
        crop2d(x, 5, 0, 2, 2)


def test_l1_loss_examples(rng):
    a = rng.standard_normal((2, 3, 4))
    assert l1_loss(Tensor(a), Tensor(a)).item() == 0.0
    np.testing.assert_allclose(l1_loss(Tensor(a + 0.5), Tensor(a)).item(), 0.5, rtol=1e-12)
    b = rng.standard_normal((2, 3, 4))
    total = 0.0
    for v, w in zip(a.ravel(), b.ravel()):
        total += abs(v - w)
    assert abs(l1_loss(Tensor(a), Tensor(b)).item() - total / a.size) < 1e-6


def test_l1_loss_shape_mismatch():
    with pytest.raises(ConfigurationError):
        l1_loss(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_l1_subgradient_is_zero_at_ties():
    pred = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    with GradTape() as tape:
        loss = l1_loss(pred, Tensor(np.array([1.0, 0.0, 5.0])))
    (g,) = tape.gradient(loss, [pred])
    np.testing.assert_allclose(g, [0.0, 1 / 3, -1 / 3])


def test_gradients_accumulate_over_multiple_consumers():
    x = Tensor(np.array([2.0, -3.0]), requires_grad=True)
    with GradTape() as tape:
        y = sum_all(add(multiply(x, x), x))
    (g,) = tape.gradient(y, [x])
    np.testing.assert_allclose(g, 2 * x.data + 1)


def test_tape_replays_in_reverse_execution_order():
    x = Tensor(np.array([1.0]), requires_grad=True)
    with GradTape() as tape:
        a = multiply(x, 3.0)
        b = add(a, 1.0)
        sum_all(b)
    assert tape.operations == ["Mul", "Add", "Sum"]
    assert [n.index for n in tape._nodes] == [0, 1, 2]


def test_unreachable_source_gets_zero_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones(2), requires_grad=True)
    with GradTape() as tape:
        y = sum_all(x)
    gx, gu = tape.gradient(y, [x, unused])
    np.testing.assert_array_equal(gx, np.ones(3))
    np.testing.assert_array_equal(gu, np.zeros(2))


def test_non_scalar_target_needs_output_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    with GradTape() as tape:
        y = multiply(x, 2.0)
    with pytest.raises(ConfigurationError):
        tape.gradient(y, [x])


def test_persistent_tape_allows_repeated_gradients():
    x = Tensor(np.array([3.0]), requires_grad=True)
    with GradTape(persistent=True) as tape:
        y = sum_all(multiply(x, x))
    first = tape.gradient(y, [x])[0]
    second = tape.gradient(y, [x])[0]
    np.testing.assert_array_equal(first, second)


def test_untracked_inputs_are_not_recorded():
    with GradTape() as tape:
        add(Tensor([1.0]), Tensor([2.0]))
    assert len(tape) == 0


def test_watch_tracks_plain_tensor():
    x = Tensor(np.array([1.5]))
    with GradTape() as tape:
        tape.watch(x)
        y = sum_all(multiply(x, 4.0))
    np.testing.assert_allclose(tape.gradient(y, [x])[0], [4.0])


def test_non_finite_forward_raises():
    with pytest.raises(NumericalError):
        multiply(Tensor(np.array([np.inf])), 1.0)


def test_op_outputs_are_read_only():
    out = add(Tensor([1.0]), Tensor([2.0]))
    with pytest.raises(ValueError):
        out.data[0] = 5.0


def test_broadcast_mismatch_is_configuration_error():
    with pytest.raises(ConfigurationError):
        add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4,))))


def test_item_needs_a_single_element():
    assert Tensor(np.array([[2.5]])).item() == 2.5
    with pytest.raises(ConfigurationError, match="single-element"):
        Tensor(np.zeros(3)).item()
