import numpy as np
import pytest

from plrp.errors import InvalidModelError, NumericalError, ShapeMismatchError
from plrp.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from plrp.model import Model, forward


def brute_force_unfold(kernel, stride, padding, in_shape):
    """Naive per-output-position dense map; independent of the layer code."""
    c, h, w = in_shape
    oc, ic, kh, kw = kernel.shape
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    u = np.zeros((c * h * w, oc * oh * ow))
    for co in range(oc):
        for oy in range(oh):
            for ox in range(ow):
                col = (co * oh + oy) * ow + ox
                for ci in range(c):
                    for ky in range(kh):
                        for kx in range(kw):
                            y = oy * sh - ph + ky
                            x = ox * sw - pw + kx
                            if 0 <= y < h and 0 <= x < w:
                                u[(ci * h + y) * w + x, col] += kernel[co, ci, ky, kx]
    return u


def test_dense_identity_forward():
    model = Model([Dense(np.eye(2), np.zeros(2))], input_shape=(2,), num_classes=2)
    trace = forward(model, np.array([1.0, 2.0]))
    assert np.array_equal(trace.scores, [1.0, 2.0])


def test_relu_definition():
    layer = ReLU()
    out = layer.forward(np.array([[-1.0, 2.0, 0.0]]))
    assert np.array_equal(out, [[0.0, 2.0, 0.0]])


def test_conv_delta_kernel_is_identity():
    conv = Conv2D(np.ones((1, 1, 1, 1)), np.zeros(1), stride=(1, 1), padding=(0, 0))
    x = np.random.default_rng(0).standard_normal((1, 1, 4, 5))
    assert np.array_equal(conv.forward(x), x)


@pytest.mark.parametrize("stride,padding", [((1, 1), (0, 0)), ((2, 1), (1, 0)), ((2, 3), (1, 2))])
def test_conv_matches_brute_force_unfolding(stride, padding):
    rng = np.random.default_rng(7)
    kernel = rng.standard_normal((3, 2, 3, 4))
    bias = rng.standard_normal(3)
    conv = Conv2D(kernel, bias, stride=stride, padding=padding)
    in_shape = (2, 8, 9)
    x = rng.standard_normal((2,) + in_shape)
    expected_u = brute_force_unfold(kernel, stride, padding, in_shape)
    assert np.allclose(conv.unfolded(in_shape), expected_u)
    out = conv.forward(x)
    for i in range(2):
        flat = expected_u.T @ x[i].ravel() + conv.bias_per_output(in_shape)
        assert np.allclose(out[i].ravel(), flat, atol=1e-12)


def test_maxpool_forward_and_shape():
    pool = MaxPool2D(window=(2, 2), stride=(2, 2))
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    out = pool.forward(x)
    assert out.shape == (1, 1, 2, 2)
    assert np.array_equal(out[0, 0], [[5.0, 7.0], [13.0, 15.0]])


def test_flatten_row_major():
    layer = Flatten()
    x = np.arange(12.0).reshape(1, 2, 2, 3)
    assert np.array_equal(layer.forward(x)[0], np.arange(12.0))


def test_shape_chain_validated_with_layer_index():
    layers = [Dense(np.eye(3), np.zeros(3)), Dense(np.eye(2), np.zeros(2))]
    with pytest.raises(InvalidModelError, match="layer 1"):
        Model(layers, input_shape=(3,), num_classes=2)


def test_last_layer_must_be_dense():
    with pytest.raises(InvalidModelError, match="last layer"):
        Model([Dense(np.eye(2), np.zeros(2)), ReLU()], input_shape=(2,), num_classes=2)


def test_forward_rejects_wrong_input_shape():
    model = Model([Dense(np.eye(2), np.zeros(2))], input_shape=(2,), num_classes=2)
    with pytest.raises(ShapeMismatchError):
        forward(model, np.zeros(3))


def test_forward_rejects_non_finite_input():
    model = Model([Dense(np.eye(2), np.zeros(2))], input_shape=(2,), num_classes=2)
    with pytest.raises(NumericalError):
        forward(model, np.array([np.nan, 0.0]))


def test_forward_determinism_and_recorded_lengths():
    rng = np.random.default_rng(3)
    model = Model(
        [
            Dense(rng.standard_normal((4, 5)), rng.standard_normal(5)),
            ReLU(),
            Dense(rng.standard_normal((5, 3)), rng.standard_normal(3)),
        ],
        input_shape=(4,),
        num_classes=3,
    )
    x = rng.standard_normal(4)
    t1 = forward(model, x)
    t2 = forward(model, x)
    assert len(t1.per_layer) == len(model.layers) + 1
    assert all(np.array_equal(a, b) for a, b in zip(t1.per_layer, t2.per_layer))
    assert t1.winning_class == int(np.argmax(t1.scores))


def test_relu_trace_zeros_are_exact():
    rng = np.random.default_rng(5)
    model = Model(
        [Dense(rng.standard_normal((6, 6)), np.zeros(6)), ReLU(), Dense(np.eye(6), np.zeros(6))],
        input_shape=(6,),
        num_classes=6,
    )
    trace = forward(model, rng.standard_normal(6))
    relu_out = trace.per_layer[2]
    pre = trace.per_layer[1]
    assert np.all(relu_out[pre <= 0] == 0.0)


def test_realized_shapes_match_declared_chain():
    rng = np.random.default_rng(9)
    model = Model(
        [
            Conv2D(rng.standard_normal((3, 1, 3, 3)), np.zeros(3)),
            ReLU(),
            MaxPool2D((2, 2)),
            Flatten(),
            Dense(rng.standard_normal((27, 2)), np.zeros(2)),
        ],
        input_shape=(1, 8, 8),
        num_classes=2,
    )
    trace = forward(model, rng.random((1, 8, 8)))
    for i, act in enumerate(trace.per_layer):
        assert act.shape == model.shapes[i]
