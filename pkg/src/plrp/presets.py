"""Ready-made desk-scale model architectures."""

import numpy as np

from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from .model import Model

GENOME_MOTIFS = {0: "GATTACAGATTA", 1: "CCGCGTTACGCA"}


def _he(rng, shape, fan_in):
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def genome_cnn(filters=4, seed=0, num_classes=2, length=250, kernel_width=12, pool_width=8,
               hidden=32) -> Model:
    """Motif-detector CNN over one-hot (1, 4, length) inputs.

    One convolution spanning the full base axis, ReLU, width pooling, then
    a small dense head. The two shipped presets use 4 and 32 filters.
    """
    rng = np.random.default_rng(seed)
    conv_out_w = length - kernel_width + 1
    pooled_w = (conv_out_w - pool_width) // pool_width + 1
    flat = filters * pooled_w
    layers = [
        Conv2D(
            _he(rng, (filters, 1, 4, kernel_width), 4 * kernel_width),
            np.zeros(filters),
            stride=(1, 1),
            padding=(0, 0),
        ),
        ReLU(),
        MaxPool2D(window=(1, pool_width), stride=(1, pool_width)),
        Flatten(),
        Dense(_he(rng, (flat, hidden), flat), np.zeros(hidden)),
        ReLU(),
        Dense(_he(rng, (hidden, num_classes), hidden), np.zeros(num_classes)),
    ]
    return Model(layers, input_shape=(1, 4, length), num_classes=num_classes)


def shape_cnn(seed=0, num_classes=2, image_size=16, filters=(8, 12), hidden=(64, 32)) -> Model:
    """Small grayscale image CNN with two conv blocks and two hidden layers.

    The depth matters for the pruned-attribution studies: every hidden
    layer contributes one pruning step on the way back to the input.
    """
    rng = np.random.default_rng(seed)
    c1 = image_size - 2
    p1 = c1 // 2
    c2 = p1 - 2
    flat = filters[1] * c2 * c2
    layers = [
        Conv2D(_he(rng, (filters[0], 1, 3, 3), 9), np.zeros(filters[0])),
        ReLU(),
        MaxPool2D(window=(2, 2), stride=(2, 2)),
        Conv2D(_he(rng, (filters[1], filters[0], 3, 3), 9 * filters[0]), np.zeros(filters[1])),
        ReLU(),
        Flatten(),
        Dense(_he(rng, (flat, hidden[0]), flat), np.zeros(hidden[0])),
        ReLU(),
        Dense(_he(rng, (hidden[0], hidden[1]), hidden[0]), np.zeros(hidden[1])),
        ReLU(),
        Dense(_he(rng, (hidden[1], num_classes), hidden[1]), np.zeros(num_classes)),
    ]
    return Model(layers, input_shape=(1, image_size, image_size), num_classes=num_classes)


PRESETS = {
    "genome-4": lambda seed: genome_cnn(filters=4, seed=seed),
    "genome-32": lambda seed: genome_cnn(filters=32, seed=seed),
    "toy-image": lambda seed: shape_cnn(seed=seed),
}
