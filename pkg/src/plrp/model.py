"""Model container and forward inference with activation recording."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, NumericalError, ShapeMismatchError
from .layers import Dense, is_parameterized
from .util import as_float_array


class Model:
    """An ordered stack of layers computing pre-softmax class scores.

    The layer stack and all parameters are immutable after construction;
    models are safe to share across threads. The shape chain is resolved
    eagerly so any inconsistency is reported with the offending layer.
    """

    def __init__(self, layers, input_shape, num_classes):
        self.layers = tuple(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        if not self.layers:
            raise InvalidModelError("model has no layers")
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            try:
                shapes.append(tuple(layer.out_shape(shapes[-1])))
            except ShapeMismatchError as e:
                raise InvalidModelError(f"layer {i} ({layer.kind}): {e}") from e
        if not isinstance(self.layers[-1], Dense):
            raise InvalidModelError("last layer must be Dense (pre-softmax scores)")
        if shapes[-1] != (self.num_classes,):
            raise InvalidModelError(
                f"model outputs shape {shapes[-1]}, expected ({self.num_classes},)"
            )
        # shapes[i] is the input shape of layer i; shapes[i+1] its output shape
        self.shapes = tuple(shapes)

    def layer_input_shape(self, i):
        return self.shapes[i]

    def layer_output_shape(self, i):
        return self.shapes[i + 1]

    @property
    def parameterized_indices(self):
        return tuple(i for i, l in enumerate(self.layers) if is_parameterized(l))

    def forward_batch(self, x) -> np.ndarray:
        """Pre-softmax scores for a batch; no activations are recorded."""
        x = as_float_array(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatchError(
                f"batch input shape {tuple(x.shape[1:])} does not match model input "
                f"{self.input_shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        return x


@dataclass
class ActivationTrace:
    """Per-layer activations of one forward pass.

    ``per_layer[0]`` is the input, ``per_layer[i + 1]`` the output of layer
    ``i``; the last entry holds the pre-softmax scores.
    """

    per_layer: list = field(default_factory=list)
    winning_class: int = 0

    @property
    def scores(self) -> np.ndarray:
        return self.per_layer[-1]

    @property
    def winning_score(self) -> float:
        return float(self.scores[self.winning_class])


def forward(model: Model, x) -> ActivationTrace:
    """Run one input through the model, recording every activation.

    Raises ShapeMismatchError when the input does not match the model, and
    NumericalError (naming the layer) if any activation is non-finite.
    """
    x = as_float_array(x)
    if tuple(x.shape) != model.input_shape:
        raise ShapeMismatchError(
            f"input shape {tuple(x.shape)} does not match model input {model.input_shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericalError("input contains non-finite entries")
    per_layer = [x]
    cur = x[None]
    for i, layer in enumerate(model.layers):
        cur = layer.forward(cur)
        if not np.all(np.isfinite(cur)):
            raise NumericalError(f"layer {i} ({layer.kind}) produced non-finite activations")
        per_layer.append(cur[0])
    trace = ActivationTrace(per_layer=per_layer)
    trace.winning_class = int(np.argmax(per_layer[-1]))
    return trace
