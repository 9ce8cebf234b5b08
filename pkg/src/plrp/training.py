"""Mini-batch SGD with softmax cross-entropy.

Deliberately bare: no momentum, no weight decay, no schedules. Training is
deterministic given the seed (batch shuffling is the only stochasticity).
"""

import numpy as np

from .errors import TrainingDivergedError
from .model import Model
from .util import as_float_array


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    # no clipping: a collapsed probability is a divergence signal, not noise
    n = probs.shape[0]
    with np.errstate(divide="ignore"):
        return float(-np.log(probs[np.arange(n), labels]).mean())


def train_sgd(model, dataset, epochs, learning_rate, seed, batch_size=32, on_epoch=None):
    """Train a copy of ``model`` and return it; the input model is untouched.

    ``dataset`` is a ``(inputs, labels)`` pair with inputs shaped
    ``(N,) + model.input_shape`` and integer labels in ``[0, num_classes)``.
    ``on_epoch(epoch, mean_loss, train_accuracy)`` is invoked after each
    epoch when given. Raises TrainingDivergedError on non-finite loss.
    """
    inputs, labels = dataset
    inputs = as_float_array(inputs)
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.shape[0] != labels.shape[0]:
        raise ValueError("inputs and labels disagree on sample count")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise ValueError(f"labels must lie in [0, {model.num_classes})")

    layers = [
        layer.replace(**{k: v.copy() for k, v in layer.parameters().items()})
        if layer.parameters()
        else layer
        for layer in model.layers
    ]
    rng = np.random.default_rng(seed)
    n = inputs.shape[0]

    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            x = inputs[idx]
            y = labels[idx]

            acts = [x]
            for layer in layers:
                acts.append(layer.forward(acts[-1]))
            probs = softmax(acts[-1])
            loss = cross_entropy(probs, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // batch_size}"
                )
            losses.append(loss)
            correct += int((acts[-1].argmax(axis=1) == y).sum())

            grad = probs
            grad[np.arange(len(y)), y] -= 1.0
            grad /= len(y)
            for i in range(len(layers) - 1, -1, -1):
                layer = layers[i]
                grad, param_grads = layer.backward(acts[i], grad)
                if param_grads:
                    params = layer.parameters()
                    layers[i] = layer.replace(
                        **{
                            k: params[k] - learning_rate * param_grads[k]
                            for k in params
                        }
                    )
        if on_epoch is not None:
            on_epoch(epoch, float(np.mean(losses)), correct / n)

    return Model(layers, model.input_shape, model.num_classes)


def evaluate_accuracy(model, inputs, labels, batch_size=256) -> float:
    inputs = as_float_array(inputs)
    labels = np.asarray(labels, dtype=np.int64)
    correct = 0
    for start in range(0, inputs.shape[0], batch_size):
        logits = model.forward_batch(inputs[start : start + batch_size])
        correct += int((logits.argmax(axis=1) == labels[start : start + batch_size]).sum())
    return correct / max(1, inputs.shape[0])
