"""Portable model serialization.

Models are stored as versioned JSON with every parameter array flattened
in row-major order. Python's JSON encoder emits the shortest decimal that
round-trips each float64 exactly, so save/load preserves parameters
bit for bit. The field names are fixed; see docs/formats.md.
"""

import json

import numpy as np

from .errors import ModelFormatError
from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from .model import Model

FORMAT_VERSION = 1


def _flat(arr) -> list:
    return np.asarray(arr, dtype=np.float64).ravel().tolist()


def _layer_to_dict(layer) -> dict:
    if isinstance(layer, Dense):
        return {
            "kind": "Dense",
            "inputs": layer.in_features,
            "outputs": layer.out_features,
            "weights": _flat(layer.weights),
            "bias": _flat(layer.bias),
        }
    if isinstance(layer, Conv2D):
        oc, ic, kh, kw = layer.kernel.shape
        return {
            "kind": "Conv2D",
            "outChannels": oc,
            "inChannels": ic,
            "kernelHeight": kh,
            "kernelWidth": kw,
            "strideY": layer.stride[0],
            "strideX": layer.stride[1],
            "padY": layer.padding[0],
            "padX": layer.padding[1],
            "kernel": _flat(layer.kernel),
            "bias": _flat(layer.bias),
        }
    if isinstance(layer, ReLU):
        return {"kind": "ReLU"}
    if isinstance(layer, Flatten):
        return {"kind": "Flatten"}
    if isinstance(layer, MaxPool2D):
        return {
            "kind": "MaxPool2D",
            "windowY": layer.window[0],
            "windowX": layer.window[1],
            "strideY": layer.stride[0],
            "strideX": layer.stride[1],
        }
    raise ModelFormatError(f"cannot serialize layer kind {type(layer).__name__!r}")


def model_to_dict(model: Model) -> dict:
    return {
        "formatVersion": FORMAT_VERSION,
        "inputShape": list(model.input_shape),
        "numClasses": model.num_classes,
        "layers": [_layer_to_dict(l) for l in model.layers],
    }


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f, allow_nan=False)
        f.write("\n")


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    return d[key]


def _array(d: dict, key: str, where: str, shape) -> np.ndarray:
    raw = _need(d, key, where)
    if not isinstance(raw, list):
        raise ModelFormatError(f"{where}: field {key!r} must be a flat array")
    size = 1
    for dim in shape:
        size *= dim
    if len(raw) != size:
        raise ModelFormatError(
            f"{where}: field {key!r} has {len(raw)} entries, expected {size} for shape {tuple(shape)}"
        )
    try:
        arr = np.asarray(raw, dtype=np.float64).reshape(shape)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{where}: field {key!r} is not numeric: {e}") from e
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"{where}: field {key!r} contains non-finite values")
    return arr


def _int(d: dict, key: str, where: str) -> int:
    v = _need(d, key, where)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ModelFormatError(f"{where}: field {key!r} must be an integer")
    return v


def _layer_from_dict(d: dict, index: int):
    where = f"layers[{index}]"
    if not isinstance(d, dict):
        raise ModelFormatError(f"{where}: expected an object")
    kind = _need(d, "kind", where)
    if kind == "Dense":
        m = _int(d, "inputs", where)
        n = _int(d, "outputs", where)
        return Dense(_array(d, "weights", where, (m, n)), _array(d, "bias", where, (n,)))
    if kind == "Conv2D":
        oc = _int(d, "outChannels", where)
        ic = _int(d, "inChannels", where)
        kh = _int(d, "kernelHeight", where)
        kw = _int(d, "kernelWidth", where)
        return Conv2D(
            _array(d, "kernel", where, (oc, ic, kh, kw)),
            _array(d, "bias", where, (oc,)),
            stride=(_int(d, "strideY", where), _int(d, "strideX", where)),
            padding=(_int(d, "padY", where), _int(d, "padX", where)),
        )
    if kind == "ReLU":
        return ReLU()
    if kind == "Flatten":
        return Flatten()
    if kind == "MaxPool2D":
        return MaxPool2D(
            window=(_int(d, "windowY", where), _int(d, "windowX", where)),
            stride=(_int(d, "strideY", where), _int(d, "strideX", where)),
        )
    raise ModelFormatError(f"{where}: unknown layer kind {kind!r}")


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ModelFormatError("top level: expected an object")
    version = _need(doc, "formatVersion", "top level")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"top level: unsupported formatVersion {version!r}")
    input_shape = _need(doc, "inputShape", "top level")
    if not isinstance(input_shape, list) or not all(
        isinstance(v, int) and v > 0 for v in input_shape
    ):
        raise ModelFormatError("top level: inputShape must be a list of positive integers")
    num_classes = _int(doc, "numClasses", "top level")
    raw_layers = _need(doc, "layers", "top level")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("top level: layers must be a non-empty list")
    layers = [_layer_from_dict(d, i) for i, d in enumerate(raw_layers)]
    return Model(layers, input_shape, num_classes)


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return model_from_dict(doc)
