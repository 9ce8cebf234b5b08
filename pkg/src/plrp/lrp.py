"""Baseline layer-wise relevance propagation over a whole model.

The backward pass starts from the winning class score and walks the layer
stack in reverse. Parameterized layers (dense, conv) apply their assigned
rule; ReLU passes relevance through unchanged, flatten reshapes it, and
max pooling routes it to the window winners. Convolutions are propagated
through their unfolded dense map, so one rule implementation serves both
layer kinds.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, ModelFormatError
from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, is_parameterized
from .model import ActivationTrace, Model, forward
from .rules import EpsilonRule, GammaRule, Lrp0Rule, ZBoxRule, propagate_max_pool

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RuleAssignment:
    """One propagation rule per parameterized layer index."""

    rules: dict

    def rule_for(self, index):
        try:
            return self.rules[index]
        except KeyError:
            raise InvalidModelError(f"no rule assigned to parameterized layer {index}") from None

    @classmethod
    def uniform(cls, model: Model, rule) -> "RuleAssignment":
        return cls({i: rule for i in model.parameterized_indices})

    @classmethod
    def composite(
        cls,
        model: Model,
        gamma: float = 0.25,
        epsilon: float = 1e-6,
        input_low: float = 0.0,
        input_high: float = 1.0,
    ) -> "RuleAssignment":
        """Default layer-type mapping: box rule on the first parameterized
        layer, gamma on convolutions, epsilon on dense layers."""
        rules = {}
        first = model.parameterized_indices[0]
        for i in model.parameterized_indices:
            if i == first:
                rules[i] = ZBoxRule(low=input_low, high=input_high)
            elif isinstance(model.layers[i], Conv2D):
                rules[i] = GammaRule(gamma=gamma)
            else:
                rules[i] = EpsilonRule(epsilon=epsilon)
        return cls(rules)

    @classmethod
    def lrp0(cls, model: Model) -> "RuleAssignment":
        return cls.uniform(model, Lrp0Rule())


@dataclass
class PruneRecord:
    """Per-layer bookkeeping of one pruned propagation step."""

    layer_index: int
    theta_pos: float
    theta_neg: float
    implied_p_pos: float
    implied_p_neg: float
    pruned_count: int
    undeliverable_columns: int


@dataclass
class RelevanceTrace:
    """Per-layer relevance, aligned with the activation trace.

    ``per_layer[i]`` has the shape of the activation entering layer ``i``;
    the last entry is the one-hot initialization at the winning class and
    ``per_layer[0]`` is the input attribution.
    """

    per_layer: list
    target_class: int
    target_score: float
    prune_records: list = field(default_factory=list)

    @property
    def input_relevance(self) -> np.ndarray:
        return self.per_layer[0]


def initial_relevance(trace: ActivationTrace, num_classes: int) -> np.ndarray:
    r = np.zeros(num_classes, dtype=np.float64)
    r[trace.winning_class] = trace.winning_score
    return r


def propagate_step(layer, in_shape, in_acts, out_relevance, rule):
    """Propagate relevance backward through a single layer."""
    if isinstance(layer, Dense):
        return rule.propagate(layer.weights, in_acts, out_relevance)
    if isinstance(layer, Conv2D):
        u = layer.unfolded(in_shape)
        flat = rule.propagate(u, in_acts.ravel(), out_relevance.ravel())
        return flat.reshape(in_shape)
    if isinstance(layer, ReLU):
        return out_relevance.copy()
    if isinstance(layer, Flatten):
        return out_relevance.reshape(in_shape)
    if isinstance(layer, MaxPool2D):
        return propagate_max_pool(layer.window, layer.stride, in_acts, out_relevance)
    raise InvalidModelError(f"cannot propagate through layer kind {type(layer).__name__!r}")


def explain_lrp(model: Model, x, assignment: RuleAssignment) -> RelevanceTrace:
    """Full backward attribution from the winning class down to the input."""
    trace = forward(model, x)
    return backward_lrp(model, trace, assignment)


def backward_lrp(model: Model, trace: ActivationTrace, assignment: RuleAssignment) -> RelevanceTrace:
    r = initial_relevance(trace, model.num_classes)
    per_layer = [r]
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        rule = assignment.rule_for(i) if is_parameterized(layer) else None
        r = propagate_step(layer, model.layer_input_shape(i), trace.per_layer[i], r, rule)
        per_layer.append(r)
    per_layer.reverse()
    return RelevanceTrace(
        per_layer=per_layer,
        target_class=trace.winning_class,
        target_score=trace.winning_score,
    )


def trace_to_dict(trace: RelevanceTrace) -> dict:
    doc = {
        "formatVersion": TRACE_FORMAT_VERSION,
        "targetClass": trace.target_class,
        "targetScore": trace.target_score,
        "perLayer": [
            {"shape": list(r.shape), "data": r.ravel().tolist()} for r in trace.per_layer
        ],
    }
    if trace.prune_records:
        doc["pruneRecords"] = [
            {
                "layerIndex": rec.layer_index,
                "thetaPos": rec.theta_pos,
                "thetaNeg": rec.theta_neg,
                "impliedPPos": rec.implied_p_pos,
                "impliedPNeg": rec.implied_p_neg,
                "prunedCount": rec.pruned_count,
                "undeliverableColumns": rec.undeliverable_columns,
            }
            for rec in trace.prune_records
        ]
    return doc


def save_trace(trace: RelevanceTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(trace_to_dict(trace), f, allow_nan=False)
        f.write("\n")


def load_trace(path) -> RelevanceTrace:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(
                f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
            ) from e
    if doc.get("formatVersion") != TRACE_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported trace formatVersion {doc.get('formatVersion')!r}")
    per_layer = [
        np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for entry in doc["perLayer"]
    ]
    records = [
        PruneRecord(
            layer_index=rec["layerIndex"],
            theta_pos=rec["thetaPos"],
            theta_neg=rec["thetaNeg"],
            implied_p_pos=rec["impliedPPos"],
            implied_p_neg=rec["impliedPNeg"],
            pruned_count=rec["prunedCount"],
            undeliverable_columns=rec["undeliverableColumns"],
        )
        for rec in doc.get("pruneRecords", [])
    ]
    return RelevanceTrace(
        per_layer=per_layer,
        target_class=int(doc["targetClass"]),
        target_score=float(doc["targetScore"]),
        prune_records=records,
    )
