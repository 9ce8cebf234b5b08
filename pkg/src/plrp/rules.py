"""Relevance propagation rules for one layer step.

All rules operate on a dense weight matrix ``weights[j, k]`` (edge from
input unit j to output unit k), the input activations of the layer, and
the relevance arriving at the layer outputs. Convolutions are handled by
the same functions through their unfolded dense map. Each output's
relevance is redistributed over the inputs in proportion to the signed
contributions ``a_j * w_jk``, normalized by the net input ``z_k``; the
normalizer deliberately excludes the bias, so every column of the implied
proportion matrix sums to exactly 1 and the layer step conserves total
relevance wherever ``z_k != 0``. Bias terms receive no relevance.

Units with zero activation contribute nothing to any ``z_k`` and therefore
receive exactly zero relevance under every rule here (except the box rule,
whose bound terms are activation-independent by design).
"""

from dataclasses import dataclass

import numpy as np

from .errors import PlrpError, ShapeMismatchError, ZeroDenominatorError


def _check_step_shapes(weights, in_acts, out_relevance):
    if weights.ndim != 2:
        raise ShapeMismatchError(f"weights must be 2-d, got shape {weights.shape}")
    if in_acts.shape != (weights.shape[0],):
        raise ShapeMismatchError(
            f"activations shape {in_acts.shape} does not match {weights.shape[0]} inputs"
        )
    if out_relevance.shape != (weights.shape[1],):
        raise ShapeMismatchError(
            f"relevance shape {out_relevance.shape} does not match {weights.shape[1]} outputs"
        )


def lrp0_matrix(weights, in_acts) -> np.ndarray:
    """Materialize the proportion matrix M[j, k] = a_j w_jk / z_k.

    Columns with zero net input are left all-zero. Intended for small
    layers and test oracles; the propagation functions below never build
    this matrix explicitly.
    """
    _check_step_shapes(weights, in_acts, np.empty(weights.shape[1]))
    z = in_acts @ weights
    contrib = in_acts[:, None] * weights
    safe = np.where(z == 0.0, 1.0, z)
    return np.where(z == 0.0, 0.0, contrib / safe)


def propagate_lrp0(weights, in_acts, out_relevance) -> np.ndarray:
    """Plain proportional redistribution.

    A column with ``z_k == 0`` but nonzero relevance cannot deliver its
    mass; this raises ZeroDenominatorError and the caller should switch to
    the epsilon rule. Zero-relevance columns with zero net input are
    skipped silently. Conserves the relevance total exactly otherwise.
    """
    weights = np.asarray(weights, dtype=np.float64)
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    _check_step_shapes(weights, in_acts, out_relevance)
    z = in_acts @ weights
    dead = z == 0.0
    if np.any(dead & (out_relevance != 0.0)):
        raise ZeroDenominatorError(
            "zero net input with nonzero relevance; use the epsilon rule for this layer"
        )
    s = np.divide(out_relevance, z, out=np.zeros_like(z), where=~dead)
    return in_acts * (weights @ s)


def _stabilizer(z, epsilon, relative):
    if not relative:
        return float(epsilon)
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    return epsilon * (scale if scale > 0.0 else 1.0)


def propagate_epsilon(weights, in_acts, out_relevance, epsilon=1e-6, relative=True) -> np.ndarray:
    """Epsilon-stabilized redistribution.

    The normalizer becomes ``z_k + eps * sign(z_k)`` (sign(0) taken as +1),
    so zero net inputs stay finite. With ``relative=True`` the stabilizer
    scales with the largest |z_k| of the layer. A fraction
    ``eps / (z_k + eps*sign)`` of each column's relevance is absorbed, so
    conservation holds only up to that deficit.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    weights = np.asarray(weights, dtype=np.float64)
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    _check_step_shapes(weights, in_acts, out_relevance)
    z = in_acts @ weights
    eff = _stabilizer(z, epsilon, relative)
    zs = z + np.where(z >= 0.0, eff, -eff)
    return in_acts * (weights @ (out_relevance / zs))


def _exact_proportions(weights, in_acts, out_relevance, fallback_epsilon):
    """Shared exact-normalizer redistribution with a stabilized fallback.

    Columns with ``z_k == 0`` and nonzero relevance are undeliverable:
    their normalizer is replaced by ``fallback_epsilon * max|z|`` and the
    event is counted. Returns ``(in_relevance, undeliverable_columns)``.
    """
    z = in_acts @ weights
    dead = z == 0.0
    undeliverable = int(np.count_nonzero(dead & (out_relevance != 0.0)))
    if np.any(dead):
        scale = float(np.max(np.abs(z)))
        zs = np.where(dead, fallback_epsilon * (scale if scale > 0.0 else 1.0), z)
    else:
        zs = z
    s = out_relevance / zs
    return in_acts * (weights @ s), undeliverable


def propagate_gamma(weights, in_acts, out_relevance, gamma=0.25, fallback_epsilon=1e-9):
    """Redistribution with positively tilted weights w + gamma * max(w, 0).

    gamma = 0 reduces exactly to the plain rule. Columns that still end up
    with a zero normalizer fall back to a tiny stabilizer (documented via
    ``fallback_epsilon``) instead of raising.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    weights = np.asarray(weights, dtype=np.float64)
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    _check_step_shapes(weights, in_acts, out_relevance)
    tilted = weights + gamma * np.maximum(weights, 0.0)
    return _exact_proportions(tilted, in_acts, out_relevance, fallback_epsilon)[0]


def propagate_zbox(weights, in_acts, out_relevance, low=0.0, high=1.0, fallback_epsilon=1e-9):
    """Box rule for the input layer with entries bounded in [low, high].

    Contribution of input j to output k is
    ``x_j w_jk - low_j max(w,0)_jk - high_j min(w,0)_jk``; the normalizer is
    the column sum of these, which is nonnegative whenever the input lies
    inside the box. Columns sum to 1 exactly, so the step conserves mass on
    non-degenerate columns.
    """
    weights = np.asarray(weights, dtype=np.float64)
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    _check_step_shapes(weights, in_acts, out_relevance)
    lo = np.broadcast_to(np.asarray(low, dtype=np.float64), in_acts.shape)
    hi = np.broadcast_to(np.asarray(high, dtype=np.float64), in_acts.shape)
    if not np.all(lo < hi):
        raise ValueError("box rule requires low < high everywhere")
    if np.any(in_acts < lo) or np.any(in_acts > hi):
        raise ValueError("input lies outside the [low, high] box")
    wp = np.maximum(weights, 0.0)
    wn = np.minimum(weights, 0.0)
    z = in_acts @ weights - lo @ wp - hi @ wn
    dead = z == 0.0
    if np.any(dead):
        scale = float(np.max(np.abs(z)))
        z = np.where(dead, fallback_epsilon * (scale if scale > 0.0 else 1.0), z)
    s = out_relevance / z
    return in_acts * (weights @ s) - lo * (wp @ s) - hi * (wn @ s)


def propagate_max_pool(window, stride, in_acts, out_relevance) -> np.ndarray:
    """Winner-take-all routing for max pooling.

    Each output's relevance goes entirely to the maximum position of its
    window; exact ties share it equally. Routing partitions every output's
    mass, so the step conserves the total.
    """
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    wh, ww = window
    sh, sw = stride
    c, oh, ow = out_relevance.shape
    r_in = np.zeros_like(in_acts)
    for oy in range(oh):
        for ox in range(ow):
            y0, x0 = oy * sh, ox * sw
            win = in_acts[:, y0 : y0 + wh, x0 : x0 + ww]
            m = win.max(axis=(1, 2))
            mask = win == m[:, None, None]
            share = out_relevance[:, oy, ox] / mask.sum(axis=(1, 2))
            r_in[:, y0 : y0 + wh, x0 : x0 + ww] += mask * share[:, None, None]
    return r_in


def propagate_pruned_matrix(weights, in_acts, out_relevance, keep_mask, fallback_epsilon=1e-9):
    """Plain-rule redistribution with masked activations.

    Activations outside ``keep_mask`` are zeroed before the proportions are
    formed, so masked units receive exactly zero relevance and the pruned
    mass flows to the surviving units in the usual proportions. A column
    whose entire support was masked away cannot deliver nonzero relevance;
    such columns use the stabilized fallback normalizer and are counted.

    Returns ``(in_relevance, undeliverable_columns)``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    in_acts = np.asarray(in_acts, dtype=np.float64)
    out_relevance = np.asarray(out_relevance, dtype=np.float64)
    keep_mask = np.asarray(keep_mask, dtype=bool)
    _check_step_shapes(weights, in_acts, out_relevance)
    if keep_mask.shape != in_acts.shape:
        raise ShapeMismatchError(
            f"keep mask shape {keep_mask.shape} does not match activations {in_acts.shape}"
        )
    a_hat = np.where(keep_mask, in_acts, 0.0)
    return _exact_proportions(weights, a_hat, out_relevance, fallback_epsilon)


@dataclass(frozen=True)
class Lrp0Rule:
    """Plain proportional rule."""

    name = "lrp0"

    def propagate(self, weights, in_acts, out_relevance):
        return propagate_lrp0(weights, in_acts, out_relevance)

    def propagate_masked(self, weights, in_acts, out_relevance, keep_mask, fallback_epsilon):
        return propagate_pruned_matrix(weights, in_acts, out_relevance, keep_mask, fallback_epsilon)


@dataclass(frozen=True)
class EpsilonRule:
    """Epsilon-stabilized rule; the stabilizer absorbs undeliverable mass."""

    epsilon: float = 1e-6
    relative: bool = True
    name = "epsilon"

    def propagate(self, weights, in_acts, out_relevance):
        return propagate_epsilon(weights, in_acts, out_relevance, self.epsilon, self.relative)

    def propagate_masked(self, weights, in_acts, out_relevance, keep_mask, fallback_epsilon):
        a_hat = np.where(np.asarray(keep_mask, dtype=bool), in_acts, 0.0)
        return self.propagate(weights, a_hat, out_relevance), 0


@dataclass(frozen=True)
class GammaRule:
    """Positively tilted rule, typically assigned to convolutional layers."""

    gamma: float = 0.25
    fallback_epsilon: float = 1e-9
    name = "gamma"

    def propagate(self, weights, in_acts, out_relevance):
        return propagate_gamma(weights, in_acts, out_relevance, self.gamma, self.fallback_epsilon)

    def propagate_masked(self, weights, in_acts, out_relevance, keep_mask, fallback_epsilon):
        tilted = weights + self.gamma * np.maximum(weights, 0.0)
        a_hat = np.where(np.asarray(keep_mask, dtype=bool), in_acts, 0.0)
        return _exact_proportions(tilted, a_hat, out_relevance, fallback_epsilon)


@dataclass(frozen=True)
class ZBoxRule:
    """Box rule for the first parameterized layer; never part of a pruned step."""

    low: float = 0.0
    high: float = 1.0
    name = "zbox"

    def propagate(self, weights, in_acts, out_relevance):
        return propagate_zbox(weights, in_acts, out_relevance, self.low, self.high)

    def propagate_masked(self, weights, in_acts, out_relevance, keep_mask, fallback_epsilon):
        raise PlrpError("the box rule serves the input step, which is never pruned")
