"""Attribution quality metrics.

Sparsity (Gini index, entropy), localization (relevance mass accuracy),
robustness (sampled local Lipschitz estimate) and faithfulness
(flip-the-most-relevant-features curves with their area under the curve).
All functions are pure; undefined cases either return a defined default
with a RuntimeWarning (all-zero sparsity inputs) or return None where the
metric is genuinely absent.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .util import as_float_array


def gini(r) -> float:
    """Concentration of |r|: 0 for uniform vectors, -> 1 for a single atom.

    Standard discrete form over the ascending-sorted magnitudes
    ``sum_k (2k - n - 1) v_k / (n sum v)``. Permutation-invariant and
    invariant under positive scaling. All-zero input is defined as 0 and
    flagged with a warning.
    """
    v = np.abs(as_float_array(r).ravel())
    total = float(v.sum())
    if total == 0.0:
        warnings.warn("gini of an all-zero vector is defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    v = np.sort(v)
    n = v.size
    k = np.arange(1, n + 1, dtype=np.float64)
    return float(((2.0 * k - n - 1.0) * v).sum() / (n * total))


def entropy(r) -> float:
    """Shannon entropy (natural log) of |r| normalized to a distribution.

    0 for a one-hot vector, ln(n) for a uniform one. All-zero input is
    defined as 0 and flagged with a warning.
    """
    v = np.abs(as_float_array(r).ravel())
    total = float(v.sum())
    if total == 0.0:
        warnings.warn(
            "entropy of an all-zero vector is defined as 0", RuntimeWarning, stacklevel=2
        )
        return 0.0
    p = v[v > 0.0] / total
    return float(-(p * np.log(p)).sum())


def rma(r, mask):
    """Relevance mass accuracy: share of positive relevance inside the mask.

    Computed on the positive part only; negative relevance is ignored.
    Returns None (with a warning) when there is no positive relevance.
    """
    r = as_float_array(r)
    mask = np.asarray(mask, dtype=bool)
    if r.shape != mask.shape:
        raise ValueError(f"relevance shape {r.shape} does not match mask shape {mask.shape}")
    pos = np.maximum(r, 0.0)
    total = float(pos.sum())
    if total == 0.0:
        warnings.warn("relevance mass accuracy undefined without positive relevance", RuntimeWarning, stacklevel=2)
        return None
    return float(pos[mask].sum() / total)


def lipschitz_estimate(explain_fn, x, radius=0.1, n_samples=10, seed=0) -> float:
    """Sampled local Lipschitz estimate of an explanation function.

    Draws ``n_samples`` points uniformly from the Euclidean ball of the
    given radius around ``x`` and returns the largest
    ``||e(x) - e(x')||_2 / ||x - x'||_2``. Deterministic given the seed;
    with a fixed seed the estimate is nondecreasing in ``n_samples``
    because samples are drawn as a common prefix sequence. A draw exactly
    equal to ``x`` is rejected and redrawn.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    x = as_float_array(x)
    rng = np.random.default_rng(seed)
    base = as_float_array(explain_fn(x)).ravel()
    best = 0.0
    d = x.size
    for _ in range(n_samples):
        while True:
            direction = rng.standard_normal(d)
            norm = float(np.linalg.norm(direction))
            if norm == 0.0:
                continue
            dist = radius * rng.random() ** (1.0 / d)
            x_prime = x + (dist / norm) * direction.reshape(x.shape)
            if np.any(x_prime != x):
                break
        other = as_float_array(explain_fn(x_prime)).ravel()
        ratio = float(np.linalg.norm(base - other) / np.linalg.norm((x - x_prime).ravel()))
        best = max(best, ratio)
    return best


@dataclass
class FlipResult:
    """Prediction-decay curve of perturbing features in relevance order."""

    fractions: np.ndarray  # share of input entries perturbed, starts at 0
    scores: np.ndarray  # winning score relative to the unperturbed one, starts at 1
    auc: float

    @property
    def curve(self):
        return list(zip(self.fractions.tolist(), self.scores.tolist()))


def _patch_units(shape, patch_size):
    """Non-overlapping patch index blocks over the trailing H x W axes."""
    c, h, w = shape
    units = []
    for y0 in range(0, h, patch_size):
        for x0 in range(0, w, patch_size):
            units.append((slice(None), slice(y0, min(y0 + patch_size, h)), slice(x0, min(x0 + patch_size, w))))
    return units


def pixel_flip(model, x, relevance, steps, baseline=0.0, patch_size=1):
    """Perturb features in descending relevance order and track the score.

    Features (single entries, or square patches across all channels when
    ``patch_size > 1`` and the input is spatial) are replaced by
    ``baseline`` (a scalar or an array shaped like ``x``), most relevant
    first, ties broken by ascending index. The curve reports the winning
    class score relative to its unperturbed value over the fraction of
    input entries perturbed; the area under it is computed by the
    trapezoid rule over that fraction axis and normalized to the covered
    range, so fewer steps still yield a comparable number. Lower area
    means the top-ranked features really drive the prediction.

    Returns None (with a warning) when the unperturbed winning score is
    not positive, since the relative curve is undefined there.
    """
    x = as_float_array(x)
    relevance = as_float_array(relevance)
    if x.shape != relevance.shape:
        raise ValueError(f"input shape {x.shape} does not match relevance shape {relevance.shape}")
    logits = model.forward_batch(x[None])[0]
    target = int(np.argmax(logits))
    f0 = float(logits[target])
    if f0 <= 0.0:
        warnings.warn(
            "flip curve undefined: unperturbed winning score is not positive",
            RuntimeWarning,
            stacklevel=2,
        )
        return None

    base = np.broadcast_to(np.asarray(baseline, dtype=np.float64), x.shape)
    if patch_size > 1 and x.ndim == 3:
        units = _patch_units(x.shape, patch_size)
    else:
        units = [np.unravel_index(i, x.shape) for i in range(x.size)]
    scores = np.array([float(relevance[u].sum()) for u in units])
    order = np.argsort(-scores, kind="stable")

    steps = min(int(steps), len(units))
    perturbed = [x]
    cur = x.copy()
    fractions = [0.0]
    covered = 0
    for t in range(steps):
        u = units[order[t]]
        covered += cur[u].size
        cur[u] = base[u]
        perturbed.append(cur.copy())
        fractions.append(covered / x.size)
    batch = np.stack(perturbed)
    rel_scores = model.forward_batch(batch)[:, target] / f0
    rel_scores[0] = 1.0
    fractions = np.asarray(fractions)
    if fractions[-1] > 0.0:
        auc = float(np.trapezoid(rel_scores, fractions) / fractions[-1])
    else:
        auc = 1.0
    return FlipResult(fractions=fractions, scores=rel_scores, auc=auc)
