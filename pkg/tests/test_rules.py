import numpy as np
import pytest

from plrp.errors import ZeroDenominatorError
from plrp.rules import (
    lrp0_matrix,
    propagate_epsilon,
    propagate_gamma,
    propagate_lrp0,
    propagate_max_pool,
    propagate_zbox,
)


def _random_layer(rng, m=8, n=6, nonneg_acts=True, zero_frac=0.0):
    w = rng.standard_normal((m, n))
    a = np.abs(rng.standard_normal(m)) if nonneg_acts else rng.standard_normal(m)
    if zero_frac:
        a[rng.random(m) < zero_frac] = 0.0
    r = rng.standard_normal(n)
    return w, a, r


def test_lrp0_hand_example():
    w = np.array([[1.0, 0.0], [1.0, 1.0]])  # columns (1,1) and (0,1)
    a = np.array([1.0, 1.0])
    r = np.array([2.0, 1.0])
    out = propagate_lrp0(w, a, r)
    assert np.allclose(out, [1.0, 2.0], atol=1e-12)
    # cross-check against the explicit proportion matrix
    m = lrp0_matrix(w, a)
    assert np.allclose(m @ r, out, atol=1e-12)


def test_lrp0_zero_activation_gets_zero_relevance():
    rng = np.random.default_rng(0)
    w, a, r = _random_layer(rng, zero_frac=0.4)
    out = propagate_lrp0(w, a, r)
    assert np.all(out[a == 0.0] == 0.0)


def test_lrp0_conservation_exact():
    rng = np.random.default_rng(1)
    for _ in range(50):
        w, a, r = _random_layer(rng, m=12, n=9)
        out = propagate_lrp0(w, a, r)
        assert abs(out.sum() - r.sum()) <= 1e-9 * max(1.0, abs(r.sum()))


def test_lrp0_zero_denominator_instructs_epsilon():
    w = np.array([[1.0], [-1.0]])
    a = np.array([1.0, 1.0])  # z = 0
    with pytest.raises(ZeroDenominatorError, match="epsilon"):
        propagate_lrp0(w, a, np.array([1.0]))
    # zero relevance on the dead column is allowed
    assert np.array_equal(propagate_lrp0(w, a, np.array([0.0])), [0.0, 0.0])


def test_lrp0_matrix_columns_normalized():
    rng = np.random.default_rng(2)
    w, a, _ = _random_layer(rng, m=16, n=12)
    m = lrp0_matrix(w, a)
    assert np.allclose(m.sum(axis=0), 1.0, atol=1e-12)


def test_epsilon_limit_matches_lrp0():
    rng = np.random.default_rng(3)
    w, a, r = _random_layer(rng)
    base = propagate_lrp0(w, a, r)
    eps = propagate_epsilon(w, a, r, epsilon=1e-14)
    assert np.allclose(eps, base, atol=1e-9)


def test_epsilon_handles_zero_net_input():
    w = np.array([[1.0], [-1.0]])
    a = np.array([1.0, 1.0])
    out = propagate_epsilon(w, a, np.array([1.0]), epsilon=1e-6)
    assert np.all(np.isfinite(out))


def test_epsilon_conservation_deficit_identity_and_bound():
    rng = np.random.default_rng(4)
    eps = 1e-4
    for _ in range(20):
        w, a, r = _random_layer(rng, m=10, n=7)
        z = a @ w
        w = w * (1.5 / np.abs(z).min())  # now every |z_k| >= 1.5
        z = a @ w
        out = propagate_epsilon(w, a, r, epsilon=eps, relative=False)
        deficit = r.sum() - out.sum()
        stab = np.where(z >= 0, eps, -eps)
        predicted = (r * stab / (z + stab)).sum()
        assert abs(deficit - predicted) <= 1e-12 * max(1.0, abs(r.sum()))
        assert abs(deficit) <= eps * r.size * np.abs(r).max()


def test_gamma_zero_equals_lrp0():
    rng = np.random.default_rng(5)
    w, a, r = _random_layer(rng)
    assert np.array_equal(propagate_gamma(w, a, r, gamma=0.0), propagate_lrp0(w, a, r))


def test_gamma_all_negative_weights_equals_lrp0():
    rng = np.random.default_rng(6)
    w = -np.abs(rng.standard_normal((6, 4)))
    a = np.abs(rng.standard_normal(6))
    r = rng.standard_normal(4)
    assert np.allclose(propagate_gamma(w, a, r, gamma=0.7), propagate_lrp0(w, a, r), atol=1e-12)


def test_gamma_conservation():
    rng = np.random.default_rng(7)
    for _ in range(20):
        w, a, r = _random_layer(rng, m=9, n=5)
        out = propagate_gamma(w, a, r, gamma=0.25)
        assert abs(out.sum() - r.sum()) <= 1e-6 * max(1.0, abs(r.sum()))


def test_zbox_one_hot_input_finite_and_conserving():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((8, 5))
    x = np.zeros(8)
    x[[0, 3, 6]] = 1.0  # binary input inside [0, 1]
    r = rng.standard_normal(5)
    out = propagate_zbox(w, x, r, low=0.0, high=1.0)
    assert np.all(np.isfinite(out))
    assert abs(out.sum() - r.sum()) <= 1e-6 * max(1.0, abs(r.sum()))


def test_zbox_random_instance_preserves_sums():
    rng = np.random.default_rng(9)
    for _ in range(20):
        w = rng.standard_normal((7, 4))
        x = rng.random(7)
        r = rng.standard_normal(4)
        out = propagate_zbox(w, x, r, low=0.0, high=1.0)
        assert abs(out.sum() - r.sum()) <= 1e-6 * max(1.0, abs(r.sum()))


def test_zbox_degenerate_bounds_rejected():
    with pytest.raises(ValueError, match="low < high"):
        propagate_zbox(np.ones((2, 1)), np.zeros(2), np.ones(1), low=1.0, high=1.0)


def test_zbox_input_outside_box_rejected():
    with pytest.raises(ValueError, match="outside"):
        propagate_zbox(np.ones((2, 1)), np.array([0.5, 1.5]), np.ones(1), low=0.0, high=1.0)


def test_max_pool_unique_winner_takes_all():
    acts = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    out_rel = np.array([[[10.0]]])
    r = propagate_max_pool((2, 2), (2, 2), acts, out_rel)
    assert np.array_equal(r, [[[0.0, 0.0], [0.0, 10.0]]])


def test_max_pool_tie_split_equally():
    acts = np.ones((1, 2, 2))
    r = propagate_max_pool((2, 2), (2, 2), acts, np.array([[[8.0]]]))
    assert np.array_equal(r, [[[2.0, 2.0], [2.0, 2.0]]])


def test_max_pool_conserves():
    rng = np.random.default_rng(10)
    acts = rng.standard_normal((3, 6, 8))
    out_rel = rng.standard_normal((3, 3, 4))
    r = propagate_max_pool((2, 2), (2, 2), acts, out_rel)
    assert abs(r.sum() - out_rel.sum()) <= 1e-12 * max(1.0, abs(out_rel.sum()))
