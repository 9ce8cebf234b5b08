import math

import numpy as np
import pytest

from plrp.datagen import gen_genome_dataset
from plrp.errors import EmptySupportError
from plrp.lrp import RuleAssignment, explain_lrp
from plrp.presets import GENOME_MOTIFS, genome_cnn
from plrp.pruning import (
    PruningConfig,
    explain_plrp,
    prune_lambda,
    propagate_pruned_matrix,
    split_signs,
    threshold_for_gain,
    threshold_for_mass,
)
from plrp.rules import Lrp0Rule, propagate_lrp0
from plrp.training import train_sgd


def brute_force_threshold(r, p):
    """Exhaustive search over ascending prefix sums, honoring tie groups."""
    values = sorted(float(v) for v in r)
    total = sum(values)
    if total == 0.0:
        return 0.0
    best = 0.0
    for candidate in sorted(set(values)):
        pruned = sum(v for v in values if v <= candidate)
        if pruned <= p * total and candidate < max(values):
            best = max(best, candidate)
    return best


# ---------------------------------------------------------------------------
# sign split


def test_split_signs_examples():
    pos, neg = split_signs(np.array([1.0, -2.0, 0.0]))
    assert np.array_equal(pos, [1.0, 0.0, 0.0])
    assert np.array_equal(neg, [0.0, 2.0, 0.0])


def test_split_signs_all_positive():
    r = np.array([0.5, 1.5])
    pos, neg = split_signs(r)
    assert np.array_equal(pos, r)
    assert np.array_equal(neg, np.zeros(2))


def test_split_signs_recombination_exact():
    rng = np.random.default_rng(0)
    r = rng.standard_normal(64)
    pos, neg = split_signs(r)
    assert np.array_equal(pos - neg, r)
    assert np.all((pos == 0) | (neg == 0))


# ---------------------------------------------------------------------------
# mass threshold


def test_threshold_for_mass_worked_example():
    res = threshold_for_mass(np.array([0.1, 0.2, 0.3, 0.4]), 0.25)
    assert res.theta == 0.1
    assert np.array_equal(res.pruned_indices, [0])
    kept = 1.0 - res.pruned_mass
    assert kept >= 0.75 * res.total_mass


def test_threshold_for_mass_empty_set_gives_zero():
    res = threshold_for_mass(np.array([0.1, 0.2, 0.3, 0.4]), 0.05)
    assert res.theta == 0.0
    assert res.pruned_indices.size == 0


def test_threshold_for_mass_p_zero_identity():
    res = threshold_for_mass(np.array([0.5, 0.2, 0.3]), 0.0)
    assert res.theta == 0.0 and res.implied_p == 0.0


def test_threshold_for_mass_ties_keep_mass_guarantee():
    res = threshold_for_mass(np.ones(4), 0.25)
    assert res.theta == 0.0  # pruning any tied entry would prune all of them


def test_threshold_for_mass_rejects_bad_input():
    with pytest.raises(ValueError):
        threshold_for_mass(np.array([-0.1, 0.2]), 0.1)
    with pytest.raises(ValueError):
        threshold_for_mass(np.array([0.1]), 1.0)


def test_threshold_matches_brute_force_on_random_vectors():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 13))
        r = rng.random(n) * rng.choice([0.1, 1.0, 10.0])
        if rng.random() < 0.3:
            r[rng.random(n) < 0.4] = 0.0
        if rng.random() < 0.3:
            r = np.round(r, 1)  # force ties
        for p in np.arange(0.0, 0.95, 0.1):
            res = threshold_for_mass(r, float(p))
            assert res.theta == brute_force_threshold(r, float(p))
            assert res.pruned_mass <= p * res.total_mass
            kept = math.fsum(r[r > res.theta])
            # 1e-12 relative slack covers summation rounding only
            assert kept >= (1.0 - p) * res.total_mass - 1e-12 * res.total_mass


# ---------------------------------------------------------------------------
# sparsity gain


def test_threshold_for_gain_worked_example():
    res = threshold_for_gain(np.array([1.0, 2.0, 3.0, 4.0]), 1.0)
    assert res.theta == 2.0
    assert abs(res.implied_p - 0.3) < 1e-15
    assert np.allclose(res.gains, [2.5, 1.25, 10.0 / 12.0, 0.625])


def test_threshold_for_gain_huge_min_gain_prunes_nothing():
    res = threshold_for_gain(np.array([1.0, 2.0, 3.0]), 1e12)
    assert res.theta == 0.0 and res.pruned_indices.size == 0


def test_threshold_for_gain_never_empties_the_vector():
    res = threshold_for_gain(np.ones(4), 1e-9)
    assert res.theta == 0.0  # the maximal tie group survives


def test_threshold_for_gain_all_zero_identity():
    res = threshold_for_gain(np.zeros(5), 1.0)
    assert res.theta == 0.0 and res.implied_p == 0.0


def test_gain_sequence_monotone_on_random_vectors():
    rng = np.random.default_rng(2)
    for _ in range(200):
        r = rng.random(int(rng.integers(1, 40)))
        res = threshold_for_gain(r, 1.0)
        assert np.all(np.diff(res.gains) <= 0)


# ---------------------------------------------------------------------------
# lambda redistribution


def test_prune_lambda_worked_example():
    out = prune_lambda(np.array([0.1, 0.2, 0.3, 0.4]), 0.1)
    assert np.allclose(out, [0.0, 0.2 / 0.9, 0.3 / 0.9, 0.4 / 0.9], atol=1e-15)
    assert abs(out.sum() - 1.0) <= 1e-12


def test_prune_lambda_theta_zero_is_identity():
    r = np.array([0.0, 0.3, 0.7])
    assert np.array_equal(prune_lambda(r, 0.0), r)


def test_prune_lambda_empty_support_raises():
    with pytest.raises(EmptySupportError):
        prune_lambda(np.array([0.1, 0.2]), 0.5)


def test_prune_lambda_zero_vector_is_identity():
    assert np.array_equal(prune_lambda(np.zeros(3), 0.0), np.zeros(3))


def test_prune_lambda_preserves_sign_and_support():
    rng = np.random.default_rng(3)
    for _ in range(100):
        r = np.abs(rng.standard_normal(30))
        res = threshold_for_mass(r, float(rng.uniform(0, 0.9)))
        out = prune_lambda(r, res.theta)
        assert np.all(out >= 0.0)
        assert np.all(out[r <= res.theta] == 0.0)


# ---------------------------------------------------------------------------
# matrix redistribution


def test_pruned_matrix_worked_example():
    w = np.array([[1.0, 0.0], [1.0, 1.0]])
    a = np.array([1.0, 1.0])
    r = np.array([2.0, 1.0])
    out, undeliverable = propagate_pruned_matrix(w, a, r, np.array([False, True]))
    assert np.array_equal(out, [0.0, 3.0])
    assert undeliverable == 0
    assert out.sum() == r.sum()


def test_pruned_matrix_all_true_equals_lrp0():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((10, 6))
    a = np.abs(rng.standard_normal(10))
    r = rng.standard_normal(6)
    out, undeliverable = propagate_pruned_matrix(w, a, r, np.ones(10, dtype=bool))
    assert undeliverable == 0
    assert np.allclose(out, propagate_lrp0(w, a, r), atol=1e-12)


def test_pruned_matrix_masked_units_get_exact_zero():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((12, 5))
    a = np.abs(rng.standard_normal(12))
    r = rng.standard_normal(5)
    keep = rng.random(12) > 0.5
    out, _ = propagate_pruned_matrix(w, a, r, keep)
    assert np.all(out[~keep] == 0.0)


def test_pruned_matrix_counts_undeliverable_columns():
    w = np.array([[1.0, 1.0], [0.0, 1.0]])
    a = np.array([1.0, 1.0])
    r = np.array([1.0, 1.0])
    # masking unit 0 empties column 0's support (unit 1 has weight 0 there)
    out, undeliverable = propagate_pruned_matrix(w, a, r, np.array([False, True]))
    assert undeliverable == 1
    assert np.all(np.isfinite(out))


# ---------------------------------------------------------------------------
# whole-model pruned attribution


@pytest.fixture(scope="module")
def genome_setup():
    ds = gen_genome_dataset(320, GENOME_MOTIFS, seed=7)
    model = genome_cnn(filters=4, seed=1)
    trained = train_sgd(model, (ds.inputs[:256], ds.labels[:256]), epochs=6,
                        learning_rate=0.3, seed=3)
    return ds, trained


def test_p_zero_trace_identical_to_lrp(genome_setup):
    ds, model = genome_setup
    assignment = RuleAssignment.composite(model)
    base = explain_lrp(model, ds.inputs[300], assignment)
    for variant in ("lambda", "matrix"):
        config = PruningConfig(variant=variant, mode="fixed", p=0.0)
        pruned = explain_plrp(model, ds.inputs[300], assignment, config)
        assert all(np.array_equal(a, b) for a, b in zip(base.per_layer, pruned.per_layer))
        assert pruned.prune_records == []


def test_pruned_support_shrinks_on_motif_samples(genome_setup):
    ds, model = genome_setup
    assignment = RuleAssignment.composite(model)
    config = PruningConfig(variant="lambda", mode="fixed", p=0.25)
    shrank = 0
    for i in range(300, 310):
        base = explain_lrp(model, ds.inputs[i], assignment)
        pruned = explain_plrp(model, ds.inputs[i], assignment, config)
        n0 = np.count_nonzero(base.input_relevance)
        n1 = np.count_nonzero(pruned.input_relevance)
        assert n1 <= n0
        shrank += n1 < n0
    assert shrank >= 9  # strictly fewer nonzeros on essentially every sample


def test_lambda_trace_total_matches_baseline_with_exact_rules(genome_setup):
    ds, model = genome_setup
    # assignment without the epsilon rule so every step conserves exactly
    assignment = RuleAssignment.composite(model)
    rules = dict(assignment.rules)
    for i, rule in rules.items():
        if type(rule).__name__ == "EpsilonRule":
            rules[i] = Lrp0Rule()
    exact = RuleAssignment(rules)
    config = PruningConfig(variant="lambda", mode="fixed", p=0.35)
    for i in range(300, 305):
        base = explain_lrp(model, ds.inputs[i], exact)
        pruned = explain_plrp(model, ds.inputs[i], exact, config)
        ref = base.input_relevance.sum()
        assert abs(pruned.input_relevance.sum() - ref) <= 1e-9 * max(1.0, abs(ref))


def test_prune_records_are_reported(genome_setup):
    ds, model = genome_setup
    assignment = RuleAssignment.composite(model)
    config = PruningConfig(variant="lambda", mode="fixed", p=0.3)
    trace = explain_plrp(model, ds.inputs[300], assignment, config)
    # two prunable parameterized layers in this model (the conv step is last)
    assert [rec.layer_index for rec in trace.prune_records] == [4, 6]
    for rec in trace.prune_records:
        assert 0.0 <= rec.implied_p_pos <= 0.3 + 1e-12
        assert 0.0 <= rec.implied_p_neg <= 0.3 + 1e-12
        assert rec.theta_pos >= 0.0 and rec.theta_neg >= 0.0


def test_gain_mode_runs_and_reports_implied_p(genome_setup):
    ds, model = genome_setup
    assignment = RuleAssignment.composite(model)
    config = PruningConfig(variant="lambda", mode="gain", min_gain=1.0)
    trace = explain_plrp(model, ds.inputs[301], assignment, config)
    assert trace.prune_records
    for rec in trace.prune_records:
        assert 0.0 <= rec.implied_p_pos < 1.0


def test_matrix_variant_zeroes_thresholded_units(genome_setup):
    ds, model = genome_setup
    assignment = RuleAssignment.composite(model)
    base = explain_lrp(model, ds.inputs[302], assignment)
    config = PruningConfig(variant="matrix", mode="fixed", p=0.4)
    pruned = explain_plrp(model, ds.inputs[302], assignment, config)
    assert np.count_nonzero(pruned.input_relevance) < np.count_nonzero(base.input_relevance)


def test_per_sign_overrides_and_per_layer_p():
    config = PruningConfig(p=0.2, p_pos=0.5, p_per_layer={4: 0.1})
    assert config.sign_p(4, positive=True) == 0.5  # sign override wins
    assert config.sign_p(4, positive=False) == 0.1  # per-layer base
    assert config.sign_p(6, positive=False) == 0.2  # global default


def test_config_validation():
    with pytest.raises(ValueError):
        PruningConfig(p=1.0)
    with pytest.raises(ValueError):
        PruningConfig(variant="other")
    with pytest.raises(ValueError):
        PruningConfig(min_gain=0.0)
    with pytest.raises(ValueError):
        PruningConfig(last_step_unpruned=False)


def test_config_file_round_trip(tmp_path):
    from plrp.pruning import load_config, save_config

    config = PruningConfig(variant="matrix", mode="gain", p=0.2, p_pos=0.4,
                           min_gain=2.0, p_per_layer={3: 0.1})
    path = tmp_path / "config.json"
    save_config(config, path)
    assert load_config(path) == config
