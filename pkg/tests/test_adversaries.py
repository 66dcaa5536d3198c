import json
import math

import numpy as np
import pytest

from sparse_regret.adversaries import (
    AdversaryKind,
    AdversarySpec,
    OutcomeSequence,
    _random_supports,
    default_epsilon,
    generate,
    read_jsonl,
    write_jsonl,
)
from sparse_regret.core import Direction, RngStream, SparseOutcome, sparsity


def spec(kind, d, s, T, seed=0, **kw):
    return AdversarySpec(kind, d, s, T, rng=RngStream(seed), **kw)


def within_four_se(mean, target, n, var):
    return abs(mean - target) <= 4 * math.sqrt(var / n)


# --- validation --------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        spec("random-sparse", 4, 5, 10)
    with pytest.raises(ValueError):
        spec("random-sparse", 4, 0, 10)
    with pytest.raises(ValueError):
        spec("first-s-gains", 4, 2, 10, direction=Direction.LOSS)
    with pytest.raises(ValueError, match="epsilon"):
        spec("bandit-loss-lb", 8, 2, 100, epsilon=0.07)
    with pytest.raises(ValueError):
        spec("bandit-loss-lb", 8, 2, 100, epsilon=-0.01)
    with pytest.raises(ValueError):
        spec("random-sparse", 8, 2, 100, epsilon=0.01)
    with pytest.raises(ValueError):
        spec("random-sparse", 8, 2, 100, ramp=(1, 3))
    with pytest.raises(ValueError):
        spec("full-info-loss-lb", 8, 2, 100, ramp=(1, 2))


def test_default_epsilon():
    assert default_epsilon(2, 10000) == pytest.approx(0.00176776695296636881, rel=1e-14)
    assert default_epsilon(5, 5) == 0.125
    assert default_epsilon(2, 10000) <= 2 / (4 * 8)
    assert spec("bandit-loss-lb", 8, 2, 10000).epsilon == default_epsilon(2, 10000)


# --- generic properties ------------------------------------------------------


@pytest.mark.parametrize("kind", list(AdversaryKind))
def test_every_vector_is_valid_and_sparse(kind):
    seq = generate(spec(kind, 9, 3, 500, seed=4))
    assert len(seq) == 500
    dense = seq.dense()
    assert np.all((dense >= 0) & (dense <= 1))
    assert np.all(np.count_nonzero(dense, axis=1) <= 3)
    for t in (0, 17, 499):
        w = seq[t]
        assert isinstance(w, SparseOutcome) and sparsity(w) <= 3
        np.testing.assert_array_equal(w.to_dense(), dense[t])


@pytest.mark.parametrize("kind", list(AdversaryKind))
def test_generation_is_reproducible(kind):
    a = generate(spec(kind, 9, 3, 300, seed=12))
    b = generate(spec(kind, 9, 3, 300, seed=12))
    c = generate(spec(kind, 9, 3, 300, seed=13))
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.values, b.values)
    assert a == b and a != c


def test_random_supports_are_distinct_and_uniform():
    rng = np.random.default_rng(0)
    T, d, s = 200000, 7, 3
    sup = _random_supports(rng, T, d, s)
    assert np.all(np.sort(sup, axis=1)[:, 1:] != np.sort(sup, axis=1)[:, :-1])
    assert sup.min() >= 0 and sup.max() < d
    counts = np.bincount(sup.ravel(), minlength=d) / T
    p = s / d
    assert np.all(np.abs(counts - p) <= 4 * math.sqrt(p * (1 - p) / T))
    # every position of the draw is itself uniform
    for j in range(s):
        freq = np.bincount(sup[:, j], minlength=d) / T
        assert np.all(np.abs(freq - 1 / d) <= 4 * math.sqrt((1 / d) * (1 - 1 / d) / T))


def test_full_support_draws_are_permutations():
    sup = _random_supports(np.random.default_rng(1), 1000, 5, 5)
    np.testing.assert_array_equal(np.sort(sup, axis=1), np.tile(np.arange(5), (1000, 1)))


def test_first_s_coordinates_gains():
    seq = generate(spec("first-s-gains", 10, 4, 20000, seed=1))
    dense = seq.dense()
    assert seq.direction is Direction.GAIN
    assert np.all(dense[:, 4:] == 0)
    assert set(np.unique(dense)) <= {0.0, 1.0}
    means = dense[:, :4].mean(axis=0)
    assert np.all([within_four_se(m, 0.5, 20000, 0.25) for m in means])


def test_ramp_blocks_have_the_requested_sparsity():
    seq = generate(spec("random-sparse", 20, 8, 400, seed=3, ramp=(1, 2, 5, 8)))
    nnz = np.count_nonzero(seq.dense(), axis=1)
    for block, level in enumerate((1, 2, 5, 8)):
        assert nnz[block * 100 : (block + 1) * 100].max() == level
    zeros = generate(spec("random-sparse", 5, 2, 50, ramp=(0,)))
    assert not zeros.dense().any()


# --- lower-bound constructions -----------------------------------------------


def test_full_info_lower_bound_fair_coins():
    T = 100000
    dense = generate(spec("full-info-loss-lb", 4, 4, T, seed=5)).dense()
    for m in dense.mean(axis=0):
        assert within_four_se(m, 0.5, T, 0.25)


def test_full_info_lower_bound_marginal_mean():
    T, d, s = 100000, 10, 3
    seq = generate(spec("full-info-loss-lb", d, s, T, seed=6))
    p = s / (2 * d)
    for m in seq.dense().mean(axis=0):
        assert within_four_se(m, p, T, p * (1 - p))
    assert "supports" in seq.hidden


def test_bandit_lower_bound_without_bias_is_symmetric():
    T, d, s = 100000, 8, 2
    dense = generate(spec("bandit-loss-lb", d, s, T, seed=7, epsilon=0.0)).dense()
    p = s / (2 * d)
    for m in dense.mean(axis=0):
        assert within_four_se(m, p, T, p * (1 - p))


def test_bandit_lower_bound_biased_arm_marginal():
    T, d, s = 100000, 8, 2
    eps = s / (4 * d)
    seq = generate(spec("bandit-loss-lb", d, s, T, seed=8, epsilon=eps))
    z = seq.hidden["Z"]
    means = seq.dense().mean(axis=0)
    target = s / (2 * d) - eps
    assert target == pytest.approx(0.0625)
    assert within_four_se(means[z], target, T, target * (1 - target))
    other = s / (2 * d)
    for i in np.delete(np.arange(d), z):
        assert within_four_se(means[i], other, T, other * (1 - other))


def test_biased_arm_has_the_smallest_mean():
    d, s, T = 8, 2, 100000
    hits = 0
    trials = 30
    for seed in range(trials):
        seq = generate(spec("bandit-loss-lb", d, s, T, seed=100 + seed, epsilon=s / (4 * d)))
        means = seq.dense().mean(axis=0)
        z = seq.hidden["Z"]
        hits += bool(np.all(means[z] < np.delete(means, z)))
    assert hits / trials >= 0.99


def test_hidden_arm_is_uniform_over_seeds():
    zs = [generate(spec("bandit-loss-lb", 4, 1, 10, seed=k)).hidden["Z"] for k in range(4000)]
    freq = np.bincount(zs, minlength=4) / 4000
    assert np.all(np.abs(freq - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / 4000))


# --- replay files ------------------------------------------------------------


def test_jsonl_round_trip(tmp_path):
    seq = generate(spec("random-sparse", 6, 3, 40, seed=2, ramp=(0, 3)))
    path = tmp_path / "seq.jsonl"
    write_jsonl(seq, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 40
    first = json.loads(lines[-1])
    assert set(first) == {"stage", "dim", "direction", "entries"} and first["stage"] == 40
    back = read_jsonl(path)
    assert back == seq
    np.testing.assert_array_equal(back.dense(), seq.dense())


def test_jsonl_rejects_inconsistent_files(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"stage": 2, "dim": 3, "direction": "loss", "entries": []}\n')
    with pytest.raises(ValueError):
        read_jsonl(path)
    with pytest.raises(OSError, match="bad"):
        write_jsonl(generate(spec("random-sparse", 3, 1, 2)), tmp_path / "missing" / "bad.jsonl")


def test_outcome_sequence_shape_checks():
    with pytest.raises(ValueError):
        OutcomeSequence(3, "loss", np.zeros((2, 2), int), np.zeros((2, 3)))
