"""Similarity score law and the composite objective against brute-force oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from protocite.loss import (
    ClassifierHead,
    LossWeights,
    NonFiniteLossError,
    PrototypeBank,
    d_preced,
    d_provis,
    similarity_score,
    total_loss,
)


def _score_at_d2(d2: float, epsilon: float) -> float:
    """Place two vectors exactly d2 apart and score them."""
    return similarity_score(np.array([math.sqrt(d2), 0.0]), np.array([0.0, 0.0]), epsilon)


def test_score_at_zero_distance():
    h = np.array([0.3, -0.4, 0.5])
    got = similarity_score(h, h, 1e-4)
    assert got == pytest.approx(2.0 * math.log(1e4), abs=1e-9)
    assert got == pytest.approx(18.4207, abs=1e-3)


def test_score_at_unit_distance():
    assert _score_at_d2(1.0, 1e-4) == pytest.approx(2.0 * math.log(2.0 / 1.0001), abs=1e-9)
    assert _score_at_d2(1.0, 1e-4) == pytest.approx(1.3861, abs=1e-3)


def test_score_vanishes_at_large_distance():
    assert _score_at_d2(1e9, 1e-4) < 1e-6


def test_score_strictly_decreasing_on_grid():
    grid = np.sort(np.random.default_rng(0).uniform(0.0, 50.0, size=200))
    scores = [_score_at_d2(d2, 1e-2) for d2 in grid]
    assert all(a > b for a, b in zip(scores, scores[1:]))
    assert all(s >= 0.0 for s in scores)


@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=1e-3, max_value=100.0),
    st.sampled_from([1e-4, 1e-2, 0.5]),
)
def test_score_monotone_property(d2, gap, epsilon):
    assert _score_at_d2(d2, epsilon) > _score_at_d2(d2 + gap, epsilon)


def test_score_rejects_bad_epsilon_and_shapes():
    with pytest.raises(ValueError):
        similarity_score(np.zeros(2), np.zeros(2), 1.5)
    with pytest.raises(ValueError):
        similarity_score(np.zeros(2), np.zeros(3), 1e-4)


# -- precedent term ---------------------------------------------------------------


def _unit(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _bank(prec, plabels, prov=None, vlabels=None, dim=None):
    dim = dim or prec.shape[1]
    prov = prov if prov is not None else np.zeros((0, dim))
    vlabels = vlabels if vlabels is not None else np.zeros(0, dtype=np.int64)
    return PrototypeBank(np.asarray(prec, float), np.asarray(plabels), np.asarray(prov, float), np.asarray(vlabels))


def test_pull_term_zero_when_on_own_prototype():
    prec = _unit([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    bank = _bank(prec, [0, 1, 2])
    emb = prec.copy()
    labels = np.eye(3, dtype=np.uint8)
    weights = LossWeights(lambda2=0.0, lambda3=0.0)
    value, _ = d_preced(emb, labels, bank, weights)
    assert value == 0.0


def test_separation_hinge_inactive_for_orthogonal_pairs():
    prec = _unit([[1, 0, 0], [0, 1, 0]])
    bank = _bank(prec, [0, 0])  # same class, mutually orthogonal
    emb = _unit([[1, 1, 1]])
    labels = np.array([[1]], dtype=np.uint8)
    weights = LossWeights(lambda1=0.0, lambda2=0.0, lambda3=5.0, s_max=0.3)
    value, _ = d_preced(emb, labels, bank, weights)
    assert value == 0.0


def _brute_force_preced(emb, labels, prec, plabels, w):
    n = len(emb)
    own_total, other_total = 0.0, 0.0
    for i in range(n):
        own = [float(np.sum((emb[i] - p) ** 2)) for j, p in enumerate(prec) if labels[i, plabels[j]]]
        other = [float(np.sum((emb[i] - p) ** 2)) for j, p in enumerate(prec) if not labels[i, plabels[j]]]
        if own:
            own_total += min(own)
        if other:
            other_total += min(other)
    hinge = 0.0
    for k in set(plabels):
        members = [j for j in range(len(prec)) if plabels[j] == k]
        for a in members:
            for b in members:
                if a == b:
                    continue
                cos = float(prec[a] @ prec[b]) / (np.linalg.norm(prec[a]) * np.linalg.norm(prec[b]))
                hinge += max(0.0, cos - w.s_max)
    return w.lambda1 * own_total / n - w.lambda2 * other_total / n + w.lambda3 * hinge


def test_preced_matches_exhaustive_oracle():
    rng = np.random.default_rng(12)
    emb = _unit(rng.normal(size=(4, 5)))
    prec = _unit(rng.normal(size=(3, 5)))
    plabels = [0, 0, 1]
    labels = np.array([[1, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)
    weights = LossWeights(lambda1=0.3, lambda2=0.07, lambda3=0.5, s_max=-0.2)
    value, _ = d_preced(emb, labels, _bank(prec, plabels), weights)
    assert value == pytest.approx(_brute_force_preced(emb, labels, prec, plabels, weights), abs=1e-12)


def test_preced_skips_samples_without_own_prototypes():
    prec = _unit([[1, 0]])
    bank = _bank(prec, [0])
    emb = _unit([[0, 1], [1, 1]])
    labels = np.array([[0, 1], [1, 0]], dtype=np.uint8)[:, :2]
    weights = LossWeights(lambda2=0.0, lambda3=0.0)
    value, diag = d_preced(emb, labels, bank, weights)
    assert diag["skipped_own"] == [0]
    expected = weights.lambda1 * float(np.sum((emb[1] - prec[0]) ** 2)) / 2
    assert value == pytest.approx(expected, abs=1e-12)


def test_hinge_invariant_to_prototype_scaling():
    rng = np.random.default_rng(3)
    prec = _unit(rng.normal(size=(4, 6)))
    plabels = [0, 0, 0, 1]
    emb = _unit(rng.normal(size=(2, 6)))
    labels = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    weights = LossWeights(lambda1=0.0, lambda2=0.0, lambda3=1.0, s_max=-0.9)
    base, _ = d_preced(emb, labels, _bank(prec, plabels), weights)
    scaled = prec.copy()
    scaled[[0, 1, 2]] *= 3.0  # rescale one class
    after, _ = d_preced(emb, labels, _bank(scaled, plabels), weights)
    assert after == pytest.approx(base, abs=1e-12)


# -- provision term ----------------------------------------------------------------


def test_provis_zero_on_own_provision():
    prov = _unit([[1, 0], [0, 1]])
    bank = _bank(np.zeros((0, 2)), [], prov, [0, 1])
    labels = np.eye(2, dtype=np.uint8)
    value, _ = d_provis(prov.copy(), labels, bank)
    assert value == 0.0


def test_provis_single_label_mean_of_distances():
    rng = np.random.default_rng(1)
    prov = _unit(rng.normal(size=(3, 4)))
    emb = _unit(rng.normal(size=(5, 4)))
    labels = np.zeros((5, 3), dtype=np.uint8)
    picks = [0, 2, 1, 0, 2]
    for i, l in enumerate(picks):
        labels[i, l] = 1
    value, _ = d_provis(emb, labels, _bank(np.zeros((0, 4)), [], prov, [0, 1, 2]))
    expected = np.mean([np.sum((emb[i] - prov[l]) ** 2) for i, l in enumerate(picks)])
    assert value == pytest.approx(expected, abs=1e-12)


def test_provis_takes_min_over_positive_labels_not_sum():
    prov = np.array([[1.0, 0.0], [0.0, 1.0]])
    emb = np.array([[0.9, 0.1]])
    labels = np.array([[1, 1]], dtype=np.uint8)
    value, _ = d_provis(emb, labels, _bank(np.zeros((0, 2)), [], prov, [0, 1]))
    d_to_0 = float(np.sum((emb[0] - prov[0]) ** 2))
    d_to_1 = float(np.sum((emb[0] - prov[1]) ** 2))
    assert value == pytest.approx(min(d_to_0, d_to_1), abs=1e-15)
    assert value < d_to_0 + d_to_1


def test_provis_unlabeled_sample_contributes_zero():
    prov = _unit([[1, 0]])
    emb = _unit([[0, 1], [1, 0]])
    labels = np.array([[0], [1]], dtype=np.uint8)
    value, diag = d_provis(emb, labels, _bank(np.zeros((0, 2)), [], prov, [0]))
    assert diag["skipped_unlabeled"] == [0]
    assert value == pytest.approx(0.0, abs=1e-15)


# -- composite ----------------------------------------------------------------------


def _random_setup(seed, batch=6, n=3, k=2, dim=5):
    rng = np.random.default_rng(seed)
    emb = _unit(rng.normal(size=(batch, dim)))
    labels = (rng.random((batch, n)) < 0.5).astype(np.uint8)
    labels[0] = 1  # guarantee positives somewhere
    prec = _unit(rng.normal(size=(n * k, dim)))
    plabels = np.repeat(np.arange(n), k)
    prov = _unit(rng.normal(size=(n, dim)))
    bank = _bank(prec, plabels, prov, np.arange(n))
    head = ClassifierHead(rng.normal(0, 0.4, size=(n, n * k + n)), rng.normal(0, 0.1, size=n))
    return emb, labels, bank, head


def test_zero_head_gives_log2_bce():
    emb, labels, bank, _ = _random_setup(0)
    head = ClassifierHead.zeros(3, bank.n_features_all)
    total, breakdown = total_loss(emb, labels, bank, head, LossWeights())
    assert breakdown["bce"] == pytest.approx(math.log(2.0), abs=1e-12)


def test_zero_auxiliary_weights_reduce_to_bce():
    emb, labels, bank, head = _random_setup(1)
    weights = LossWeights(lambda1=0.0, lambda2=0.0, lambda3=0.0, delta=0.0)
    total, breakdown = total_loss(emb, labels, bank, head, weights)
    assert total == breakdown["bce"]
    assert breakdown["d_preced"] == 0.0


def _brute_force_total(emb, labels, bank, head, w):
    scores = []
    protos = np.vstack([bank.precedent, bank.provision])
    for i in range(len(emb)):
        row = []
        for p in protos:
            d2 = float(np.sum((emb[i] - p) ** 2))
            row.append(abs(math.log(((d2 + 1) / (d2 + w.epsilon)) ** 2)))
        scores.append(row)
    scores = np.array(scores)
    logits = scores @ head.weight.T + head.bias
    probs = 1.0 / (1.0 + np.exp(-logits))
    y = labels.astype(float)
    bce = float(np.mean(-(y * np.log(probs) + (1 - y) * np.log(1 - probs))))
    preced = _brute_force_preced(emb, labels, bank.precedent, list(bank.precedent_labels), w)
    provis = 0.0
    for i in range(len(emb)):
        dists = [
            float(np.sum((emb[i] - bank.provision[j]) ** 2))
            for j in range(len(bank.provision))
            if labels[i, bank.provision_labels[j]]
        ]
        provis += min(dists) if dists else 0.0
    provis /= len(emb)
    return bce + preced + w.delta * provis


def test_total_matches_straight_line_oracle():
    for seed in (2, 3, 4):
        emb, labels, bank, head = _random_setup(seed)
        weights = LossWeights(s_max=-0.1)
        total, _ = total_loss(emb, labels, bank, head, weights)
        assert total == pytest.approx(_brute_force_total(emb, labels, bank, head, weights), abs=1e-10)


def test_total_invariant_to_batch_permutation():
    emb, labels, bank, head = _random_setup(5)
    weights = LossWeights(s_max=0.0)
    base, _ = total_loss(emb, labels, bank, head, weights)
    perm = np.random.default_rng(0).permutation(len(emb))
    permuted, _ = total_loss(emb[perm], labels[perm], bank, head, weights)
    assert permuted == pytest.approx(base, abs=1e-12)


def test_precedent_only_head_features():
    emb, labels, bank, _ = _random_setup(6)
    head = ClassifierHead.zeros(3, len(bank.precedent))
    total, breakdown = total_loss(emb, labels, bank, head, LossWeights(), head_features="precedent")
    assert breakdown["bce"] == pytest.approx(math.log(2.0), abs=1e-12)


def test_head_feature_count_mismatch_rejected():
    emb, labels, bank, _ = _random_setup(7)
    head = ClassifierHead.zeros(3, 2)
    with pytest.raises(ValueError):
        total_loss(emb, labels, bank, head, LossWeights())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_embedding_raises_with_term_name():
    emb, labels, bank, head = _random_setup(8)
    emb = emb.copy()
    emb[0, 0] = np.inf
    with pytest.raises(NonFiniteLossError) as err:
        total_loss(emb, labels, bank, head, LossWeights())
    assert err.value.term in ("bce", "d_preced", "d_provis", "total")
