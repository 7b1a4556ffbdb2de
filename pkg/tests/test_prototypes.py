"""Cosine k-means, prototype discovery and provision encoding."""

from itertools import product

import numpy as np
import pytest

from protocite.corpus import CitationRef, LabelSet
from protocite.encoder import EncoderParams, encode
from protocite.prototypes import (
    CENTROID_SOURCE,
    KIND_PROVISION,
    ProvisionTextMissing,
    cluster_cosine_kmeans,
    discover_prototypes,
    encode_provision_prototypes,
)


def _unit(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def test_two_antipodal_clusters_match_partition_oracle():
    rng = np.random.default_rng(1)
    direction = _unit([[1.0, 0.5, -0.2, 0.8]])[0]
    cluster_a = _unit(direction + 0.01 * rng.normal(size=(4, 4)))
    cluster_b = _unit(-direction + 0.01 * rng.normal(size=(4, 4)))
    points = np.vstack([cluster_a, cluster_b])

    centroids = cluster_cosine_kmeans(points, k=2, seed=0)

    # Brute force: best 2-partition by total cosine distance to the
    # renormalized mean of each part.
    best_cost, best_centroids = None, None
    for mask_bits in range(1, 2 ** len(points) - 1):
        mask = np.array([(mask_bits >> i) & 1 for i in range(len(points))], dtype=bool)
        cents = []
        cost = 0.0
        for part in (points[mask], points[~mask]):
            mean = part.mean(axis=0)
            mean = mean / np.linalg.norm(mean)
            cents.append(mean)
            cost += float(np.sum(1.0 - part @ mean))
        if best_cost is None or cost < best_cost:
            best_cost, best_centroids = cost, cents
    got = sorted(tuple(np.round(c, 9)) for c in centroids)
    want = sorted(tuple(np.round(c, 9)) for c in best_centroids)
    assert np.allclose(got, want, atol=1e-7)


def test_k1_returns_normalized_mean():
    points = _unit([[1, 0, 0], [0.9, 0.1, 0], [0.8, -0.1, 0.1]])
    [centroid] = cluster_cosine_kmeans(points, k=1, seed=5)
    mean = points.mean(axis=0)
    assert np.allclose(centroid, mean / np.linalg.norm(mean))


def test_fewer_points_than_k_gives_singletons():
    points = _unit([[1, 0], [0, 1], [1, 1]])
    centroids = cluster_cosine_kmeans(points, k=5, seed=0)
    assert centroids.shape == (3, 2)
    assert np.allclose(centroids, points)


def test_kmeans_deterministic_under_seed():
    rng = np.random.default_rng(8)
    points = _unit(rng.normal(size=(30, 6)))
    a = cluster_cosine_kmeans(points, k=4, seed=11)
    b = cluster_cosine_kmeans(points, k=4, seed=11)
    assert np.array_equal(a, b)


def test_kmeans_centroids_unit_norm():
    rng = np.random.default_rng(3)
    points = _unit(rng.normal(size=(25, 5)))
    centroids = cluster_cosine_kmeans(points, k=3, seed=2)
    assert np.allclose(np.linalg.norm(centroids, axis=1), 1.0)


# -- discovery -----------------------------------------------------------------


def _random_instance(rng, n_samples, n_labels):
    emb = _unit(rng.normal(size=(n_samples, 6)))
    labels = (rng.random((n_samples, n_labels)) < 0.4).astype(np.uint8)
    labels[rng.integers(n_samples), :] = 1  # keep every label non-empty
    for l in range(n_labels):
        if labels[:, l].sum() == 0:
            labels[rng.integers(n_samples), l] = 1
    ids = [f"s{i}" for i in range(n_samples)]
    return emb, labels, ids


def test_snapping_matches_exhaustive_nearest_oracle():
    rng = np.random.default_rng(42)
    for trial in range(10):
        emb, labels, ids = _random_instance(rng, int(rng.integers(10, 50)), int(rng.integers(2, 5)))
        k = int(rng.integers(1, 4))
        protos, empty = discover_prototypes(emb, labels, ids, k=k, s_min=-1.0, seed=trial)
        assert empty == []
        by_label = {}
        for p in protos:
            by_label.setdefault(p.label_index, []).append(p)
        for label, plist in by_label.items():
            positives = np.nonzero(labels[:, label])[0]
            assert len(plist) == min(k, len(positives))
            # Recreate the centroids, then brute-force the nearest positive
            # sample by cosine for each.
            centroids = cluster_cosine_kmeans(
                emb[positives], k, seed=np.random.SeedSequence([trial, label])
            )
            for slot, proto in enumerate(plist):
                sims = [
                    round(float(emb[i] @ centroids[slot])
                          / (np.linalg.norm(emb[i]) * np.linalg.norm(centroids[slot])), 12)
                    for i in positives
                ]
                best = positives[int(np.argmax(sims))]
                assert proto.source == f"s{best}"
                assert np.array_equal(proto.vector, emb[best])


def test_smin_minus_one_always_snaps_to_samples():
    rng = np.random.default_rng(0)
    emb, labels, ids = _random_instance(rng, 30, 3)
    protos, _ = discover_prototypes(emb, labels, ids, k=3, s_min=-1.0, seed=1)
    assert protos and all(p.source in ids for p in protos)


def test_smin_plus_one_keeps_centroids():
    rng = np.random.default_rng(2)
    emb, labels, ids = _random_instance(rng, 30, 3)
    protos, _ = discover_prototypes(emb, labels, ids, k=3, s_min=1.0, seed=1)
    assert protos and all(p.source == CENTROID_SOURCE for p in protos)


def test_snapped_prototype_is_positive_sample_of_its_label():
    rng = np.random.default_rng(5)
    emb, labels, ids = _random_instance(rng, 40, 4)
    protos, _ = discover_prototypes(emb, labels, ids, k=2, s_min=-1.0, seed=9)
    index = {uid: i for i, uid in enumerate(ids)}
    for p in protos:
        assert labels[index[p.source], p.label_index] == 1


def test_label_without_positives_is_flagged_not_fatal():
    emb = _unit(np.random.default_rng(1).normal(size=(8, 4)))
    labels = np.zeros((8, 2), dtype=np.uint8)
    labels[:, 0] = 1
    protos, empty = discover_prototypes(emb, labels, [f"s{i}" for i in range(8)], k=2)
    assert empty == [1]
    assert {p.label_index for p in protos} == {0}


def test_discovery_deterministic():
    rng = np.random.default_rng(7)
    emb, labels, ids = _random_instance(rng, 25, 3)
    a, _ = discover_prototypes(emb, labels, ids, k=2, s_min=-1.0, seed=4)
    b, _ = discover_prototypes(emb, labels, ids, k=2, s_min=-1.0, seed=4)
    assert [(p.label_index, p.source, p.vector.tobytes()) for p in a] == [
        (p.label_index, p.source, p.vector.tobytes()) for p in b
    ]


# -- provision prototypes --------------------------------------------------------


def test_one_provision_prototype_per_label(three_label_set):
    params = EncoderParams.initialize(128, 8, seed=0)
    protos = encode_provision_prototypes(three_label_set, params)
    assert [p.label_index for p in protos] == [0, 1, 2]
    assert all(p.kind == KIND_PROVISION for p in protos)
    assert [p.source for p in protos] == three_label_set.keys()


def test_identical_texts_give_identical_vectors():
    refs = [CitationRef(1, "1"), CitationRef(2, "2")]
    ls = LabelSet(labels=refs, provision_texts={r.key: "Same provision text." for r in refs})
    params = EncoderParams.initialize(128, 8, seed=0)
    a, b = encode_provision_prototypes(ls, params)
    assert np.array_equal(a.vector, b.vector)
    assert (a.label_index, b.label_index) == (0, 1)


def test_missing_provision_text_errors_with_labels(three_label_set):
    three_label_set.provision_texts["11 §523(a)"] = "   "
    params = EncoderParams.initialize(128, 8, seed=0)
    with pytest.raises(ProvisionTextMissing) as err:
        encode_provision_prototypes(three_label_set, params)
    assert err.value.keys == ["11 §523(a)"]


def test_reencoding_changes_after_parameter_step(three_label_set):
    params = EncoderParams.initialize(128, 8, seed=0)
    before = encode_provision_prototypes(three_label_set, params)
    params.weight = params.weight + 0.05  # one "gradient step"
    after = encode_provision_prototypes(three_label_set, params)
    assert any(not np.array_equal(a.vector, b.vector) for a, b in zip(before, after))
