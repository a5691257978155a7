import math

import numpy as np
import pytest

from medload.difficulty import DIFFICULTY_NAMES
from medload.synth import (
    PLANTED_DIFFICULTY,
    SHIFTED_FEATURES,
    generate_classification_corpus,
    generate_regression_corpus,
)
from medload.translationese import REGISTRY_NAMES


def test_classification_corpus_shape_and_grouping():
    sample = generate_classification_corpus(n_docs=8, n_segments=40, seed=1)
    m = sample.matrix
    assert m.data.shape == (40, len(REGISTRY_NAMES))
    assert m.names == list(REGISTRY_NAMES)
    assert m.stage == "raw"
    assert len(set(m.groups)) == 8
    assert all(wc > 0 for wc in m.word_counts)
    for uid, group in zip(m.ids, m.groups):
        assert uid.startswith(group + ":")
    for group, label in zip(m.groups, sample.labels):
        assert label == ("tgt" if group.startswith("t") else "org")


def test_classification_corpus_is_deterministic_per_seed():
    a = generate_classification_corpus(n_docs=8, n_segments=40, seed=9)
    b = generate_classification_corpus(n_docs=8, n_segments=40, seed=9)
    c = generate_classification_corpus(n_docs=8, n_segments=40, seed=10)
    assert np.array_equal(a.matrix.data, b.matrix.data)
    assert a.matrix.ids == b.matrix.ids
    assert not np.array_equal(a.matrix.data, c.matrix.data)


def test_classification_plant_shifts_normalized_rates():
    sample = generate_classification_corpus(n_docs=40, n_segments=400, seed=2, shift=1.5)
    m = sample.matrix
    tgt = np.array([lab == "tgt" for lab in sample.labels])
    for name in SHIFTED_FEATURES:
        col = m.column(name) / m.word_counts
        assert col[tgt].mean() > 1.5 * col[~tgt].mean()


def test_classification_latent_only_when_graded():
    plain = generate_classification_corpus(n_docs=8, n_segments=40, seed=3)
    graded = generate_classification_corpus(n_docs=8, n_segments=40, seed=3, graded=True)
    assert plain.latent == {}
    tgt_ids = {i for i, lab in zip(graded.matrix.ids, graded.labels) if lab == "tgt"}
    assert set(graded.latent) == tgt_ids


def test_classification_corpus_validation():
    with pytest.raises(ValueError):
        generate_classification_corpus(n_docs=5, n_segments=40)
    with pytest.raises(ValueError):
        generate_classification_corpus(n_docs=8, n_segments=4)


def test_regression_corpus_shape_scores_and_nans():
    sample = generate_regression_corpus(n_docs=10, n_segments=120, seed=4)
    m = sample.matrix
    assert m.names == list(DIFFICULTY_NAMES)
    assert m.data.shape == (120, 22)
    assert set(sample.scores) == set(m.ids)
    assert all(0.0 < s < 1.0 for s in sample.scores.values())
    nan_cols = {m.names[j] for j in range(m.data.shape[1]) if np.isnan(m.data[:, j]).any()}
    assert nan_cols <= {"mean_align_content"}
    for name in PLANTED_DIFFICULTY:
        assert not np.isnan(m.column(name)).any()


def test_regression_planted_columns_correlate_with_scores():
    sample = generate_regression_corpus(n_docs=30, n_segments=600, seed=5)
    y = np.array([sample.scores[i] for i in sample.matrix.ids])
    for name in PLANTED_DIFFICULTY:
        r = np.corrcoef(sample.matrix.column(name), y)[0, 1]
        assert r > 0.2, f"{name} barely correlates: {r}"
    noise = np.corrcoef(sample.matrix.column("bleu"), y)[0, 1]
    assert abs(noise) < 0.15


def test_regression_corpus_deterministic():
    a = generate_regression_corpus(n_docs=10, n_segments=80, seed=6)
    b = generate_regression_corpus(n_docs=10, n_segments=80, seed=6)
    assert np.array_equal(a.matrix.data, b.matrix.data, equal_nan=True)
    assert a.scores == b.scores


def test_regression_corpus_from_latent_mapping():
    latent = {f"t{i:03d}:s{j}": float(i - 2 + 0.1 * j) for i in range(5) for j in range(6)}
    sample = generate_regression_corpus(seed=7, latent=latent)
    assert set(sample.matrix.ids) == set(latent)
    assert sample.matrix.groups == [uid.split(":")[0] for uid in sample.matrix.ids]
    order = np.argsort([latent[i] for i in sample.matrix.ids])
    mt = sample.matrix.column("mt_AvS")[order]
    # the first latent factor drives mt_AvS, so sorting by latent sorts it up
    assert np.corrcoef(np.arange(len(mt)), mt)[0, 1] > 0.7
    with pytest.raises(ValueError):
        generate_regression_corpus(seed=7, latent={})
