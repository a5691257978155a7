"""Synthetic feature corpora with planted effects.

These generators are the ground truth for end-to-end checks: the planted
group shift bounds what a sound classification pipeline must recover, and
the planted latent factors bound what the difficulty regression must find.
Row ids and document grouping mimic real extraction output, so everything
downstream (normalization, folding, reports, CLI round trips) runs the same
code paths as a real corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from medload.difficulty import DIFFICULTY_NAMES
from medload.preprocess import FeatureMatrix
from medload.translationese import REGISTRY

SHIFTED_FEATURES = ("nsubj", "obj", "amod", "advmod", "ppron")
PLANTED_DIFFICULTY = ("mt_AvS", "tot_entropy", "src_mdd")

# Columns that exercise specific preprocessing stages: a long-tailed rate
# for the skew transform, an exact near-duplicate for the collinearity
# filter, and an all-zero column for the unusable-feature drop.
_SKEWED = "conj"
_DUPLICATE_OF = ("case", "prep")
_ALL_ZERO = "parataxis"
_RARE = "epist"


@dataclass
class ClassificationSample:
    matrix: FeatureMatrix
    labels: np.ndarray
    shifted: tuple[str, ...] = SHIFTED_FEATURES
    latent: dict[str, float] = field(default_factory=dict)


@dataclass
class RegressionSample:
    matrix: FeatureMatrix
    scores: dict[str, float]
    planted: tuple[str, ...] = PLANTED_DIFFICULTY


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def generate_classification_corpus(
    n_docs: int = 200,
    n_segments: int = 4000,
    seed: int = 0,
    shift: float = 1.2,
    graded: bool = False,
) -> ClassificationSample:
    """Two-class segment corpus over the full translationese registry.

    Half the documents are originals, half translations.  Translations get
    the planted rate shift on `SHIFTED_FEATURES`; with `graded=True` the
    shift strength varies per segment with a latent factor that is returned
    so chained experiments can check ordering.
    """
    if n_docs < 4 or n_docs % 2:
        raise ValueError("n_docs must be even and at least 4")
    if n_segments < n_docs:
        raise ValueError("need at least one segment per document")
    rng = np.random.default_rng(seed)
    names = [spec.name for spec in REGISTRY]
    kinds = {spec.name: spec.normalization for spec in REGISTRY}

    half = n_docs // 2
    doc_ids = [f"o{i:04d}" for i in range(half)] + [f"t{i:04d}" for i in range(half)]
    doc_is_tgt = np.array([d.startswith("t") for d in doc_ids])

    seg_doc = np.arange(n_segments) % n_docs
    is_tgt = doc_is_tgt[seg_doc]
    word_counts = rng.integers(15, 41, size=n_segments)

    base_rates = {name: float(r) for name, r in zip(names, rng.uniform(0.02, 0.15, len(names)))}
    for name in SHIFTED_FEATURES:
        base_rates[name] = float(rng.uniform(0.06, 0.12))
    # the duplicated pair needs a rate high enough that the shared counts
    # dominate the duplication noise, keeping |r| above the filter threshold
    base_rates[_DUPLICATE_OF[1]] = 0.12

    if graded:
        latent_values = rng.normal(0.0, 1.0, size=n_segments)
        strength = _sigmoid(latent_values) * 2.0
    else:
        latent_values = np.zeros(n_segments)
        strength = np.ones(n_segments)

    data = np.empty((n_segments, len(names)))
    for j, name in enumerate(names):
        kind = kinds[name]
        if kind == "per-word":
            if name == _ALL_ZERO:
                data[:, j] = 0.0
                continue
            if name == _SKEWED:
                rates = np.minimum(0.8, rng.lognormal(math.log(0.03), 1.0, n_segments))
            elif name == _RARE:
                rates = np.full(n_segments, 0.002)
            else:
                rates = np.full(n_segments, base_rates[name])
            if name in SHIFTED_FEATURES:
                rates = np.where(is_tgt, np.minimum(0.85, rates * (1.0 + shift * strength)), rates)
            data[:, j] = rng.binomial(word_counts, rates)
        elif kind == "per-sentence-average":
            if name == "mean_sent_wc":
                data[:, j] = np.clip(rng.normal(22.0, 4.0, n_segments), 5.0, None)
            elif name == "mhd":
                data[:, j] = np.clip(rng.normal(2.6, 0.4, n_segments), 1.0, None)
            else:
                data[:, j] = np.clip(rng.normal(0.72, 0.08, n_segments), 0.2, 1.0)
        else:
            data[:, j] = np.clip(rng.normal(0.5, 0.15, n_segments), 0.0, 1.0)

    dup, src = _DUPLICATE_OF
    data[:, names.index(dup)] = data[:, names.index(src)] + rng.binomial(word_counts, 0.005)

    ids = [f"{doc_ids[d]}:s{i:05d}" for i, d in enumerate(seg_doc)]
    groups = [doc_ids[d] for d in seg_doc]
    labels = np.where(is_tgt, "tgt", "org")
    matrix = FeatureMatrix(
        ids=ids,
        groups=groups,
        names=names,
        data=data,
        stage="raw",
        word_counts=word_counts.astype(np.int64),
    )
    latent = {ids[i]: float(latent_values[i]) for i in range(n_segments) if is_tgt[i]} if graded else {}
    return ClassificationSample(matrix=matrix, labels=labels, latent=latent)


def generate_regression_corpus(
    n_docs: int = 150,
    n_segments: int = 2000,
    seed: int = 0,
    latent: dict[str, float] | None = None,
) -> RegressionSample:
    """Difficulty matrix whose planted columns and translatedness scores share
    three latent factors; everything else is independent plausible noise.

    With `latent` given (segment uid -> value), rows are generated for exactly
    those segments and the first factor is the provided value, so the matrix
    lines up with an existing corpus sample.
    """
    rng = np.random.default_rng(seed)
    if latent is not None:
        if not latent:
            raise ValueError("latent mapping is empty")
        ids = sorted(latent)
        groups = [uid.split(":", 1)[0] for uid in ids]
        n = len(ids)
        z1 = np.array([latent[uid] for uid in ids])
        sd = float(z1.std())
        z1 = (z1 - z1.mean()) / sd if sd > 0 else np.zeros(n)
    else:
        if n_docs < 3:
            raise ValueError("n_docs must be at least 3")
        if n_segments < n_docs:
            raise ValueError("need at least one segment per document")
        n = n_segments
        doc_ids = [f"t{i:04d}" for i in range(n_docs)]
        seg_doc = np.arange(n) % n_docs
        ids = [f"{doc_ids[d]}:s{i:05d}" for i, d in enumerate(seg_doc)]
        groups = [doc_ids[d] for d in seg_doc]
        z1 = rng.normal(0.0, 1.0, n)

    z2 = rng.normal(0.0, 1.0, n)
    z3 = rng.normal(0.0, 1.0, n)
    word_counts = rng.integers(12, 36, size=n)

    columns: dict[str, np.ndarray] = {
        "mt_AvS": np.clip(4.0 + 1.0 * z1 + rng.normal(0.0, 0.3, n), 0.1, None),
        "tot_entropy": np.clip(1.2 + 0.5 * z2 + rng.normal(0.0, 0.15, n), 0.0, None),
        "src_mdd": np.clip(2.2 + 0.5 * z3 + rng.normal(0.0, 0.2, n), 1.0, None),
        "bleu": np.clip(rng.normal(28.0, 12.0, n), 0.0, 100.0),
        "mean_align": np.clip(rng.normal(0.55, 0.15, n), 0.0, 1.0),
        "mean_align_content": np.clip(rng.normal(0.60, 0.15, n), 0.0, 1.0),
        "mean_cosine": np.clip(rng.normal(0.82, 0.08, n), 0.0, 1.0),
        "mt_AvS_content": np.clip(rng.normal(4.5, 0.9, n), 0.1, None),
        "mt_AvS_subw": np.clip(rng.normal(3.2, 0.8, n), 0.1, None),
        "src_gpt_AvS": np.clip(rng.normal(4.0, 0.8, n), 0.1, None),
        "src_gpt_AvS_content": np.clip(rng.normal(4.4, 0.8, n), 0.1, None),
        "src_gpt_AvS_subw": np.clip(rng.normal(3.0, 0.7, n), 0.1, None),
        "src_branching": np.clip(rng.normal(0.9, 0.25, n), 0.05, None),
        "src_lex_dens": np.clip(rng.normal(0.5, 0.1, n), 0.05, 0.95),
        "src_mwe": rng.binomial(word_counts, 0.04).astype(np.float64),
        "src_numerals": rng.binomial(word_counts, 0.03).astype(np.float64),
        "src_propn": rng.binomial(word_counts, 0.06).astype(np.float64),
        "src_n_clauses": rng.integers(1, 5, n).astype(np.float64),
        "src_tree_depth": np.clip(rng.normal(3.5, 1.0, n), 1.0, None),
        "src_wlen": np.clip(rng.normal(5.2, 0.6, n), 3.0, None),
        "tot_entropy_content": np.clip(rng.normal(1.0, 0.4, n), 0.0, None),
        "tot_entropy_trees": np.clip(rng.normal(0.8, 0.35, n), 0.0, None),
    }
    data = np.column_stack([columns[name] for name in DIFFICULTY_NAMES])

    # A few undefined alignment values exercise imputation downstream.
    missing = rng.random(n) < 0.02
    data[missing, list(DIFFICULTY_NAMES).index("mean_align_content")] = math.nan

    raw = 0.5 * z1 + 0.35 * z2 + 0.35 * z3 + rng.normal(0.0, 0.4, n)
    scores = _sigmoid(0.12 + 0.9 * raw)

    matrix = FeatureMatrix(
        ids=list(ids),
        groups=list(groups),
        names=list(DIFFICULTY_NAMES),
        data=data,
        stage="raw",
        word_counts=word_counts.astype(np.int64),
    )
    return RegressionSample(matrix=matrix, scores={uid: float(s) for uid, s in zip(ids, scores)})
