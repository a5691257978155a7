"""Feature-matrix preprocessing.

Raw extraction output moves through a fixed stage order: normalization
(per-word counts divided by segment word count), conditional log1p for
right-skewed columns, median imputation plus z-scaling, and the two
name-set filters (shared low variance, pairwise collinearity).  Every
parameter is fitted on training rows only and reapplied verbatim to test
rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from medload.stats import UndefinedStatistic, spearman, univariate_f1

STAGES = ("raw", "normalized", "transformed", "scaled")
SKEW_THRESHOLD = 1.0
LOW_VARIANCE_K = 18
R_MAX = 0.85


class TableError(ValueError):
    """Malformed feature or score table; messages carry file:line."""


@dataclass
class FeatureMatrix:
    """Rows (segments or documents) by named feature columns.

    `data` is float64 with NaN marking missing values; `groups` carries the
    doc_id used for grouped folds; `word_counts` is needed only while
    per-word normalization is still pending.
    """

    ids: list[str]
    groups: list[str]
    names: list[str]
    data: np.ndarray
    stage: str = "raw"
    word_counts: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (len(self.ids), len(self.names)):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{len(self.ids)} rows x {len(self.names)} columns"
            )
        if len(self.groups) != len(self.ids):
            raise ValueError("groups must align with ids")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    def col_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.col_index(name)]

    def subset_rows(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices)
        return FeatureMatrix(
            ids=[self.ids[i] for i in indices],
            groups=[self.groups[i] for i in indices],
            names=list(self.names),
            data=self.data[indices].copy(),
            stage=self.stage,
            word_counts=None if self.word_counts is None else self.word_counts[indices].copy(),
        )

    def keep_columns(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.col_index(n) for n in names]
        return replace(self, names=list(names), data=self.data[:, idx].copy())

    def drop_columns(self, names: Iterable[str]) -> "FeatureMatrix":
        drop = set(names)
        keep = [n for n in self.names if n not in drop]
        return self.keep_columns(keep)


def _require_stage(matrix: FeatureMatrix, expected: str, op: str) -> None:
    if matrix.stage != expected:
        raise ValueError(f"{op} expects a {expected} matrix, got stage {matrix.stage!r}")


# ---------------------------------------------------------------------------
# Normalization


def normalize(matrix: FeatureMatrix, kinds: dict[str, str]) -> FeatureMatrix:
    """Divide per-word columns by the row's word count; other kinds are
    already sentence-averaged or ratios and pass through unchanged."""
    _require_stage(matrix, "raw", "normalize")
    data = matrix.data.copy()
    per_word = [name for name in matrix.names if kinds.get(name, "none") == "per-word"]
    if per_word:
        if matrix.word_counts is None:
            raise ValueError("per-word normalization needs word_counts")
        counts = np.asarray(matrix.word_counts, dtype=np.float64)
        if np.any(counts <= 0):
            bad = matrix.ids[int(np.argmax(counts <= 0))]
            raise ValueError(f"row {bad!r} has word_count=0")
        for name in per_word:
            data[:, matrix.col_index(name)] /= counts
    return replace(matrix, data=data, stage="normalized")


# ---------------------------------------------------------------------------
# Skew correction


def adjusted_skewness(values) -> float | None:
    """Sample-size-adjusted Fisher skewness G1, or None when undefined
    (fewer than 3 defined values, or zero variance)."""
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[~np.isnan(arr)]
    n = len(arr)
    if n < 3:
        return None
    s = float(arr.std(ddof=1))
    if s == 0.0:
        return None
    m3 = float(np.mean((arr - arr.mean()) ** 3))
    return n * n / ((n - 1) * (n - 2)) * m3 / s**3


@dataclass
class ConditionalLog1p:
    """Applies ln(1+x) to columns whose training skewness exceeds the
    threshold; the per-column decision is frozen at fit time."""

    threshold: float = SKEW_THRESHOLD
    apply_log: dict[str, bool] = field(default_factory=dict)
    skews: dict[str, float | None] = field(default_factory=dict)

    def fit(self, train: FeatureMatrix) -> "ConditionalLog1p":
        _require_stage(train, "normalized", "ConditionalLog1p.fit")
        self.apply_log = {}
        self.skews = {}
        for name in train.names:
            skew = adjusted_skewness(train.column(name))
            self.skews[name] = skew
            self.apply_log[name] = skew is not None and skew > self.threshold
        return self

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        _require_stage(matrix, "normalized", "ConditionalLog1p.transform")
        if set(matrix.names) - set(self.apply_log):
            raise ValueError("matrix has columns the transform was not fitted on")
        data = matrix.data.copy()
        for name in matrix.names:
            if not self.apply_log[name]:
                continue
            col = data[:, matrix.col_index(name)]
            if np.any(col[~np.isnan(col)] < 0):
                raise ValueError(f"column {name!r} has negative values; log1p needs x >= 0")
            data[:, matrix.col_index(name)] = np.log1p(col)
        return replace(matrix, data=data, stage="transformed")


# ---------------------------------------------------------------------------
# Imputation and scaling


@dataclass
class Standardizer:
    """Training-median imputation followed by z-scoring with the training
    mean and population (n-denominator) standard deviation."""

    medians: dict[str, float] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    sds: dict[str, float] = field(default_factory=dict)

    def fit(self, train: FeatureMatrix) -> "Standardizer":
        _require_stage(train, "transformed", "Standardizer.fit")
        self.medians, self.means, self.sds = {}, {}, {}
        for name in train.names:
            col = train.column(name)
            defined = col[~np.isnan(col)]
            if len(defined) == 0:
                raise ValueError(f"column {name!r} has no defined training values")
            median = float(np.median(defined))
            filled = np.where(np.isnan(col), median, col)
            sd = float(filled.std())
            if sd == 0.0:
                raise ValueError(f"column {name!r} has zero variance after imputation")
            self.medians[name] = median
            self.means[name] = float(filled.mean())
            self.sds[name] = sd
        return self

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        _require_stage(matrix, "transformed", "Standardizer.transform")
        if set(matrix.names) - set(self.means):
            raise ValueError("matrix has columns the scaler was not fitted on")
        data = matrix.data.copy()
        for name in matrix.names:
            j = matrix.col_index(name)
            col = np.where(np.isnan(data[:, j]), self.medians[name], data[:, j])
            data[:, j] = (col - self.means[name]) / self.sds[name]
        return replace(matrix, data=data, stage="scaled")


# ---------------------------------------------------------------------------
# Low-variance filter


def low_variance_filter(
    matrices: Sequence[FeatureMatrix], k: int = LOW_VARIANCE_K
) -> tuple[list[str], dict[str, str]]:
    """Names to drop: features in the bottom-k variance ranks of every
    dataset, padded by ascending mean rank until exactly k names.

    Returns (ordered drop list, rationale per name).
    """
    if not matrices:
        raise ValueError("need at least one dataset")
    names = list(matrices[0].names)
    for m in matrices[1:]:
        if list(m.names) != names:
            raise ValueError("all datasets must share one feature set")
    if len(names) < k:
        raise ValueError(f"only {len(names)} features; cannot drop {k}")

    per_dataset_rank: list[dict[str, int]] = []
    bottoms: list[set[str]] = []
    for m in matrices:
        variances = {name: float(np.nanvar(m.column(name))) for name in names}
        ordered = sorted(names, key=lambda n: (variances[n], n))
        per_dataset_rank.append({n: i for i, n in enumerate(ordered)})
        bottoms.append(set(ordered[:k]))

    shared = set.intersection(*bottoms)
    mean_rank = {n: sum(r[n] for r in per_dataset_rank) / len(per_dataset_rank) for n in names}
    drop = sorted(shared, key=lambda n: (mean_rank[n], n))
    rationale = {n: f"bottom-{k} variance in every dataset" for n in drop}
    for name in sorted(set(names) - shared, key=lambda n: (mean_rank[n], n)):
        if len(drop) == k:
            break
        drop.append(name)
        rationale[name] = f"padded by mean variance rank {mean_rank[name]:.2f}"
    return drop, rationale


# ---------------------------------------------------------------------------
# Collinearity filter


def _pairwise_r(data: np.ndarray) -> np.ndarray:
    if np.isnan(data).any():
        raise ValueError("collinearity filter needs a fully imputed matrix")
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    safe = np.where(norms == 0, 1.0, norms)
    unit = centered / safe
    r = unit.T @ unit
    r[norms == 0, :] = 0.0
    r[:, norms == 0] = 0.0
    return r


def collinearity_filter(
    matrix: FeatureMatrix,
    scores: dict[str, float | None],
    r_max: float = R_MAX,
) -> list[str]:
    """Greedy elimination over pairs with |Pearson r| > r_max, processed by
    descending |r| then name pair; the lower-scoring member is dropped, with
    ties dropping the lexicographically later name.  Returns kept names in
    original column order."""
    names = matrix.names
    r = _pairwise_r(matrix.data)
    pairs = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            strength = abs(float(r[i, j]))
            if strength > r_max:
                a, b = sorted((names[i], names[j]))
                pairs.append((-strength, a, b))
    pairs.sort()
    alive = set(names)
    for neg_strength, a, b in pairs:
        if a not in alive or b not in alive:
            continue
        score_a = scores.get(a)
        score_b = scores.get(b)
        key_a = -math.inf if score_a is None else score_a
        key_b = -math.inf if score_b is None else score_b
        if key_a > key_b:
            alive.discard(b)
        elif key_b > key_a:
            alive.discard(a)
        else:
            alive.discard(max(a, b))
    return [n for n in names if n in alive]


def univariate_scores(matrix: FeatureMatrix, labels, plan, trainer=None) -> dict[str, float | None]:
    """Per-feature cross-validated macro-F1 for the collinearity tie-break."""
    return {
        name: univariate_f1(matrix.column(name), labels, plan, trainer=trainer)
        for name in matrix.names
    }


def target_correlation_scores(matrix: FeatureMatrix, target) -> dict[str, float | None]:
    """|Spearman rho| against the regression target; None when undefined."""
    scores: dict[str, float | None] = {}
    for name in matrix.names:
        col = matrix.column(name)
        try:
            rho, _ = spearman(col, target)
            scores[name] = abs(rho)
        except UndefinedStatistic:
            scores[name] = None
    return scores


# ---------------------------------------------------------------------------
# TSV round trip


def write_matrix_tsv(matrix: FeatureMatrix, path: str) -> None:
    header = {"stage": matrix.stage, "has_word_counts": matrix.word_counts is not None}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        cols = ["id", "group"] + (["word_count"] if matrix.word_counts is not None else [])
        fh.write("\t".join(cols + list(matrix.names)) + "\n")
        for i, (row_id, group) in enumerate(zip(matrix.ids, matrix.groups)):
            cells = [row_id, group]
            if matrix.word_counts is not None:
                cells.append(repr(int(matrix.word_counts[i])))
            for value in matrix.data[i]:
                cells.append("NA" if np.isnan(value) else repr(float(value)))
            fh.write("\t".join(cells) + "\n")


def read_matrix_tsv(path: str) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# "):
            raise TableError(f"{path}:1: missing JSON header line")
        try:
            header = json.loads(first[2:])
        except json.JSONDecodeError as err:
            raise TableError(f"{path}:1: bad header: {err}") from None
        if not isinstance(header, dict) or "stage" not in header or "has_word_counts" not in header:
            raise TableError(f"{path}:1: header needs 'stage' and 'has_word_counts'")
        cols = fh.readline().rstrip("\n").split("\t")
        fixed = 2 + (1 if header["has_word_counts"] else 0)
        if len(cols) <= fixed:
            raise TableError(f"{path}:2: no feature columns after the id columns")
        names = cols[fixed:]
        ids, groups, wcs, rows = [], [], [], []
        for lineno, line in enumerate(fh, start=3):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != len(cols):
                raise TableError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(cells)}")
            ids.append(cells[0])
            groups.append(cells[1])
            try:
                if header["has_word_counts"]:
                    wcs.append(int(cells[2]))
                rows.append([math.nan if c == "NA" else float(c) for c in cells[fixed:]])
            except ValueError as err:
                raise TableError(f"{path}:{lineno}: {err}") from None
    if not ids:
        raise TableError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        seen = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise TableError(f"{path}: duplicate row id {dup!r}")
    data = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureMatrix(
        ids=ids,
        groups=groups,
        names=names,
        data=data,
        stage=header["stage"],
        word_counts=np.asarray(wcs, dtype=np.float64) if header["has_word_counts"] else None,
    )
