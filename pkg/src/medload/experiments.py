"""Experiment drivers: configured runs plus report-ready summary tables.

A run consumes files produced by earlier stages (feature TSVs, score TSVs),
never a corpus directly, so every experiment is reproducible from artifacts
on disk.  Reports come back as plain dicts of JSON-safe values with no
timestamps; rerunning the same config on the same inputs yields an
identical structure.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from medload.difficulty import DIFFICULTY_NAMES
from medload.ml import group_kfold
from medload.pipeline import (
    PipelineOutcome,
    aggregate_documents,
    classify_pipeline,
    difficulty_kinds,
    ensure_normalized,
    regress_pipeline,
    registry_kinds,
    shap_mean_table,
)
from medload.preprocess import FeatureMatrix, TableError, read_matrix_tsv
from medload.stats import UndefinedStatistic, mann_whitney, spearman, univariate_f1

SCHEMA = "medload-report/1"
ALPHA = 0.05
BOLD_RHO = 0.20
CROSS_FLAG_RHO = 0.70

TASKS = ("classify", "regress")
UNITS = ("segment", "document")


class SubsetError(ValueError):
    """Unknown subset name, or a subset needing features the data lacks."""

    def __init__(self, message: str, names: Sequence[str]):
        super().__init__(message)
        self.names = list(names)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell: what to run, on which files, with which knobs.

    `paths` keys: classification needs `org_features` and `tgt_features`;
    regression needs `difficulty_features` and `scores`.
    """

    task: str
    paths: dict[str, str] = field(default_factory=dict)
    mode: str = "synthetic"
    lpair: str = "synthetic"
    unit: str = "segment"
    subset: str = "all"
    k: int = 10
    seed: int = 0
    jobs: int = 1
    grouped: bool = True
    r_max: float = 0.85
    min_features: int = 2
    calib_splits: int = 3
    rfecv_folds: int = 10
    epsilon: float = 0.01
    shared_drop: tuple[str, ...] = ()
    backend: str = "auto"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}, got {self.unit!r}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be positive, got {self.jobs}")
        if not 0.0 < self.r_max <= 1.0:
            raise ValueError(f"r_max must be in (0, 1], got {self.r_max}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def load_subsets() -> dict[str, list[str]]:
    """Feature-subset assignments from the packaged table.

    The file stores the two partitions (source/transfer and structure/IT);
    `source+transfer` and `all` are the full feature list.  Each partition
    must cover the difficulty features exactly, with no overlap.
    """
    text = resources.files("medload.data").joinpath("difficulty_subsets.tsv").read_text("utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].split("\t") != ["subset", "feature"]:
        raise ValueError("difficulty_subsets.tsv must start with 'subset\\tfeature'")
    base: dict[str, list[str]] = {}
    for line in lines[1:]:
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"malformed subset row: {line!r}")
        subset, feat = parts
        if feat not in DIFFICULTY_NAMES:
            raise ValueError(f"unknown difficulty feature {feat!r} in subset {subset!r}")
        if feat in base.setdefault(subset, []):
            raise ValueError(f"duplicate feature {feat!r} in subset {subset!r}")
        base[subset].append(feat)
    order = {name: i for i, name in enumerate(DIFFICULTY_NAMES)}
    for subset in base:
        base[subset].sort(key=order.__getitem__)
    for left, right in (("source", "transfer"), ("structure", "IT")):
        got = set(base.get(left, ())) | set(base.get(right, ()))
        if got != set(DIFFICULTY_NAMES) or set(base[left]) & set(base[right]):
            raise ValueError(f"subsets {left!r} and {right!r} must partition the feature set")
    base["source+transfer"] = list(DIFFICULTY_NAMES)
    base["all"] = list(DIFFICULTY_NAMES)
    return base


def subset_names(subset: str) -> list[str]:
    """Feature list for one subset; unknown names raise SubsetError."""
    subsets = load_subsets()
    if subset not in subsets:
        known = ", ".join(sorted(subsets))
        raise SubsetError(f"unknown subset {subset!r}; expected one of: {known}", [subset])
    return subsets[subset]


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _input_records(paths: dict[str, str], keys: Sequence[str]) -> dict[str, dict[str, str]]:
    return {key: {"path": paths[key], "sha256": file_sha256(paths[key])} for key in keys}


def _require_paths(config: ExperimentConfig, keys: Sequence[str]) -> None:
    missing = [key for key in keys if not config.paths.get(key)]
    if missing:
        raise ValueError(
            f"{config.task} run for {config.mode}/{config.lpair} needs paths for: "
            + ", ".join(missing)
        )


def _concat_rows(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    if a.names != b.names:
        raise ValueError("feature tables disagree on columns; re-extract both sides together")
    if a.stage != b.stage:
        raise ValueError(f"cannot combine stage {a.stage!r} with stage {b.stage!r}")
    overlap = set(a.ids) & set(b.ids)
    if overlap:
        sample = sorted(overlap)[:3]
        raise ValueError(f"row ids appear on both sides: {', '.join(sample)}")
    if (a.word_counts is None) != (b.word_counts is None):
        raise ValueError("one table has word counts and the other does not")
    counts = None
    if a.word_counts is not None:
        counts = np.concatenate([a.word_counts, b.word_counts])
    return FeatureMatrix(
        ids=list(a.ids) + list(b.ids),
        groups=list(a.groups) + list(b.groups),
        names=list(a.names),
        data=np.vstack([a.data, b.data]),
        stage=a.stage,
        word_counts=counts,
    )


def _infer_kinds(matrix: FeatureMatrix) -> dict[str, str]:
    if set(matrix.names) <= set(DIFFICULTY_NAMES):
        return difficulty_kinds()
    return registry_kinds()


def _take_rows(matrix: FeatureMatrix, rows: Sequence[int]) -> FeatureMatrix:
    return FeatureMatrix(
        ids=[matrix.ids[i] for i in rows],
        groups=[matrix.groups[i] for i in rows],
        names=list(matrix.names),
        data=matrix.data[list(rows)],
        stage=matrix.stage,
        word_counts=None if matrix.word_counts is None else matrix.word_counts[list(rows)],
    )


def _outcome_summary(outcome: PipelineOutcome) -> dict:
    selected = sorted({len(f.selected) for f in outcome.folds})
    inputs = sorted({len(f.input_names) for f in outcome.folds})
    return {
        "n_selected_median": float(np.median([len(f.selected) for f in outcome.folds])),
        "n_input_median": float(np.median([len(f.input_names) for f in outcome.folds])),
        "n_selected_range": [selected[0], selected[-1]],
        "n_input_range": [inputs[0], inputs[-1]],
    }


def run_classification(config: ExperimentConfig) -> dict:
    """Original-vs-translation classification over extracted feature tables.

    Returns a report dict holding fold metrics, SHAP means, the document
    frequency comparison, and the out-of-fold translatedness score of every
    target-side row.
    """
    if config.task != "classify":
        raise ValueError(f"run_classification needs task='classify', got {config.task!r}")
    _require_paths(config, ("org_features", "tgt_features"))
    org = read_matrix_tsv(config.paths["org_features"])
    tgt = read_matrix_tsv(config.paths["tgt_features"])
    for side, matrix in (("org", org), ("tgt", tgt)):
        if not matrix.ids:
            raise ValueError(f"{side} feature table for {config.mode}/{config.lpair} is empty")
    overlap = set(org.groups) & set(tgt.groups)
    if overlap:
        sample = sorted(overlap)[:3]
        raise ValueError(f"documents appear on both sides: {', '.join(sample)}")
    combined = _concat_rows(org, tgt)
    combined = ensure_normalized(combined, _infer_kinds(combined))
    labels = np.array(["org"] * len(org.ids) + ["tgt"] * len(tgt.ids))
    doc_matrix, doc_labels = aggregate_documents(combined, labels)
    org_docs = _take_rows(doc_matrix, np.flatnonzero(doc_labels == "org"))
    tgt_docs = _take_rows(doc_matrix, np.flatnonzero(doc_labels == "tgt"))
    frequency = frequency_comparison(org_docs, tgt_docs, k=config.k, seed=config.seed)
    tgt_rows = set(tgt.ids)
    if config.unit == "document":
        tgt_rows = set(tgt.groups)
        combined, labels = doc_matrix, doc_labels
    outcome = classify_pipeline(
        combined,
        labels,
        k=config.k,
        seed=config.seed,
        r_max=config.r_max,
        min_features=config.min_features,
        calib_splits=config.calib_splits,
        rfecv_folds=config.rfecv_folds,
        shared_drop=config.shared_drop,
        jobs=config.jobs,
        backend=config.backend,
    )
    scores = {uid: float(outcome.oof_scores[uid]) for uid in combined.ids if uid in tgt_rows}
    manifest = dict(outcome.manifest)
    manifest["inputs"] = _input_records(config.paths, ("org_features", "tgt_features"))
    manifest["unit"] = config.unit
    results = {
        "macro_f1_mean": outcome.metrics["macro_f1_mean"],
        "macro_f1_sd": outcome.metrics["macro_f1_sd"],
        "per_fold": manifest["per_fold"],
        "n_rows": len(combined.ids),
        "n_org": int(np.sum(labels == "org")),
        "n_tgt": int(np.sum(labels == "tgt")),
    }
    results.update(_outcome_summary(outcome))
    return {
        "schema": SCHEMA,
        "task": "classify",
        "mode": config.mode,
        "lpair": config.lpair,
        "unit": config.unit,
        "k": config.k,
        "seed": config.seed,
        "results": results,
        "shap_means": shap_mean_table(outcome),
        "frequency": frequency,
        "scores": scores,
        "manifest": manifest,
    }


def read_scores_tsv(path: str) -> dict[str, float]:
    """Read `id<TAB>score` rows (extra columns are ignored)."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    lines = [line for line in lines if line]
    if not lines:
        raise TableError(f"{path}:1: empty scores file")
    header = lines[0].split("\t")
    try:
        id_col, score_col = header.index("id"), header.index("score")
    except ValueError:
        raise TableError(f"{path}:1: need 'id' and 'score' columns, got {header}") from None
    scores: dict[str, float] = {}
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise TableError(f"{path}:{number}: expected {len(header)} fields, got {len(parts)}")
        uid = parts[id_col]
        if uid in scores:
            raise TableError(f"{path}:{number}: duplicate id {uid!r}")
        try:
            scores[uid] = float(parts[score_col])
        except ValueError:
            raise TableError(f"{path}:{number}: bad score {parts[score_col]!r}") from None
    return scores


def write_scores_tsv(scores: dict[str, float], path: str) -> None:
    """Write scores sorted by id so identical runs produce identical bytes."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("id\tscore\n")
        for uid in sorted(scores):
            handle.write(f"{uid}\t{float(scores[uid])!r}\n")


def _subset_matrix(matrix: FeatureMatrix, wanted: Sequence[str], subset: str) -> FeatureMatrix:
    missing = [name for name in wanted if name not in matrix.names]
    if missing:
        raise SubsetError(
            f"subset {subset!r} needs features absent from the table: " + ", ".join(missing),
            missing,
        )
    cols = [matrix.col_index(name) for name in wanted]
    return FeatureMatrix(
        ids=list(matrix.ids),
        groups=list(matrix.groups),
        names=list(wanted),
        data=matrix.data[:, cols].copy(),
        stage=matrix.stage,
        word_counts=matrix.word_counts,
    )


def run_regression(config: ExperimentConfig) -> dict:
    """Translatedness regression from difficulty features.

    Joins the difficulty table with per-row scores on id, restricts columns
    to the configured subset, and fits the grouped SVR pipeline.  The report
    also carries the univariate table over every available feature.
    """
    if config.task != "regress":
        raise ValueError(f"run_regression needs task='regress', got {config.task!r}")
    _require_paths(config, ("difficulty_features", "scores"))
    matrix = read_matrix_tsv(config.paths["difficulty_features"])
    scores = read_scores_tsv(config.paths["scores"])
    wanted = subset_names(config.subset)
    matrix = ensure_normalized(matrix, _infer_kinds(matrix))
    if config.unit == "document":
        matrix, _ = aggregate_documents(matrix)
    keep = [i for i, uid in enumerate(matrix.ids) if uid in scores]
    if not keep:
        raise ValueError("no feature rows have scores; check that ids match between the files")
    joined = FeatureMatrix(
        ids=[matrix.ids[i] for i in keep],
        groups=[matrix.groups[i] for i in keep],
        names=list(matrix.names),
        data=matrix.data[keep],
        stage=matrix.stage,
        word_counts=None,
    )
    if not config.grouped:
        joined = FeatureMatrix(
            ids=joined.ids,
            groups=list(joined.ids),
            names=joined.names,
            data=joined.data,
            stage=joined.stage,
        )
    targets = np.array([scores[uid] for uid in joined.ids])
    outcome = regress_pipeline(
        _subset_matrix(joined, wanted, config.subset),
        targets,
        k=config.k,
        seed=config.seed,
        r_max=config.r_max,
        min_features=config.min_features,
        rfecv_folds=config.rfecv_folds,
        epsilon=config.epsilon,
        jobs=config.jobs,
        backend=config.backend,
    )
    manifest = dict(outcome.manifest)
    manifest["inputs"] = _input_records(config.paths, ("difficulty_features", "scores"))
    manifest["unit"] = config.unit
    manifest["subset"] = config.subset
    manifest["grouped"] = config.grouped
    manifest["rows_without_scores"] = len(matrix.ids) - len(keep)
    manifest["scores_without_rows"] = len(scores) - len(keep)
    results = {
        "rho": outcome.metrics["rho"],
        "rho_p_value": outcome.metrics["rho_p_value"],
        "r2": outcome.metrics["r2"],
        "mae": outcome.metrics["mae"],
        "r2_fold_mean": outcome.metrics["r2_fold_mean"],
        "r2_fold_sd": outcome.metrics["r2_fold_sd"],
        "per_fold": manifest["per_fold"],
        "n_rows": len(joined.ids),
        "n_features_subset": len(wanted),
    }
    results.update(_outcome_summary(outcome))
    return {
        "schema": SCHEMA,
        "task": "regress",
        "mode": config.mode,
        "lpair": config.lpair,
        "unit": config.unit,
        "subset": config.subset,
        "k": config.k,
        "seed": config.seed,
        "results": results,
        "shap_means": shap_mean_table(outcome),
        "univariate": univariate_table(joined, scores),
        "manifest": manifest,
    }


def univariate_table(
    matrix: FeatureMatrix,
    scores: dict[str, float],
    alpha: float = ALPHA,
    bold_rho: float = BOLD_RHO,
) -> list[dict]:
    """Per-feature mean and significance-masked Spearman vs the target.

    `rho` is None when the correlation is insignificant at `alpha` or
    undefined (constant column); `bold` marks surviving |rho| > `bold_rho`.
    """
    matrix = ensure_normalized(matrix, _infer_kinds(matrix))
    keep = [i for i, uid in enumerate(matrix.ids) if uid in scores]
    if len(keep) < 3:
        raise ValueError(f"univariate table needs at least 3 scored rows, got {len(keep)}")
    data = matrix.data[keep]
    target = np.array([scores[matrix.ids[i]] for i in keep])
    rows = []
    for j, name in enumerate(matrix.names):
        column = data[:, j]
        mask = np.isfinite(column) & np.isfinite(target)
        mean = float(np.mean(column[mask])) if mask.any() else None
        rho = p_value = None
        if int(mask.sum()) >= 3:
            try:
                rho, p_value = spearman(column[mask], target[mask])
            except UndefinedStatistic:
                rho = p_value = None
        masked = rho is None or p_value > alpha
        rows.append(
            {
                "feature": name,
                "mean": mean,
                "rho": None if masked else rho,
                "p_value": p_value,
                "bold": bool(not masked and abs(rho) > bold_rho),
            }
        )
    return rows


def frequency_comparison(
    org_docs: FeatureMatrix,
    tgt_docs: FeatureMatrix,
    k: int = 10,
    seed: int = 0,
    alpha: float = ALPHA,
) -> list[dict]:
    """Direction of each feature's shift in translations, with one-feature F1.

    Both inputs must be document-level normalized matrices over the same
    columns.  `direction` is "up" when the target side ranks significantly
    higher than the original side at `alpha`, "down" when lower, "--"
    otherwise; `f1` is the grouped-CV macro-F1 of a single-feature
    classifier, or None when that is undefined.
    """
    if org_docs.names != tgt_docs.names:
        raise ValueError("frequency comparison needs identical feature columns on both sides")
    for side, docs in (("org", org_docs), ("tgt", tgt_docs)):
        if docs.stage != "normalized":
            raise ValueError(f"{side} matrix must be normalized document rows, got {docs.stage!r}")
        if not docs.ids:
            raise ValueError(f"{side} matrix has no documents")
    labels = np.array(["org"] * len(org_docs.ids) + ["tgt"] * len(tgt_docs.ids))
    stacked = np.vstack([org_docs.data, tgt_docs.data])
    groups = list(org_docs.ids) + list(tgt_docs.ids)
    plan = group_kfold(groups, k=min(k, len(groups)), seed=seed)
    rows = []
    for j, name in enumerate(org_docs.names):
        org_col = org_docs.data[:, j]
        tgt_col = tgt_docs.data[:, j]
        org_col = org_col[np.isfinite(org_col)]
        tgt_col = tgt_col[np.isfinite(tgt_col)]
        if len(org_col) == 0 or len(tgt_col) == 0:
            rows.append({"feature": name, "direction": "--", "p_value": None, "f1": None})
            continue
        result = mann_whitney(tgt_col, org_col, alpha)
        column = stacked[:, j]
        f1 = univariate_f1(column, labels, plan) if np.isfinite(column).all() else None
        rows.append(
            {
                "feature": name,
                "direction": "--" if result.direction == "none" else result.direction,
                "p_value": float(result.p_value),
                "f1": None if f1 is None else float(f1),
            }
        )
    return rows


def audit_cross_collinearity(
    trans_matrix: FeatureMatrix,
    diff_matrix: FeatureMatrix,
    flag_rho: float = CROSS_FLAG_RHO,
) -> dict:
    """Cross-set Spearman table between translationese and difficulty features.

    Rows are aligned on shared ids and reduced to complete cases; columns
    that end up constant or all-missing get rho None.  Pairs with
    |rho| > `flag_rho` are flagged, strongest first.
    """
    trans_matrix = ensure_normalized(trans_matrix, _infer_kinds(trans_matrix))
    diff_matrix = ensure_normalized(diff_matrix, _infer_kinds(diff_matrix))
    shared = sorted(set(trans_matrix.ids) & set(diff_matrix.ids))
    if len(shared) < 3:
        raise ValueError(f"audit needs at least 3 shared rows, got {len(shared)}")
    t_rows = {uid: i for i, uid in enumerate(trans_matrix.ids)}
    d_rows = {uid: i for i, uid in enumerate(diff_matrix.ids)}
    t_data = trans_matrix.data[[t_rows[uid] for uid in shared]]
    d_data = diff_matrix.data[[d_rows[uid] for uid in shared]]

    # A column missing everywhere would wipe out every complete case, so
    # set such columns aside before row filtering.
    t_dead = [j for j in range(t_data.shape[1]) if not np.isfinite(t_data[:, j]).any()]
    d_dead = [j for j in range(d_data.shape[1]) if not np.isfinite(d_data[:, j]).any()]
    t_live = [j for j in range(t_data.shape[1]) if j not in t_dead]
    d_live = [j for j in range(d_data.shape[1]) if j not in d_dead]
    complete = np.isfinite(t_data[:, t_live]).all(axis=1) & np.isfinite(d_data[:, d_live]).all(axis=1)
    if int(complete.sum()) < 3:
        raise ValueError(f"audit needs at least 3 complete rows, got {int(complete.sum())}")

    def rank_block(data: np.ndarray, live: list[int]) -> tuple[np.ndarray, list[int]]:
        from medload.stats import midranks

        ranked = np.empty((int(complete.sum()), len(live)))
        constant = []
        for out_j, j in enumerate(live):
            column = data[complete, j]
            if float(column.max()) == float(column.min()):
                constant.append(j)
                ranked[:, out_j] = 0.0
                continue
            ranks = midranks(column)
            ranks = ranks - ranks.mean()
            ranked[:, out_j] = ranks / np.sqrt(float(np.dot(ranks, ranks)))
        return ranked, constant

    t_ranked, t_const = rank_block(t_data, t_live)
    d_ranked, d_const = rank_block(d_data, d_live)
    table = t_ranked.T @ d_ranked
    undefined_t = set(t_dead) | set(t_const)
    undefined_d = set(d_dead) | set(d_const)
    rho_of: dict[tuple[int, int], float] = {}
    for out_i, i in enumerate(t_live):
        for out_j, j in enumerate(d_live):
            if i not in undefined_t and j not in undefined_d:
                rho_of[(i, j)] = float(np.clip(table[out_i, out_j], -1.0, 1.0))

    pairs = []
    best = None
    for i in range(t_data.shape[1]):
        for j in range(d_data.shape[1]):
            rho = rho_of.get((i, j))
            if rho is not None and (best is None or abs(rho) > abs(best)):
                best = rho
            pairs.append(
                {
                    "translationese": trans_matrix.names[i],
                    "difficulty": diff_matrix.names[j],
                    "rho": rho,
                }
            )
    flagged = sorted(
        (pair for pair in pairs if pair["rho"] is not None and abs(pair["rho"]) > flag_rho),
        key=lambda pair: -abs(pair["rho"]),
    )
    return {
        "n_rows": int(complete.sum()),
        "n_shared_ids": len(shared),
        "pairs": pairs,
        "flagged": flagged,
        "max_abs_rho": None if best is None else abs(best),
    }
