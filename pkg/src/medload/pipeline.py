"""Leakage-safe modeling pipelines over feature matrices.

Both tasks share one per-fold recipe: conditional log1p on skewed columns,
a zero-variance pre-drop, collinearity filtering ranked by a task-specific
score, median imputation with standardization, then RFECV and a linear SVM.
Every fitted decision (skew flags, medians, scales, drops, selected features,
calibration) is learned on the training fold only.  Row-local steps with no
fitted state (per-word normalization, document averaging) run once up front.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from medload.difficulty import DIFFICULTY_NAMES, DIFFICULTY_NORMALIZATION, extract_difficulty_vector
from medload.ml import (
    LinearModel,
    calibrated_svc,
    group_kfold,
    linear_shap,
    macro_f1,
    rfecv,
    train_linear_svr,
)
from medload.preprocess import (
    ConditionalLog1p,
    FeatureMatrix,
    Standardizer,
    collinearity_filter,
    normalize,
    target_correlation_scores,
    univariate_scores,
)
from medload.stats import regression_metrics
from medload.translationese import REGISTRY, extract_translationese_vector, load_lexicon


def registry_kinds() -> dict[str, str]:
    """Normalization kind per translationese feature name."""
    return {spec.name: spec.normalization for spec in REGISTRY}


def difficulty_kinds() -> dict[str, str]:
    return dict(DIFFICULTY_NORMALIZATION)


# ---------------------------------------------------------------------------
# Matrix construction


def matrix_from_segments(segments, language: str | None = None) -> FeatureMatrix:
    """Raw translationese feature matrix: one row per segment, grouped by
    document, with non-punctuation word counts for later normalization."""
    segments = list(segments)
    if not segments:
        raise ValueError("no segments to extract from")
    lexicons: dict[str, object] = {}
    ids, groups, counts, rows = [], [], [], []
    names = [spec.name for spec in REGISTRY]
    for seg in segments:
        lang = language or seg.language
        if lang not in lexicons:
            lexicons[lang] = load_lexicon(lang)
        vector = extract_translationese_vector(seg, lang, lexicon=lexicons[lang])
        ids.append(seg.uid)
        groups.append(seg.doc_id)
        counts.append(seg.word_count)
        rows.append([vector[name] for name in names])
    return FeatureMatrix(
        ids=ids,
        groups=groups,
        names=names,
        data=np.array(rows, dtype=np.float64),
        stage="raw",
        word_counts=np.array(counts, dtype=np.int64),
    )


def matrix_from_pairs(pairs, tables, fallbacks=None) -> FeatureMatrix:
    """Raw difficulty matrix: one row per pair keyed by the target segment,
    NaN where an indicator is undefined; word counts come from the source
    side, which is what the per-word indicators count."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to extract from")
    ids, groups, counts, rows = [], [], [], []
    for pair in pairs:
        vector = extract_difficulty_vector(pair, tables, fallbacks=fallbacks)
        ids.append(pair.target.uid)
        groups.append(pair.target.doc_id)
        counts.append(pair.source.word_count)
        rows.append([
            vector.values[name] if vector.values[name] is not None else math.nan
            for name in DIFFICULTY_NAMES
        ])
    return FeatureMatrix(
        ids=ids,
        groups=groups,
        names=list(DIFFICULTY_NAMES),
        data=np.array(rows, dtype=np.float64),
        stage="raw",
        word_counts=np.array(counts, dtype=np.int64),
    )


def ensure_normalized(matrix: FeatureMatrix, kinds: dict[str, str] | None) -> FeatureMatrix:
    if matrix.stage == "raw":
        if kinds is None:
            raise ValueError("raw matrix requires normalization kinds")
        return normalize(matrix, kinds)
    if matrix.stage != "normalized":
        raise ValueError(f"expected a raw or normalized matrix, got stage {matrix.stage!r}")
    return matrix


def aggregate_documents(
    matrix: FeatureMatrix, labels: Sequence | None = None
) -> tuple[FeatureMatrix, np.ndarray | None]:
    """Collapse a normalized segment matrix to one row per document by
    unweighted column means (NaN-aware).  Labels, when given, must be
    constant within each document."""
    if matrix.stage != "normalized":
        raise ValueError("aggregate after normalization; got stage " + repr(matrix.stage))
    order: list[str] = []
    rows_of: dict[str, list[int]] = {}
    for i, group in enumerate(matrix.groups):
        if group not in rows_of:
            rows_of[group] = []
            order.append(group)
        rows_of[group].append(i)
    data = np.empty((len(order), len(matrix.names)))
    doc_labels = []
    for r, group in enumerate(order):
        idx = rows_of[group]
        data[r] = np.nanmean(matrix.data[idx], axis=0)
        if labels is not None:
            seen = {labels[i] for i in idx}
            if len(seen) != 1:
                raise ValueError(f"document {group} mixes labels {sorted(map(str, seen))}")
            doc_labels.append(seen.pop())
    doc_matrix = FeatureMatrix(
        ids=list(order),
        groups=list(order),
        names=list(matrix.names),
        data=data,
        stage="normalized",
    )
    return doc_matrix, (np.array(doc_labels) if labels is not None else None)


# ---------------------------------------------------------------------------
# Per-fold preprocessing


def _imputed(matrix: FeatureMatrix) -> tuple[FeatureMatrix, list[str]]:
    """Median-impute with the matrix's own columns; returns the imputed copy
    and the names that stay unusable (all-NaN or constant after imputation)."""
    data = matrix.data.copy()
    dead = []
    for j, name in enumerate(matrix.names):
        col = data[:, j]
        defined = col[~np.isnan(col)]
        if defined.size == 0:
            dead.append(name)
            continue
        col[np.isnan(col)] = float(np.median(defined))
        if defined.size and float(col.max()) == float(col.min()):
            dead.append(name)
    kept = FeatureMatrix(
        ids=list(matrix.ids),
        groups=list(matrix.groups),
        names=list(matrix.names),
        data=data,
        stage=matrix.stage,
        word_counts=matrix.word_counts,
    )
    return kept, dead


@dataclass
class FoldDetail:
    """Everything one fold contributes to the report."""

    fold: int
    score: float
    input_names: list[str]
    selected: list[str]
    dropped_unusable: list[str]
    dropped_collinear: list[str]
    test_ids: list[str]
    test_docs: list[str]
    model: LinearModel
    shap_mean_abs: dict[str, float]
    shap_additivity_max: float


@dataclass
class PipelineOutcome:
    task: str
    k: int
    seed: int
    folds: list[FoldDetail]
    mean_score: float
    sd_score: float
    oof_scores: dict[str, float]
    oof_predictions: dict[str, object]
    metrics: dict
    manifest: dict

    def fold_models(self) -> list[LinearModel]:
        return [f.model for f in self.folds]


def _prepare_fold(
    train: FeatureMatrix,
    test: FeatureMatrix,
    ranking: Callable[[FeatureMatrix], dict[str, float | None]],
    r_max: float,
) -> tuple[FeatureMatrix, FeatureMatrix, dict]:
    log1p = ConditionalLog1p().fit(train)
    train_t = log1p.transform(train)
    test_t = log1p.transform(test)

    train_imp, dead = _imputed(train_t)
    if dead:
        train_t = train_t.drop_columns(dead)
        test_t = test_t.drop_columns(dead)
        train_imp = train_imp.drop_columns(dead)
    if not train_t.names:
        raise ValueError("no usable features remain in the training fold")

    scores = ranking(train_imp)
    kept = set(collinearity_filter(train_imp, scores, r_max=r_max))
    collinear = [n for n in train_t.names if n not in kept]
    if collinear:
        train_t = train_t.drop_columns(collinear)
        test_t = test_t.drop_columns(collinear)

    scaler = Standardizer().fit(train_t)
    info = {
        "dropped_unusable": dead,
        "dropped_collinear": collinear,
        "log_applied": sorted(n for n, flag in log1p.apply_log.items() if flag),
    }
    return scaler.transform(train_t), scaler.transform(test_t), info


def _inner_plan(groups: Sequence[str], k: int, seed: int):
    distinct = len(set(groups))
    if distinct < 2:
        raise ValueError("need at least 2 documents inside a training fold")
    return group_kfold(groups, k=min(k, distinct), seed=seed)


def _shap_summary(model: LinearModel, X_test: np.ndarray, X_train: np.ndarray) -> tuple[dict[str, float], float]:
    attr = linear_shap(model, X_test, X_train)
    mean_abs = np.abs(attr.values).mean(axis=0)
    decisions = model.decision_function(X_test)
    additivity = float(np.abs(attr.base_value + attr.values.sum(axis=1) - decisions).max())
    return {n: float(v) for n, v in zip(attr.feature_names, mean_abs)}, additivity


# ---------------------------------------------------------------------------
# Classification


def classify_pipeline(
    matrix: FeatureMatrix,
    labels: Sequence,
    k: int = 10,
    seed: int = 0,
    r_max: float = 0.85,
    min_features: int = 2,
    calib_splits: int = 3,
    rfecv_folds: int = 10,
    kinds: dict[str, str] | None = None,
    shared_drop: Sequence[str] = (),
    jobs: int = 1,
    backend: str = "auto",
) -> PipelineOutcome:
    """Grouped k-fold classification with per-fold preprocessing, RFECV and
    Platt-calibrated probabilities; returns out-of-fold scores for every row.

    `shared_drop` applies a dataset-global decision (the cross-dataset
    low-variance cut) before any fold-level fitting.
    """
    labels = np.asarray(labels)
    if len(labels) != len(matrix.ids):
        raise ValueError("one label per row required")
    classes = sorted(set(labels.tolist()))
    if len(classes) != 2:
        raise ValueError(f"need exactly 2 classes, got {classes}")
    work = ensure_normalized(matrix, kinds)
    if shared_drop:
        work = work.drop_columns(shared_drop)
    plan = group_kfold(work.groups, k=k, seed=seed)

    def run_fold(args):
        fold, (train_idx, test_idx) = args
        train_m = work.subset_rows(train_idx)
        test_m = work.subset_rows(test_idx)
        y_train = labels[train_idx]
        y_test = labels[test_idx]
        if len(set(y_train.tolist())) < 2 or len(set(y_test.tolist())) < 2:
            raise ValueError(f"fold {fold} lost a class; provide more balanced documents")

        def ranking(imputed: FeatureMatrix):
            inner = _inner_plan(imputed.groups, rfecv_folds, seed)
            return univariate_scores(imputed, y_train, inner)

        train_s, test_s, info = _prepare_fold(train_m, test_m, ranking, r_max)
        inner = _inner_plan(train_s.groups, rfecv_folds, seed)
        selection = rfecv(
            "svc", train_s.data, y_train, inner, train_s.names,
            min_features=min_features, seed=seed, backend=backend,
        )
        train_sel = train_s.keep_columns(selection.selected)
        test_sel = test_s.keep_columns(selection.selected)
        model = calibrated_svc(
            train_sel.data, y_train, train_sel.groups,
            seed=seed, n_splits=calib_splits,
            feature_names=selection.selected, backend=backend,
        )
        predictions = model.predict(test_sel.data)
        probabilities = model.predict_proba(test_sel.data)
        shap_means, additivity = _shap_summary(model, test_sel.data, train_sel.data)
        detail = FoldDetail(
            fold=fold,
            score=macro_f1(predictions.tolist(), y_test.tolist(), labels=classes),
            input_names=train_s.names,
            selected=selection.selected,
            dropped_unusable=info["dropped_unusable"],
            dropped_collinear=info["dropped_collinear"],
            test_ids=test_m.ids,
            test_docs=sorted(set(test_m.groups)),
            model=model,
            shap_mean_abs=shap_means,
            shap_additivity_max=additivity,
        )
        return detail, dict(zip(test_m.ids, probabilities)), dict(zip(test_m.ids, predictions))

    results = _run_folds(run_fold, plan, jobs)
    folds = [r[0] for r in results]
    oof_scores: dict[str, float] = {}
    oof_predictions: dict[str, object] = {}
    for _, probs, preds in results:
        oof_scores.update(probs)
        oof_predictions.update(preds)
    fold_scores = [f.score for f in folds]
    metrics = {
        "macro_f1_mean": float(np.mean(fold_scores)),
        "macro_f1_sd": float(np.std(fold_scores, ddof=1)) if len(fold_scores) > 1 else 0.0,
    }
    manifest = _manifest(
        task="classify", k=k, seed=seed, r_max=r_max, min_features=min_features,
        folds=folds, n_rows=len(work.ids), n_features=len(work.names),
        extra={
            "classes": classes,
            "calib_splits": calib_splits,
            "rfecv_folds": rfecv_folds,
            "shared_drop": sorted(shared_drop),
        },
    )
    return PipelineOutcome(
        task="classify", k=k, seed=seed, folds=folds,
        mean_score=metrics["macro_f1_mean"], sd_score=metrics["macro_f1_sd"],
        oof_scores=oof_scores, oof_predictions=oof_predictions,
        metrics=metrics, manifest=manifest,
    )


# ---------------------------------------------------------------------------
# Regression


def regress_pipeline(
    matrix: FeatureMatrix,
    targets: Sequence[float],
    k: int = 10,
    seed: int = 0,
    r_max: float = 0.85,
    min_features: int = 2,
    rfecv_folds: int = 10,
    epsilon: float = 0.01,
    kinds: dict[str, str] | None = None,
    jobs: int = 1,
    backend: str = "auto",
) -> PipelineOutcome:
    """Grouped k-fold epsilon-SVR with the shared preprocessing recipe;
    collinearity ranking uses |Spearman| against the target.

    The default tube width suits targets on a unit-interval scale such as
    translatedness scores; a 0.1 tube would swallow most of their spread.
    """
    y = np.asarray(targets, dtype=np.float64)
    if len(y) != len(matrix.ids):
        raise ValueError("one target per row required")
    if not np.isfinite(y).all():
        raise ValueError("targets contain NaN or infinite values")
    work = ensure_normalized(matrix, kinds)
    plan = group_kfold(work.groups, k=k, seed=seed)

    def run_fold(args):
        fold, (train_idx, test_idx) = args
        train_m = work.subset_rows(train_idx)
        test_m = work.subset_rows(test_idx)
        y_train = y[train_idx]
        y_test = y[test_idx]

        def ranking(imputed: FeatureMatrix):
            return target_correlation_scores(imputed, y_train)

        train_s, test_s, info = _prepare_fold(train_m, test_m, ranking, r_max)
        inner = _inner_plan(train_s.groups, rfecv_folds, seed)
        selection = rfecv(
            "svr", train_s.data, y_train, inner, train_s.names,
            min_features=min_features, epsilon=epsilon, seed=seed, backend=backend,
        )
        train_sel = train_s.keep_columns(selection.selected)
        test_sel = test_s.keep_columns(selection.selected)
        model = train_linear_svr(
            train_sel.data, y_train, epsilon=epsilon, seed=seed,
            feature_names=selection.selected, backend=backend,
        )
        predictions = model.predict(test_sel.data)
        ss_tot = float(((y_test - y_test.mean()) ** 2).sum())
        score = 1.0 - float(((y_test - predictions) ** 2).sum()) / ss_tot if ss_tot > 0 else math.nan
        shap_means, additivity = _shap_summary(model, test_sel.data, train_sel.data)
        detail = FoldDetail(
            fold=fold,
            score=score,
            input_names=train_s.names,
            selected=selection.selected,
            dropped_unusable=info["dropped_unusable"],
            dropped_collinear=info["dropped_collinear"],
            test_ids=test_m.ids,
            test_docs=sorted(set(test_m.groups)),
            model=model,
            shap_mean_abs=shap_means,
            shap_additivity_max=additivity,
        )
        return detail, dict(zip(test_m.ids, predictions)), {}

    results = _run_folds(run_fold, plan, jobs)
    folds = [r[0] for r in results]
    oof: dict[str, float] = {}
    for _, preds, _unused in results:
        oof.update(preds)
    pred = np.array([oof[i] for i in work.ids])
    pooled = regression_metrics(pred, y)
    fold_scores = [f.score for f in folds if not math.isnan(f.score)]
    metrics = {
        "r2_fold_mean": float(np.mean(fold_scores)) if fold_scores else math.nan,
        "r2_fold_sd": float(np.std(fold_scores, ddof=1)) if len(fold_scores) > 1 else 0.0,
        "rho": pooled.rho,
        "rho_p_value": pooled.p_value,
        "r2": pooled.r2,
        "mae": pooled.mae,
    }
    manifest = _manifest(
        task="regress", k=k, seed=seed, r_max=r_max, min_features=min_features,
        folds=folds, n_rows=len(work.ids), n_features=len(work.names),
        extra={"rfecv_folds": rfecv_folds, "epsilon": epsilon},
    )
    return PipelineOutcome(
        task="regress", k=k, seed=seed, folds=folds,
        mean_score=metrics["r2_fold_mean"], sd_score=metrics["r2_fold_sd"],
        oof_scores=oof, oof_predictions=dict(oof),
        metrics=metrics, manifest=manifest,
    )


# ---------------------------------------------------------------------------
# Shared plumbing


def _run_folds(run_fold, plan, jobs: int):
    tasks = list(enumerate(plan.splits()))
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_fold, tasks))
    return [run_fold(t) for t in tasks]


def _manifest(task, k, seed, r_max, min_features, folds, n_rows, n_features, extra):
    manifest = {
        "task": task,
        "k": k,
        "seed": seed,
        "r_max": r_max,
        "min_features": min_features,
        "n_rows": n_rows,
        "n_features_in": n_features,
        "per_fold": [
            {
                "fold": f.fold,
                "score": f.score,
                "n_input": len(f.input_names),
                "n_selected": len(f.selected),
                "dropped_unusable": f.dropped_unusable,
                "dropped_collinear": f.dropped_collinear,
                "selected": f.selected,
                "test_docs": f.test_docs,
                "shap_additivity_max": f.shap_additivity_max,
            }
            for f in folds
        ],
        "shap_additivity_max": max(f.shap_additivity_max for f in folds),
    }
    manifest.update(extra)
    return manifest


def shap_mean_table(outcome: PipelineOutcome) -> dict[str, float]:
    """Mean |SHAP| per feature averaged over the folds that selected it."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for fold in outcome.folds:
        for name, value in fold.shap_mean_abs.items():
            sums[name] = sums.get(name, 0.0) + value
            counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sorted(sums)}
