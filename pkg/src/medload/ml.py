"""Linear models and model selection, implemented natively.

Classifier and regressor are L2-regularized linear SVMs (L1 hinge and
epsilon-insensitive loss) solved by dual coordinate descent.  The epoch
kernels shuffle with an in-kernel xorshift generator and run either
numba-compiled or as plain Python with identical arithmetic, so results are
bit-reproducible for a given seed on both paths.  Model selection uses
document-grouped k-fold plans, recursive feature elimination, Platt-calibrated
probabilities, and exact linear SHAP attributions.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1
DEFAULT_TOL = 1e-4
MAX_PASSES = 1000

_U64 = np.uint64
_MASK = _U64(0xFFFFFFFFFFFFFFFF)


# ---------------------------------------------------------------------------
# Grouped folds


@dataclass
class FoldPlan:
    """Row-to-fold assignment where rows of one group never split."""

    k: int
    assignments: np.ndarray
    groups: list[str]

    def splits(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for fold in range(self.k):
            test = np.flatnonzero(self.assignments == fold)
            train = np.flatnonzero(self.assignments != fold)
            yield train, test

    def test_groups(self, fold: int) -> set[str]:
        return {self.groups[i] for i in np.flatnonzero(self.assignments == fold)}


def group_kfold(groups: Sequence[str], k: int = 10, seed: int = 0) -> FoldPlan:
    """Greedy balanced assignment: groups in descending size order go to the
    currently smallest fold; equal sizes are ordered by a seeded draw."""
    groups = list(groups)
    sizes: dict[str, int] = {}
    for g in groups:
        sizes[g] = sizes.get(g, 0) + 1
    if len(sizes) < k:
        raise ValueError(f"need at least {k} distinct groups, got {len(sizes)}")
    rng = random.Random(seed)
    tie_key = {g: rng.random() for g in sizes}
    order = sorted(sizes, key=lambda g: (-sizes[g], tie_key[g]))
    fold_of: dict[str, int] = {}
    totals = [0] * k
    for g in order:
        fold = min(range(k), key=lambda f: (totals[f], f))
        fold_of[g] = fold
        totals[fold] += sizes[g]
    assignments = np.array([fold_of[g] for g in groups], dtype=np.int64)
    return FoldPlan(k=k, assignments=assignments, groups=groups)


# ---------------------------------------------------------------------------
# Metrics


def macro_f1(pred: Sequence, gold: Sequence, labels: Sequence | None = None) -> float:
    """Unweighted mean of per-class F1.  A class absent from both pred and
    gold counts as F1 = 0, so pass `labels` to pin the class set."""
    pred = list(pred)
    gold = list(gold)
    if not gold or len(pred) != len(gold):
        raise ValueError("pred and gold must be equal-length and non-empty")
    classes = list(labels) if labels is not None else sorted(set(gold) | set(pred))
    scores = []
    for cls in classes:
        tp = sum(1 for p, g in zip(pred, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(pred, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(pred, gold) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# Dual coordinate descent solvers
#
# One source implementation per kernel, compiled with numba when available
# and runnable as-is in plain Python; the shuffle is inlined xorshift64 so
# both paths visit coordinates in exactly the same order.  The entire solve
# (shuffled passes, bound shrinking, duality-gap stopping) lives inside the
# kernel: per-pass work is far too small to survive per-call dispatch and
# numpy overhead on the outside.


# Cadence for the full-problem duality-gap evaluation: every early pass,
# then every eighth, and always on the final permitted pass.
_GAP_WARMUP = 32
_GAP_EVERY = 8


def _svc_solve(X, y, alpha, w, C, Q, idx, state, tol, max_passes):
    """Dual coordinate descent for the hinge classifier, in place.

    Runs shuffled passes over an active prefix of `idx`; coordinates provably
    stuck at a bound (projected gradient outside the previous pass's
    violation range) are swapped behind the prefix and skipped until the
    active subproblem is solved, then everything re-enters.  Stops when the
    full duality gap drops to tol * max(1, |primal|).
    Returns (passes, gap, primal, converged).
    """
    n, d = X.shape
    s = state
    n_active = n
    pg_lo = -math.inf
    pg_hi = math.inf
    gap = math.inf
    primal = math.inf
    passes = 0
    converged = False
    while passes < max_passes:
        for j in range(n_active - 1, 0, -1):
            s = (s ^ ((s << _U64(13)) & _MASK)) & _MASK
            s = (s ^ (s >> _U64(7))) & _MASK
            s = (s ^ ((s << _U64(17)) & _MASK)) & _MASK
            r = int(s % _U64(j + 1))
            tmp = idx[j]
            idx[j] = idx[r]
            idx[r] = tmp
        pg_min = math.inf
        pg_max = -math.inf
        k = 0
        while k < n_active:
            i = idx[k]
            g = 0.0
            for j in range(d):
                g += w[j] * X[i, j]
            g = g * y[i] - 1.0
            a = alpha[i]
            if a == 0.0:
                if g > pg_hi:
                    n_active -= 1
                    idx[k] = idx[n_active]
                    idx[n_active] = i
                    continue
                pg = g if g < 0.0 else 0.0
            elif a == C:
                if g < pg_lo:
                    n_active -= 1
                    idx[k] = idx[n_active]
                    idx[n_active] = i
                    continue
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            k += 1
            if pg < pg_min:
                pg_min = pg
            if pg > pg_max:
                pg_max = pg
            if pg == 0.0:
                continue
            new = a - g / Q[i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            if new == a:
                continue
            alpha[i] = new
            delta = (new - a) * y[i]
            for j in range(d):
                w[j] += delta * X[i, j]
        passes += 1
        if passes <= _GAP_WARMUP or passes % _GAP_EVERY == 0 or passes == max_passes:
            wdot = 0.0
            for j in range(d):
                wdot += w[j] * w[j]
            hinge = 0.0
            asum = 0.0
            for i in range(n):
                f = 0.0
                for j in range(d):
                    f += w[j] * X[i, j]
                m = 1.0 - y[i] * f
                if m > 0.0:
                    hinge += m
                asum += alpha[i]
            primal = 0.5 * wdot + C * hinge
            gap = primal - (asum - 0.5 * wdot)
            scale = abs(primal)
            if scale < 1.0:
                scale = 1.0
            if gap <= tol * scale:
                converged = True
                break
        if pg_max - pg_min <= tol:
            if n_active < n:
                n_active = n
            pg_lo = -math.inf
            pg_hi = math.inf
        else:
            pg_hi = pg_max if pg_max > 0.0 else math.inf
            pg_lo = pg_min if pg_min < 0.0 else -math.inf
    return passes, gap, primal, converged


def _svr_solve(X, y, beta, w, C, eps, Q, idx, state, tol, max_passes):
    """Dual coordinate descent for the epsilon-insensitive regressor.

    Same structure as the classifier solve; bound exits are judged against
    the previous pass's largest violation.
    Returns (passes, gap, primal, converged).
    """
    n, d = X.shape
    s = state
    n_active = n
    v_bar = math.inf
    gap = math.inf
    primal = math.inf
    passes = 0
    converged = False
    while passes < max_passes:
        for j in range(n_active - 1, 0, -1):
            s = (s ^ ((s << _U64(13)) & _MASK)) & _MASK
            s = (s ^ (s >> _U64(7))) & _MASK
            s = (s ^ ((s << _U64(17)) & _MASK)) & _MASK
            r = int(s % _U64(j + 1))
            tmp = idx[j]
            idx[j] = idx[r]
            idx[r] = tmp
        v_max = 0.0
        k = 0
        while k < n_active:
            i = idx[k]
            g = -y[i]
            for j in range(d):
                g += w[j] * X[i, j]
            gp = g + eps
            gn = g - eps
            b = beta[i]
            violation = 0.0
            if b == 0.0:
                if gp < 0.0:
                    violation = -gp
                elif gn > 0.0:
                    violation = gn
                elif gp > v_bar and gn < -v_bar:
                    n_active -= 1
                    idx[k] = idx[n_active]
                    idx[n_active] = i
                    continue
            elif b == C:
                if gp < 0.0:
                    violation = -gp
                elif gp < -v_bar:
                    n_active -= 1
                    idx[k] = idx[n_active]
                    idx[n_active] = i
                    continue
            elif b == -C:
                if gn > 0.0:
                    violation = gn
                elif gn > v_bar:
                    n_active -= 1
                    idx[k] = idx[n_active]
                    idx[n_active] = i
                    continue
            elif b > 0.0:
                violation = abs(gp)
            else:
                violation = abs(gn)
            k += 1
            if violation > v_max:
                v_max = violation
            qb = Q[i] * b
            if gp < qb:
                step = -gp / Q[i]
            elif gn > qb:
                step = -gn / Q[i]
            else:
                step = -b
            if step == 0.0:
                continue
            nb = b + step
            if nb > C:
                nb = C
            elif nb < -C:
                nb = -C
            if nb == b:
                continue
            beta[i] = nb
            delta = nb - b
            for j in range(d):
                w[j] += delta * X[i, j]
        passes += 1
        if passes <= _GAP_WARMUP or passes % _GAP_EVERY == 0 or passes == max_passes:
            wdot = 0.0
            for j in range(d):
                wdot += w[j] * w[j]
            loss = 0.0
            dlin = 0.0
            for i in range(n):
                f = 0.0
                for j in range(d):
                    f += w[j] * X[i, j]
                resid = f - y[i]
                if resid < 0.0:
                    resid = -resid
                if resid > eps:
                    loss += resid - eps
                dlin += beta[i] * y[i] - eps * abs(beta[i])
            primal = 0.5 * wdot + C * loss
            gap = primal - (dlin - 0.5 * wdot)
            scale = abs(primal)
            if scale < 1.0:
                scale = 1.0
            if gap <= tol * scale:
                converged = True
                break
        if v_max <= tol:
            if n_active < n:
                n_active = n
            v_bar = math.inf
        else:
            v_bar = v_max
    return passes, gap, primal, converged


if HAVE_NUMBA:
    _svc_solve_nb = njit(cache=True, nogil=True)(_svc_solve)
    _svr_solve_nb = njit(cache=True, nogil=True)(_svr_solve)
else:  # pragma: no cover
    _svc_solve_nb = _svc_solve
    _svr_solve_nb = _svr_solve


def _seed_state(seed: int) -> np.uint64:
    state = _U64((seed * 2654435761 + 0x9E3779B9) % (1 << 64))
    if state == _U64(0):
        state = _U64(0x9E3779B97F4A7C15)
    return state


def _augment(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.hstack([X, np.ones((X.shape[0], 1))]), dtype=np.float64)


def _solve_dual(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    C: float,
    eps: float,
    seed: int,
    tol: float,
    max_passes: int,
    backend: str,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, float, np.ndarray, dict]:
    Xa = _augment(X)
    n, d = Xa.shape
    Q = np.ascontiguousarray((Xa * Xa).sum(axis=1))
    duals = np.zeros(n) if warm_start is None else warm_start.astype(np.float64).copy()
    if kind == "svc":
        w = Xa.T @ (duals * y)
    else:
        w = Xa.T @ duals
    w = np.ascontiguousarray(w)
    idx = np.arange(n, dtype=np.int64)
    state = _seed_state(seed)
    use_numba = backend == "numba" or (backend == "auto" and HAVE_NUMBA)
    if kind == "svc":
        solve = _svc_solve_nb if use_numba else _svc_solve
        passes, gap, primal, converged = solve(
            Xa, y, duals, w, C, Q, idx, state, tol, max_passes
        )
    else:
        solve = _svr_solve_nb if use_numba else _svr_solve
        passes, gap, primal, converged = solve(
            Xa, y, duals, w, C, eps, Q, idx, state, tol, max_passes
        )
    stats = {"passes": int(passes), "gap": float(gap), "primal": float(primal), "converged": bool(converged)}
    return w[:-1].copy(), float(w[-1]), duals, stats


# ---------------------------------------------------------------------------
# Models


@dataclass
class LinearModel:
    """Fitted linear SVM (svc or svr) over named features."""

    kind: str
    feature_names: list[str]
    weights: np.ndarray
    bias: float
    C: float = DEFAULT_C
    epsilon: float | None = None
    seed: int = 0
    classes: tuple | None = None
    calibration: tuple[float, float] | None = None
    solver_stats: dict = field(default_factory=dict)
    # dual variables kept for warm starts; never serialized
    duals: np.ndarray | None = field(default=None, repr=False, compare=False)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} feature columns, got shape {X.shape}"
            )
        return X

    def decision_function(self, X) -> np.ndarray:
        return self._check(X) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        """Class labels for svc, fitted values for svr.  A calibrated
        classifier thresholds its probability at 0.5, so predictions always
        agree with the calibrated score's side of the boundary."""
        scores = self.decision_function(X)
        if self.kind == "svr":
            return scores
        neg, pos = self.classes
        if self.calibration is not None:
            return np.where(self.predict_proba(X) > 0.5, pos, neg)
        return np.where(scores > 0, pos, neg)

    def predict_proba(self, X) -> np.ndarray:
        """Calibrated probability of the positive (second) class."""
        if self.kind != "svc":
            raise ValueError("probabilities are defined for classifiers only")
        if self.calibration is None:
            raise ValueError("model is not calibrated")
        a, b = self.calibration
        f = self.decision_function(X)
        fab = a * f + b
        p = np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))
        # the sigmoid never reaches 0 or 1 exactly; keep the floats inside
        # the open interval too so log-odds of a score stay finite
        return np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))

    def to_json(self, path: str) -> None:
        payload = {
            "kind": self.kind,
            "feature_names": self.feature_names,
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "C": self.C,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "classes": list(self.classes) if self.classes is not None else None,
            "calibration": list(self.calibration) if self.calibration is not None else None,
            "solver_stats": self.solver_stats,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            kind=payload["kind"],
            feature_names=list(payload["feature_names"]),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            C=float(payload["C"]),
            epsilon=payload["epsilon"],
            seed=int(payload["seed"]),
            classes=tuple(payload["classes"]) if payload["classes"] is not None else None,
            calibration=tuple(payload["calibration"]) if payload["calibration"] is not None else None,
            solver_stats=dict(payload["solver_stats"]),
        )


def _validate_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN or infinite values")
    return X


def train_linear_svc(
    X,
    y,
    C: float = DEFAULT_C,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_passes: int = MAX_PASSES,
    feature_names: Sequence[str] | None = None,
    backend: str = "auto",
    warm_start: np.ndarray | None = None,
) -> LinearModel:
    """L1-hinge linear SVM via dual coordinate descent; the second of the two
    sorted class labels is the positive class."""
    X = _validate_matrix(X)
    y = np.asarray(y)
    classes = sorted(set(y.tolist()))
    if len(classes) != 2:
        raise ValueError(f"need exactly 2 classes, got {classes}")
    y_signed = np.where(y == classes[1], 1.0, -1.0).astype(np.float64)
    weights, bias, duals, stats = _solve_dual(
        "svc", X, y_signed, C, 0.0, seed, tol, max_passes, backend, warm_start
    )
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    model = LinearModel(
        kind="svc",
        feature_names=names,
        weights=weights,
        bias=bias,
        C=C,
        seed=seed,
        classes=(classes[0], classes[1]),
        solver_stats=stats,
        duals=duals,
    )
    return model


def train_linear_svr(
    X,
    y,
    C: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_passes: int = MAX_PASSES,
    feature_names: Sequence[str] | None = None,
    backend: str = "auto",
    warm_start: np.ndarray | None = None,
) -> LinearModel:
    """Epsilon-insensitive linear SVR via dual coordinate descent."""
    X = _validate_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(y).all():
        raise ValueError("y contains NaN or infinite values")
    weights, bias, duals, stats = _solve_dual(
        "svr", X, y, C, epsilon, seed, tol, max_passes, backend, warm_start
    )
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    model = LinearModel(
        kind="svr",
        feature_names=names,
        weights=weights,
        bias=bias,
        C=C,
        epsilon=epsilon,
        seed=seed,
        solver_stats=stats,
        duals=duals,
    )
    return model


# ---------------------------------------------------------------------------
# Platt calibration


def platt_fit(decision_values, is_positive, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid parameters (A, B) minimizing the smoothed negative
    log-likelihood of P(pos | f) = 1/(1+exp(A*f+B)), by Newton steps with
    backtracking."""
    f = np.asarray(decision_values, dtype=np.float64)
    pos = np.asarray(is_positive, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = len(f) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("calibration holdout must contain both classes")
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(pos, hi, lo)

    def objective(a: float, b: float) -> float:
        fab = a * f + b
        per = np.where(fab >= 0, t * fab + np.log1p(np.exp(-fab)), (t - 1.0) * fab + np.log1p(np.exp(fab)))
        return float(per.sum())

    sigma = 1e-12
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = objective(a, b)
    for _ in range(max_iter):
        fab = a * f + b
        p = np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))
        q = 1.0 - p
        d1 = t - p
        g1 = float((f * d1).sum())
        g2 = float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        pq = p * q
        h11 = float((f * f * pq).sum()) + sigma
        h22 = float(pq.sum()) + sigma
        h21 = float((f * pq).sum())
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nval = objective(na, nb)
            if nval < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nval
                break
            step /= 2.0
        else:
            break
    return a, b


def platt_calibrate(model: LinearModel, X_holdout, y_holdout) -> LinearModel:
    """Return a copy of the classifier carrying (A, B) fitted on holdout
    decision values."""
    if model.kind != "svc":
        raise ValueError("only classifiers are calibrated")
    decisions = model.decision_function(X_holdout)
    y = np.asarray(y_holdout)
    a, b = platt_fit(decisions, y == model.classes[1])
    return LinearModel(
        kind=model.kind,
        feature_names=list(model.feature_names),
        weights=model.weights.copy(),
        bias=model.bias,
        C=model.C,
        epsilon=model.epsilon,
        seed=model.seed,
        classes=model.classes,
        calibration=(a, b),
        solver_stats=dict(model.solver_stats),
    )


def calibrated_svc(
    X,
    y,
    groups: Sequence[str],
    C: float = DEFAULT_C,
    seed: int = 0,
    n_splits: int = 3,
    tol: float = DEFAULT_TOL,
    feature_names: Sequence[str] | None = None,
    backend: str = "auto",
) -> LinearModel:
    """Classifier trained on all rows, with Platt parameters fitted on pooled
    out-of-fold decision values from an internal grouped split."""
    X = _validate_matrix(X)
    y = np.asarray(y)
    plan = group_kfold(groups, k=n_splits, seed=seed)
    decisions = np.zeros(len(y), dtype=np.float64)
    for train_idx, test_idx in plan.splits():
        if len(set(y[train_idx].tolist())) < 2:
            raise ValueError("internal calibration split lost a class; provide more groups")
        sub = train_linear_svc(X[train_idx], y[train_idx], C=C, seed=seed, tol=tol, backend=backend)
        decisions[test_idx] = sub.decision_function(X[test_idx])
    model = train_linear_svc(
        X, y, C=C, seed=seed, tol=tol, feature_names=feature_names, backend=backend
    )
    a, b = platt_fit(decisions, y == model.classes[1])
    model.calibration = (a, b)
    return model


def translatedness_score(model: LinearModel, X) -> np.ndarray:
    """Calibrated probability of the positive (translated) class."""
    return model.predict_proba(X)


# ---------------------------------------------------------------------------
# Recursive feature elimination with CV


@dataclass
class RfecvResult:
    selected: list[str]
    best_count: int
    mean_scores: dict[int, float]
    per_fold_scores: dict[int, list[float]]


def _score_model(model: LinearModel, X_test, y_test) -> float:
    if model.kind == "svc":
        return macro_f1(model.predict(X_test).tolist(), list(y_test))
    pred = model.predict(X_test)
    truth = np.asarray(y_test, dtype=np.float64)
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("constant truth in a CV fold; R^2 undefined")
    return 1.0 - float(((truth - pred) ** 2).sum()) / ss_tot


def _train(kind, X, y, C, epsilon, seed, backend, warm_start=None):
    if kind == "svc":
        return train_linear_svc(X, y, C=C, seed=seed, backend=backend, warm_start=warm_start)
    return train_linear_svr(X, y, C=C, epsilon=epsilon, seed=seed, backend=backend, warm_start=warm_start)


def rfecv(
    kind: str,
    X,
    y,
    plan: FoldPlan,
    feature_names: Sequence[str],
    min_features: int = 2,
    step: int = 1,
    C: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
    backend: str = "auto",
) -> RfecvResult:
    """Per fold, repeatedly drop the smallest-|weight| feature and score each
    count on the held-out rows; choose the count with the best mean score
    (ties prefer fewer features), then rerun the elimination on all rows to
    name the selected set.  Never returns fewer than min_features."""
    if kind not in ("svc", "svr"):
        raise ValueError(f"unknown estimator kind {kind!r}")
    X = _validate_matrix(X)
    y = np.asarray(y)
    names = list(feature_names)
    n_features = X.shape[1]
    if len(names) != n_features:
        raise ValueError("feature_names must match X columns")
    if n_features < min_features:
        raise ValueError(f"only {n_features} features; need at least {min_features}")

    per_fold: dict[int, list[float]] = {}
    for train_idx, test_idx in plan.splits():
        active = list(range(n_features))
        duals = None
        while True:
            model = _train(kind, X[np.ix_(train_idx, active)], y[train_idx], C, epsilon, seed, backend, duals)
            duals = model.duals
            score = _score_model(model, X[np.ix_(test_idx, active)], y[test_idx])
            if not math.isfinite(score):
                raise ValueError("non-finite CV score during elimination")
            per_fold.setdefault(len(active), []).append(score)
            if len(active) <= min_features:
                break
            order = np.argsort(np.abs(model.weights), kind="stable")
            to_drop = sorted(order[: max(1, min(step, len(active) - min_features))].tolist(), reverse=True)
            for pos in to_drop:
                del active[pos]

    mean_scores = {count: float(np.mean(scores)) for count, scores in per_fold.items()}
    best_score = max(mean_scores.values())
    best_count = min(count for count, score in mean_scores.items() if score == best_score)

    active = list(range(n_features))
    duals = None
    while len(active) > best_count:
        model = _train(kind, X[:, active], y, C, epsilon, seed, backend, duals)
        duals = model.duals
        order = np.argsort(np.abs(model.weights), kind="stable")
        to_drop = sorted(order[: max(1, min(step, len(active) - best_count))].tolist(), reverse=True)
        for pos in to_drop:
            del active[pos]
    return RfecvResult(
        selected=[names[i] for i in active],
        best_count=best_count,
        mean_scores=mean_scores,
        per_fold_scores=per_fold,
    )


# ---------------------------------------------------------------------------
# Linear SHAP


@dataclass
class ShapAttribution:
    feature_names: list[str]
    values: np.ndarray
    base_value: float

    def prediction(self, row: int) -> float:
        return self.base_value + float(self.values[row].sum())


def linear_shap(model: LinearModel, X, background) -> ShapAttribution:
    """Exact linear attributions: contribution_i(x) = w_i*(x_i - mean bg_i);
    base value is the decision at the background mean."""
    X = np.asarray(X, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if X.ndim != 2 or background.ndim != 2:
        raise ValueError("X and background must be 2-dimensional")
    if X.shape[1] != len(model.feature_names) or background.shape[1] != len(model.feature_names):
        raise ValueError("feature count mismatch with the model")
    mean = background.mean(axis=0)
    values = (X - mean) * model.weights
    base = float(mean @ model.weights + model.bias)
    return ShapAttribution(feature_names=list(model.feature_names), values=values, base_value=base)
