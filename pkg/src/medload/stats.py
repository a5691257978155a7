"""Rank and significance statistics.

Spearman correlation with a two-sided t-approximated p-value, Mann-Whitney U
with tie and continuity corrections, single-feature cross-validated macro-F1,
and regression metrics.  The Student-t tail is evaluated through a native
regularized incomplete beta (Lentz continued fraction), so no statistics
package is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DEFAULT_ALPHA = 0.05


class UndefinedStatistic(ValueError):
    pass


# ---------------------------------------------------------------------------
# Special functions


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    max_iter = 300
    eps = 1e-15
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T_df > t) for t >= 0."""
    if t < 0:
        raise ValueError("one-sided tail expects t >= 0")
    x = df / (df + t * t)
    return 0.5 * incomplete_beta(df / 2.0, 0.5, x)


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Ranks


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties receiving the group average."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=np.float64)
    i = 0
    n = len(arr)
    while i < n:
        j = i
        while j + 1 < n and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise UndefinedStatistic("correlation of a constant vector is undefined")
    return float(dx @ dy) / denom


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """(rho, two-sided p).  rho is Pearson on mid-ranks; p comes from
    t = rho*sqrt((n-2)/(1-rho^2)) against Student-t with n-2 df."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedStatistic("spearman is undefined for constant input")
    rho = _pearson(midranks(x), midranks(y))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = abs(rho) * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, min(1.0, 2.0 * student_t_sf(t, n - 2))


# ---------------------------------------------------------------------------
# Mann-Whitney


@dataclass
class TestResult:
    __test__ = False  # keep pytest from collecting this as a test class

    statistic: float
    p_value: float
    direction: str
    n: tuple[int, int]


def mann_whitney(a: Sequence[float], b: Sequence[float], alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Two-sided U test, normal approximation with tie and continuity
    corrections.  statistic is U of `a`; direction says whether `a` ranks
    significantly higher (up) or lower (down) at the given alpha."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 3 or n2 < 3:
        raise ValueError("both samples need at least 3 observations")
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    mu = n1 * n2 / 2.0
    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts.astype(np.float64) ** 3 - counts).sum())
    sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0.0:
        return TestResult(statistic=u1, p_value=1.0, direction="none", n=(n1, n2))
    z = (max(u1, u2) - mu - 0.5) / math.sqrt(sigma_sq)
    p = min(1.0, 2.0 * normal_sf(z))
    direction = "none"
    if p <= alpha and u1 != u2:
        direction = "up" if u1 > u2 else "down"
    return TestResult(statistic=u1, p_value=p, direction=direction, n=(n1, n2))


# ---------------------------------------------------------------------------
# Cross-validated single-feature score


def _default_trainer(x_train: np.ndarray, y_train: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    # deferred so pure rank statistics never pay the solver import
    from medload.ml import train_linear_svc

    mean = float(x_train.mean())
    sd = float(x_train.std())
    model = train_linear_svc(((x_train - mean) / sd).reshape(-1, 1), y_train, seed=0)

    def predict(x_test: np.ndarray) -> np.ndarray:
        return model.predict(((x_test - mean) / sd).reshape(-1, 1))

    return predict


def univariate_f1(column, labels, plan, trainer=None) -> float | None:
    """Mean macro-F1 of a one-feature classifier over the fold plan, or None
    when the metric is undefined: some fold trains on a single class or a
    constant column, or predicts only one class."""
    from medload.ml import macro_f1

    column = np.asarray(column, dtype=np.float64)
    labels = np.asarray(labels)
    class_set = sorted(set(labels.tolist()))
    if len(class_set) != 2:
        raise ValueError(f"labels must be binary, got {class_set}")
    scores = []
    for train_idx, test_idx in plan.splits():
        y_train = labels[train_idx]
        if len(set(y_train.tolist())) < 2:
            return None
        x_train = column[train_idx]
        if float(x_train.max()) == float(x_train.min()):
            return None
        fit = trainer if trainer is not None else _default_trainer
        predict = fit(x_train, y_train)
        preds = np.asarray(predict(column[test_idx]))
        if len(set(preds.tolist())) < 2:
            return None
        scores.append(macro_f1(preds.tolist(), labels[test_idx].tolist(), labels=class_set))
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Regression metrics


@dataclass
class RegressionMetrics:
    rho: float | None
    p_value: float | None
    r2: float
    mae: float


def regression_metrics(pred: Sequence[float], truth: Sequence[float]) -> RegressionMetrics:
    """rho/p per spearman (None when undefined, e.g. constant predictions),
    R^2 = 1 - SS_res/SS_tot, MAE = mean |pred - truth|."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be equal-length vectors")
    if len(pred) < 3:
        raise ValueError("need at least 3 observations")
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise UndefinedStatistic("R^2 is undefined for constant truth")
    ss_res = float(((truth - pred) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot
    mae = float(np.abs(pred - truth).mean())
    try:
        rho, p = spearman(pred, truth)
    except UndefinedStatistic:
        rho, p = None, None
    return RegressionMetrics(rho=rho, p_value=p, r2=r2, mae=mae)
