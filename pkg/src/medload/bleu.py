"""Segment-level BLEU for teacher-forced decoder predictions.

Standard sentence-BLEU: clipped n-gram precisions up to order 4, geometric
mean over the effective order (orders with at least one hypothesis n-gram),
exponential smoothing for zero-match counts (the k-th zero contributes
1/(2^k * total)), and brevity penalty min(1, e^(1-|ref|/|hyp|)).  Scores are
percentages in [0, 100].
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

MAX_ORDER = 4


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def pseudo_bleu(reference: Sequence[str], prediction: Sequence[str]) -> float:
    """BLEU of `prediction` against a single `reference`, in [0, 100].

    Empty prediction scores 0; empty reference is an error.
    """
    if not reference:
        raise ValueError("empty reference")
    if not prediction:
        return 0.0

    smooth = 1.0
    log_sum = 0.0
    effective_order = 0
    for order in range(1, MAX_ORDER + 1):
        total = len(prediction) - order + 1
        if total <= 0:
            break
        effective_order = order
        ref_counts = _ngram_counts(reference, order)
        correct = 0
        for gram, count in _ngram_counts(prediction, order).items():
            correct += min(count, ref_counts.get(gram, 0))
        if correct == 0:
            smooth *= 2.0
            precision = 100.0 / (smooth * total)
        else:
            precision = 100.0 * correct / total
        log_sum += math.log(precision)

    score = math.exp(log_sum / effective_order)
    if len(prediction) < len(reference):
        score *= math.exp(1.0 - len(reference) / len(prediction))
    return score
