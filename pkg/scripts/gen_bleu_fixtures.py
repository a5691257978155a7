#!/usr/bin/env python3
"""Generate frozen sentence-BLEU fixtures with an independent reference scorer.

This reference implementation is deliberately separate from
medload.bleu.pseudo_bleu: it exists so the production scorer can be tested
against values computed BEFORE the production code was written.  Semantics:
clipped n-gram precisions up to order 4, effective order for short
hypotheses, exponential smoothing (first zero count contributes
1/(2*total), next 1/(4*total), ...), brevity penalty min(1, e^(1-|ref|/|hyp|)).

Run from the repo root:  python3 scripts/gen_bleu_fixtures.py
Writes tests/data/bleu_fixtures.json.
"""

import json
import math
import os
import random
from collections import Counter


def reference_sentence_bleu(ref: list[str], hyp: list[str]) -> float:
    if not ref:
        raise ValueError("empty reference")
    if not hyp:
        return 0.0
    log_precision_sum = 0.0
    effective_order = 0
    smoothing = 1.0
    for order in range(1, 5):
        hyp_ngrams = Counter(tuple(hyp[i : i + order]) for i in range(len(hyp) - order + 1))
        ref_ngrams = Counter(tuple(ref[i : i + order]) for i in range(len(ref) - order + 1))
        total = sum(hyp_ngrams.values())
        if total == 0:
            break
        effective_order = order
        clipped = sum(min(count, ref_ngrams[gram]) for gram, count in hyp_ngrams.items())
        if clipped == 0:
            smoothing *= 2.0
            precision = 100.0 / (smoothing * total)
        else:
            precision = 100.0 * clipped / total
        log_precision_sum += math.log(precision)
    if effective_order == 0:
        return 0.0
    brevity = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return brevity * math.exp(log_precision_sum / effective_order)


def main() -> None:
    rng = random.Random(20240521)
    vocab = ["the", "a", "cat", "dog", "sat", "ran", "on", "under", "mat", "rug", "big", "small", "today", "now"]

    cases: list[tuple[list[str], list[str]]] = [
        ("the cat sat on the mat".split(), "the cat the cat on the mat".split()),
        ("the cat sat on the mat".split(), "the cat sat on the mat".split()),
        (["hello"], ["hello"]),
        (["hello"], ["goodbye"]),
        ("a b".split(), "a b".split()),
        ("a b c".split(), "c b a".split()),
        ("the quick brown fox jumps over the lazy dog".split(), "the quick brown fox".split()),
        ("one two".split(), "one two three four five six".split()),
        ("x y z w".split(), ["x"]),
        ("repeat repeat repeat repeat".split(), "repeat repeat".split()),
    ]
    while len(cases) < 50:
        ref_len = rng.randint(1, 12)
        hyp_len = rng.randint(1, 12)
        ref = [rng.choice(vocab) for _ in range(ref_len)]
        if rng.random() < 0.3:
            hyp = list(ref)
            for _ in range(rng.randint(0, 3)):
                pos = rng.randrange(len(hyp))
                hyp[pos] = rng.choice(vocab)
        else:
            hyp = [rng.choice(vocab) for _ in range(hyp_len)]
        cases.append((ref, hyp))

    fixtures = [
        {"reference": ref, "prediction": hyp, "score": reference_sentence_bleu(ref, hyp)}
        for ref, hyp in cases
    ]
    out_path = os.path.join(os.path.dirname(__file__), "..", "tests", "data", "bleu_fixtures.json")
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(fixtures, fh, indent=1)
    print(f"wrote {len(fixtures)} fixtures to {out_path}")


if __name__ == "__main__":
    main()
