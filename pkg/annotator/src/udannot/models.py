"""Deterministic toy annotation models and the identifier registry.

Every model here is pure, seed-stable, and dependency-light so annotation
runs are reproducible offline.  Real neural models plug in through the same
three protocols (LanguageModel, Translator, Encoder); resolving an `hf:`
identifier tells the caller what is missing rather than guessing.

All models report natural-log probabilities; the annotation layer converts
to bits at emission.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

LN2 = math.log(2.0)

SUBWORD_WIDTH = 4


class ModelError(ValueError):
    """Unresolvable model identifier or unusable model configuration."""


def chunk_subwords(form: str, width: int = SUBWORD_WIDTH) -> list[str]:
    """Fixed-width character chunking; the toy stand-in for a subword
    tokenizer.  Never empty for a non-empty form."""
    if not form:
        return []
    return [form[i:i + width] for i in range(0, len(form), width)]


def _stable_unit(parts: tuple[str, ...]) -> float:
    """Deterministic hash of the parts mapped to [0, 1)."""
    digest = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2 ** 64


@runtime_checkable
class LanguageModel(Protocol):
    def score(self, context: list[str], form: str) -> list[tuple[str, float]] | None:
        """Subword pieces with natural-log probabilities for `form` given the
        preceding segment tokens; None signals a token the model cannot map
        to subwords (the caller flags it and moves on)."""


@dataclass
class FixedProbLM:
    """Assigns one fixed probability to every subword piece."""

    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ModelError(f"fixed LM probability must be in (0, 1], got {self.p}")

    def score(self, context: list[str], form: str) -> list[tuple[str, float]] | None:
        pieces = chunk_subwords(form)
        if not pieces:
            return None
        return [(piece, math.log(self.p)) for piece in pieces]


@dataclass
class HashedCharLM:
    """Pseudo-random but reproducible per-piece probabilities derived from a
    stable hash of (previous token, piece, seed); spread over [0.05, 0.95]."""

    seed: int = 0

    def score(self, context: list[str], form: str) -> list[tuple[str, float]] | None:
        pieces = chunk_subwords(form)
        if not pieces:
            return None
        previous = context[-1] if context else "<s>"
        out = []
        for i, piece in enumerate(pieces):
            unit = _stable_unit((str(self.seed), previous, form, str(i), piece))
            out.append((piece, math.log(0.05 + 0.90 * unit)))
        return out


@dataclass
class StepScore:
    """One teacher-forced decoding step: the argmax token and the natural-log
    probability the model gave the gold token."""

    predicted: str
    gold_ln_prob: float


@runtime_checkable
class Translator(Protocol):
    max_len: int

    def force_decode(self, source: list[str], gold: list[str]) -> list[StepScore]:
        """Teacher-forced pass over `gold` conditioned on the full source;
        one StepScore per gold token."""


@dataclass
class LexiconTranslator:
    """Word-for-word translator over a source->target lexicon.

    The expected output is the lexicon image of the source tokens in order
    (identity for unmapped tokens), so when the gold target equals that
    sequence the argmax path reproduces it exactly.  Scoring is a softmax
    over the closed vocabulary with the expected token boosted.
    """

    lexicon: dict[str, str] = field(default_factory=dict)
    boost: float = 4.0
    max_len: int = 256

    EOS = "</s>"
    UNK = "<unk>"

    def expected(self, source: list[str]) -> list[str]:
        return [self.lexicon.get(form, form) for form in source]

    def _vocab(self, source: list[str]) -> list[str]:
        vocab = set(self.expected(source)) | {self.EOS, self.UNK}
        return sorted(vocab)

    def force_decode(self, source: list[str], gold: list[str]) -> list[StepScore]:
        if len(gold) > self.max_len:
            raise SequenceOverflow(len(gold), self.max_len)
        expected = self.expected(source)
        vocab = self._vocab(source)
        steps = []
        for position, gold_form in enumerate(gold):
            target = expected[position] if position < len(expected) else self.EOS
            denominator = math.exp(self.boost) + (len(vocab) - 1)
            scored = gold_form if gold_form in vocab else self.UNK
            numerator = math.exp(self.boost) if scored == target else 1.0
            steps.append(
                StepScore(predicted=target, gold_ln_prob=math.log(numerator / denominator))
            )
        return steps


class SequenceOverflow(ValueError):
    """Gold target longer than the translator's decoding window."""

    def __init__(self, length: int, max_len: int):
        super().__init__(f"target length {length} exceeds decoding window {max_len}")
        self.length = length
        self.max_len = max_len


@runtime_checkable
class Encoder(Protocol):
    def embed(self, text: str) -> np.ndarray:
        """Unit-norm vector for a piece of text."""


@dataclass
class NgramEncoder:
    """Hashed character-n-gram bag embeddings, L2-normalized.

    Identical strings embed identically (cosine 1); sharing character
    material raises similarity, which is all the toy alignment needs.
    """

    dim: int = 64
    n: int = 3
    seed: int = 0

    def embed(self, text: str) -> np.ndarray:
        padded = f"^{text}$"
        vec = np.zeros(self.dim)
        grams = [padded[i:i + self.n] for i in range(max(1, len(padded) - self.n + 1))]
        for gram in grams:
            unit = _stable_unit((str(self.seed), gram))
            vec[int(unit * self.dim) % self.dim] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ModelError(f"cannot embed empty text {text!r}")
        return vec / norm

    def cosine(self, a: str, b: str) -> float:
        value = float(self.embed(a) @ self.embed(b))
        return min(1.0, max(0.0, value))


def _load_lexicon(path: str) -> dict[str, str]:
    lexicon: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ModelError(f"{path}:{lineno}: lexicon rows are 'source\\ttarget'")
            lexicon[cols[0]] = cols[1]
    return lexicon


def _reject_hf(identifier: str) -> None:
    if identifier.startswith("hf:"):
        raise ModelError(
            f"{identifier!r} names a transformer checkpoint; install the optional "
            "neural adapters and their model weights to use it"
        )


def resolve_lm(identifier: str) -> LanguageModel:
    """`fixed:<p>` or `hashed:<seed>`."""
    _reject_hf(identifier)
    scheme, _, arg = identifier.partition(":")
    try:
        if scheme == "fixed":
            return FixedProbLM(p=float(arg or 0.5))
        if scheme == "hashed":
            return HashedCharLM(seed=int(arg or 0))
    except ValueError as exc:
        raise ModelError(f"bad language model identifier {identifier!r}: {exc}") from None
    raise ModelError(f"unknown language model identifier {identifier!r}")


def resolve_translator(identifier: str, max_len: int = 256) -> Translator:
    """`copy` (identity lexicon) or `lexicon:<tsv path>`."""
    _reject_hf(identifier)
    scheme, _, arg = identifier.partition(":")
    if scheme == "copy":
        return LexiconTranslator(lexicon={}, max_len=max_len)
    if scheme == "lexicon":
        if not arg:
            raise ModelError("lexicon translator needs a path: 'lexicon:<tsv>'")
        return LexiconTranslator(lexicon=_load_lexicon(arg), max_len=max_len)
    raise ModelError(f"unknown translator identifier {identifier!r}")


def resolve_encoder(identifier: str) -> Encoder:
    """`ngram:<dim>`."""
    _reject_hf(identifier)
    scheme, _, arg = identifier.partition(":")
    if scheme == "ngram":
        try:
            return NgramEncoder(dim=int(arg or 64))
        except ValueError as exc:
            raise ModelError(f"bad encoder identifier {identifier!r}: {exc}") from None
    raise ModelError(f"unknown encoder identifier {identifier!r}")
