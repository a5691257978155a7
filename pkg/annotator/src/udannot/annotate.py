"""The three annotation passes: LM surprisal, forced decoding, alignment.

Each pass mutates token MISC in place and reports per-item problems as flag
strings instead of aborting, so one bad token or pair never sinks a corpus
run.  All emitted numbers are bits (log base 2); models speak natural logs
and are converted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from udannot.conllu import Document, Segment, Sentence
from udannot.models import LN2, Encoder, LanguageModel, SequenceOverflow, Translator, chunk_subwords

SOFTMAX_THRESHOLD = 1e-2


@dataclass
class PairHandle:
    """One manifest row resolved to its segments."""

    doc_id: str
    src_seg: str
    tgt_seg: str
    source: Segment
    target: Segment

    @property
    def uid(self) -> str:
        return f"{self.doc_id}/{self.src_seg}->{self.tgt_seg}"


@dataclass
class OpStats:
    annotated: int = 0
    flags: list[str] = field(default_factory=list)


def _bits(ln_prob: float) -> float:
    return max(0.0, -ln_prob / LN2)


def _set_surprisal(token, total_key: str, sub_key: str, sub_bits: list[float]) -> None:
    # total is the literal sum of the emitted parts, so the additivity
    # check downstream sees a difference of exactly zero after re-parsing
    token.misc[sub_key] = ",".join(repr(b) for b in sub_bits)
    token.misc[total_key] = repr(math.fsum(sub_bits))


def annotate_surprisal(documents: list[Document], lm: LanguageModel) -> OpStats:
    """Srp/SrpSub per token; context is the preceding tokens of the segment."""
    stats = OpStats()
    for doc in documents:
        for seg in doc.segments:
            context: list[str] = []
            for token in seg.tokens():
                scored = lm.score(context, token.form)
                context.append(token.form)
                if scored is None:
                    stats.flags.append(
                        f"surprisal {doc.doc_id}/{seg.seg_id} token {token.id} "
                        f"({token.form!r}): subword alignment failed"
                    )
                    continue
                _set_surprisal(token, "Srp", "SrpSub", [_bits(lnp) for _, lnp in scored])
                stats.annotated += 1
    return stats


def annotate_mt(pairs: list[PairHandle], translator: Translator) -> OpStats:
    """MtSrp/MtSrpSub/Pred on target tokens from a teacher-forced pass."""
    stats = OpStats()
    for pair in pairs:
        source_forms = [tok.form for tok in pair.source.tokens()]
        gold_tokens = pair.target.tokens()
        try:
            steps = translator.force_decode(source_forms, [t.form for t in gold_tokens])
        except SequenceOverflow as overflow:
            stats.flags.append(f"mt {pair.uid}: {overflow}")
            continue
        for token, step in zip(gold_tokens, steps):
            pieces = chunk_subwords(token.form) or [token.form]
            total_bits = _bits(step.gold_ln_prob)
            _set_surprisal(
                token, "MtSrp", "MtSrpSub", [total_bits / len(pieces)] * len(pieces)
            )
            token.misc["Pred"] = step.predicted
            stats.annotated += 1
    return stats


def _piece_table(segment: Segment) -> tuple[list[str], list[int]]:
    """All subword pieces of the segment with the flat token index owning
    each piece."""
    pieces: list[str] = []
    owners: list[int] = []
    for index, token in enumerate(segment.tokens()):
        for piece in chunk_subwords(token.form):
            pieces.append(piece)
            owners.append(index)
    return pieces, owners


def _softmax_rows(sim: np.ndarray) -> np.ndarray:
    shifted = sim - sim.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def annotate_alignment(
    pairs: list[PairHandle],
    encoder: Encoder,
    threshold: float = SOFTMAX_THRESHOLD,
) -> tuple[list[tuple], OpStats]:
    """Word links per pair from bidirectional piece-level softmax.

    A piece pair survives when both direction probabilities clear the
    threshold; surviving pieces aggregate to word pairs scored by the
    geometric mean of the two direction means, always in [0, 1].  Each
    linked token also gets the best incident score as MISC Align.
    """
    stats = OpStats()
    links: list[tuple] = []
    for pair in pairs:
        try:
            rows = _align_pair(pair, encoder, threshold)
        except Exception as exc:
            stats.flags.append(f"alignment {pair.uid}: {exc}")
            continue
        links.extend(rows)
        stats.annotated += 1
    return links, stats


def _align_pair(pair: PairHandle, encoder: Encoder, threshold: float) -> list[tuple]:
    src_pieces, src_owner = _piece_table(pair.source)
    tgt_pieces, tgt_owner = _piece_table(pair.target)
    src_vecs = np.stack([encoder.embed(p) for p in src_pieces])
    tgt_vecs = np.stack([encoder.embed(p) for p in tgt_pieces])
    sim = src_vecs @ tgt_vecs.T
    forward = _softmax_rows(sim)
    backward = _softmax_rows(sim.T).T
    keep = (forward > threshold) & (backward > threshold)

    by_word: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for i, j in zip(*np.nonzero(keep)):
        by_word.setdefault((src_owner[i], tgt_owner[j]), []).append(
            (float(forward[i, j]), float(backward[i, j]))
        )
    src_tokens = pair.source.tokens()
    tgt_tokens = pair.target.tokens()
    best: dict[tuple[str, int], float] = {}
    rows = []
    for (wi, wj), probs in sorted(by_word.items()):
        fwd = sum(p[0] for p in probs) / len(probs)
        bwd = sum(p[1] for p in probs) / len(probs)
        score = min(1.0, math.sqrt(fwd * bwd))
        rows.append((pair.doc_id, pair.src_seg, pair.tgt_seg, wi, wj, score))
        best[("src", wi)] = max(best.get(("src", wi), 0.0), score)
        best[("tgt", wj)] = max(best.get(("tgt", wj), 0.0), score)
    for (side, index), score in best.items():
        token = (src_tokens if side == "src" else tgt_tokens)[index]
        token.misc["Align"] = repr(score)
    return rows


def subtree_signature(sentence: Sentence, head_id: int) -> str:
    """Depth-1 signature: head upos plus the sorted (deprel, child upos)
    multiset, e.g. "VERB(nsubj:NOUN,obj:PRON)"."""
    head = sentence.token(head_id)
    parts = sorted(
        f"{sentence.token(c).deprel}:{sentence.token(c).upos}"
        for c in sentence.children(head_id)
    )
    return f"{head.upos}({','.join(parts)})"


def subtree_links(
    pairs: list[PairHandle],
    word_links: list[tuple],
    encoder: Encoder,
) -> list[tuple]:
    """One row per source head with dependents: the head's signature against
    the signature of its best word-aligned target token, scored by encoder
    cosine of the signature strings."""
    best_link: dict[tuple[str, str, str, int], tuple[float, int]] = {}
    for doc_id, src_seg, tgt_seg, src_tok, tgt_tok, score in word_links:
        key = (doc_id, src_seg, tgt_seg, src_tok)
        if key not in best_link or (score, -tgt_tok) > (best_link[key][0], -best_link[key][1]):
            best_link[key] = (score, tgt_tok)

    rows = []
    for pair in pairs:
        tgt_offset_to_sentence: list[tuple[Sentence, int]] = []
        for sent in pair.target.sentences:
            for tok in sent.tokens:
                tgt_offset_to_sentence.append((sent, tok.id))
        offset = 0
        for sent in pair.source.sentences:
            for tok in sent.tokens:
                if not sent.children(tok.id):
                    offset += 1
                    continue
                link = best_link.get((pair.doc_id, pair.src_seg, pair.tgt_seg, offset))
                offset += 1
                if link is None:
                    continue
                tgt_sent, tgt_id = tgt_offset_to_sentence[link[1]]
                src_sig = subtree_signature(sent, tok.id)
                tgt_sig = subtree_signature(tgt_sent, tgt_id)
                cosine = min(1.0, max(0.0, float(encoder.embed(src_sig) @ encoder.embed(tgt_sig))))
                rows.append(
                    (pair.doc_id, pair.src_seg, pair.tgt_seg, src_sig, tgt_sig, cosine)
                )
    return rows
