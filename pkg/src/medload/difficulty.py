"""The 22 translation-task-difficulty indicators over segment pairs.

Source-comprehension features are computed on the source segment alone;
transfer features combine both sides through surprisal annotations, word
alignment links, a lexical translation table (entropy of translation
solutions), and teacher-forced decoder predictions (BLEU).

Per-word entropy H(T|S) = -sum P(t|S) log2 P(t|S) over the table's counts;
words that are unaligned or singletons in the table receive the fallback
value median + 2*sd of the defined per-word entropies in the subcorpus.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from medload.bleu import pseudo_bleu
from medload.conllu import Segment, SegmentPair, Sentence, Token

CONTENT_UPOS = frozenset({"NOUN", "PROPN", "VERB", "ADJ", "ADV"})
MWE_DEPRELS = frozenset({"flat", "fixed", "compound"})
CLAUSE_DEPRELS = ("csubj", "advcl", "acl", "xcomp", "ccomp")
TABLE_VARIANTS = ("lemmas", "content-lemmas", "subtrees")

DIFFICULTY_NAMES = (
    "bleu", "mean_align", "mean_align_content", "mean_cosine", "mt_AvS",
    "mt_AvS_content", "mt_AvS_subw", "src_branching", "src_gpt_AvS",
    "src_gpt_AvS_content", "src_gpt_AvS_subw", "src_lex_dens", "src_mdd",
    "src_mwe", "src_n_clauses", "src_numerals", "src_propn", "src_tree_depth",
    "src_wlen", "tot_entropy", "tot_entropy_content", "tot_entropy_trees",
)

# Normalization kinds consumed by preprocess.normalize; counts of lexical
# units are divided by the source segment's word count, everything else is
# already a mean, sum, or ratio.
DIFFICULTY_NORMALIZATION: dict[str, str] = {
    name: ("per-word" if name in ("src_mwe", "src_numerals", "src_propn") else "none")
    for name in DIFFICULTY_NAMES
}


class MissingAnnotationError(ValueError):
    pass


class EmptyFilterError(ValueError):
    pass


class AlignmentUndefinedError(ValueError):
    pass


class FallbackNeeded(Exception):
    """Lemma absent from the table or seen only once."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key


def is_content(token: Token) -> bool:
    return token.upos in CONTENT_UPOS


# ---------------------------------------------------------------------------
# Surprisal aggregation


def avg_surprisal(segment: Segment, channel: str, filter: str = "all", unit: str = "token") -> float:
    """Mean surprisal in bits over the filtered token (or flattened subword)
    set.  channel selects the annotation: src_lm reads Srp/SrpSub, mt reads
    MtSrp/MtSrpSub."""
    if channel not in ("src_lm", "mt"):
        raise ValueError(f"unknown channel {channel!r}")
    if filter not in ("all", "content"):
        raise ValueError(f"unknown filter {filter!r}")
    if unit not in ("token", "subword"):
        raise ValueError(f"unknown unit {unit!r}")
    values: list[float] = []
    for tok in segment.tokens():
        if filter == "content" and not is_content(tok):
            continue
        if unit == "token":
            val = tok.src_surprisal if channel == "src_lm" else tok.mt_surprisal
            if val is None:
                raise MissingAnnotationError(
                    f"{segment.uid} token {tok.id} ({tok.form!r}) lacks "
                    f"{'Srp' if channel == 'src_lm' else 'MtSrp'}"
                )
            values.append(val)
        else:
            subs = tok.src_surprisal_subwords if channel == "src_lm" else tok.mt_surprisal_subwords
            if subs is None:
                raise MissingAnnotationError(
                    f"{segment.uid} token {tok.id} ({tok.form!r}) lacks "
                    f"{'SrpSub' if channel == 'src_lm' else 'MtSrpSub'}"
                )
            values.extend(subs)
    if not values:
        raise EmptyFilterError("no eligible tokens")
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# Source-side structure


def syntactic_complexity(sentence: Sentence) -> dict[str, float]:
    """tree_depth: node count on the longest root-to-leaf path; branching:
    mean dependents over tokens that have any; mdd: mean linear distance
    |dep - head| over non-root tokens."""

    def depth_below(tid: int) -> int:
        kids = sentence.children(tid)
        if not kids:
            return 1
        return 1 + max(depth_below(k) for k in kids)

    tree_depth = depth_below(sentence.children(0)[0])
    heads = [len(sentence.children(t.id)) for t in sentence.tokens if sentence.children(t.id)]
    branching = sum(heads) / len(heads) if heads else 0.0
    dists = [abs(t.id - t.head) for t in sentence.tokens if t.head != 0]
    mdd = sum(dists) / len(dists) if dists else 0.0
    return {"tree_depth": float(tree_depth), "branching": branching, "mdd": mdd}


def n_clauses(segment: Segment) -> int:
    """One matrix clause per sentence plus clausal deprels, subtypes by prefix."""
    count = len(segment.sentences)
    for tok in segment.tokens():
        if any(tok.deprel == base or tok.deprel.startswith(base + ":") for base in CLAUSE_DEPRELS):
            count += 1
    return count


def _linked_groups(sentence: Sentence, member: set[int], deprels: frozenset[str]) -> list[list[int]]:
    """Connected components of `member` token ids under parent-child edges
    whose child deprel is in `deprels` and both ends are members."""
    parent: dict[int, int] = {tid: tid for tid in member}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for tid in member:
        tok = sentence.token(tid)
        if tok.deprel in deprels and tok.head in member:
            parent[find(tid)] = find(tok.head)
    groups: dict[int, list[int]] = {}
    for tid in member:
        groups.setdefault(find(tid), []).append(tid)
    return list(groups.values())


def lexical_profile(segment: Segment) -> dict[str, float]:
    """src_lex_dens, src_wlen, src_mwe, src_numerals, src_propn (raw counts
    for the last three; density is per sentence, averaged)."""
    dens = []
    for sent in segment.sentences:
        content = {(t.lemma.lower(), t.upos) for t in sent.tokens if is_content(t)}
        dens.append(len(content) / len(sent.tokens))
    lex_dens = sum(dens) / len(dens)

    words = [t for t in segment.tokens() if not t.is_punct]
    wlen = sum(len(t.form) for t in words) / len(words) if words else 0.0

    mwe = 0
    numerals = 0
    propn = 0
    for sent in segment.sentences:
        all_ids = {t.id for t in sent.tokens}
        for group in _linked_groups(sent, all_ids, MWE_DEPRELS):
            if len(group) < 2:
                continue
            head = next(
                tid for tid in group
                if sent.token(tid).head not in group or sent.token(tid).deprel not in MWE_DEPRELS
            )
            if sent.token(head).upos not in ("NUM", "PROPN"):
                mwe += 1
        num_ids = {t.id for t in sent.tokens if t.upos == "NUM"}
        numerals += len(_linked_groups(sent, num_ids, MWE_DEPRELS | {"nummod"}))
        propn_ids = {t.id for t in sent.tokens if t.upos == "PROPN"}
        propn += len(_linked_groups(sent, propn_ids, MWE_DEPRELS))
    return {
        "src_lex_dens": lex_dens,
        "src_wlen": wlen,
        "src_mwe": float(mwe),
        "src_numerals": float(numerals),
        "src_propn": float(propn),
    }


# ---------------------------------------------------------------------------
# Subtree signatures


def subtree_signature(sentence: Sentence, head_id: int) -> str:
    """Depth-1 signature: head upos plus the sorted (deprel, child upos)
    multiset, e.g. "VERB(nsubj:NOUN,obj:PRON)"."""
    head = sentence.token(head_id)
    parts = sorted(
        f"{sentence.token(c).deprel}:{sentence.token(c).upos}" for c in sentence.children(head_id)
    )
    return f"{head.upos}({','.join(parts)})"


def _flat_index(segment: Segment) -> list[tuple[Sentence, Token]]:
    out = []
    for sent in segment.sentences:
        for tok in sent.tokens:
            out.append((sent, tok))
    return out


def _subtree_units(segment: Segment) -> list[str]:
    """Signatures of tokens with at least one dependent, in token order."""
    units = []
    for sent in segment.sentences:
        for tok in sent.tokens:
            if sent.children(tok.id):
                units.append(subtree_signature(sent, tok.id))
    return units


def _lemma_units(segment: Segment, filter: str) -> list[str]:
    units = []
    for tok in segment.tokens():
        if tok.is_punct:
            continue
        if filter == "content" and not is_content(tok):
            continue
        units.append(tok.lemma.lower())
    return units


def entropy_units(segment: Segment, variant: str, filter: str = "all") -> list[str]:
    """The per-word (or per-subtree) keys whose entropies are summed."""
    if variant == "subtrees":
        return _subtree_units(segment)
    if variant not in ("lemmas", "content-lemmas"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "content-lemmas":
        filter = "content"
    return _lemma_units(segment, filter)


# ---------------------------------------------------------------------------
# Translation tables and entropy


@dataclass
class FallbackPolicy:
    """Substitute entropy for unaligned words and singleton lemmas."""

    median: float
    sd: float
    n_defined: int = 0

    @property
    def value(self) -> float:
        return self.median + 2.0 * self.sd


@dataclass
class TranslationTable:
    variant: str
    counts: dict[str, Counter] = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)
    fallback: FallbackPolicy | None = None

    def total(self, source_key: str) -> int:
        dist = self.counts.get(source_key)
        return sum(dist.values()) if dist else 0

    def prob(self, target_key: str, source_key: str) -> float:
        total = self.total(source_key)
        if total == 0:
            raise KeyError(source_key)
        return self.counts[source_key][target_key] / total

    def add(self, source_key: str, target_key: str, count: int = 1) -> None:
        self.counts.setdefault(source_key, Counter())[target_key] += count

    def to_tsv(self, path: str) -> None:
        header = {
            "variant": self.variant,
            "provenance": self.provenance,
            "stats": self.stats,
            "fallback": (
                {"median": self.fallback.median, "sd": self.fallback.sd, "n_defined": self.fallback.n_defined}
                if self.fallback
                else None
            ),
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write("src_lemma\ttgt_lemma\tcount\n")
            for src in sorted(self.counts):
                for tgt in sorted(self.counts[src]):
                    fh.write(f"{src}\t{tgt}\t{self.counts[src][tgt]}\n")

    @classmethod
    def from_tsv(cls, path: str) -> "TranslationTable":
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
            if not first.startswith("# "):
                raise ValueError(f"{path}: missing JSON header line")
            header = json.loads(first[2:])
            cols = fh.readline().rstrip("\n").split("\t")
            if cols != ["src_lemma", "tgt_lemma", "count"]:
                raise ValueError(f"{path}: bad column header {cols}")
            table = cls(
                variant=header["variant"],
                provenance=list(header.get("provenance", [])),
                stats=dict(header.get("stats", {})),
            )
            if header.get("fallback"):
                fb = header["fallback"]
                table.fallback = FallbackPolicy(fb["median"], fb["sd"], fb.get("n_defined", 0))
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                src, tgt, count = line.split("\t")
                table.add(src, tgt, int(count))
        return table


def build_translation_table(
    pairs: Iterable[SegmentPair], variant: str, provenance: Iterable[str] = ()
) -> TranslationTable:
    """Count aligned (source unit -> target unit) pairs over word links.

    lemmas: every link, keyed by lowercased lemmas.  content-lemmas: links
    whose source token is a content word.  subtrees: links anchored at source
    tokens that have dependents, keyed by depth-1 signatures on both sides
    (the target side may be childless).  Pairs without links contribute
    nothing and are counted in `stats`.
    """
    if variant not in TABLE_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    table = TranslationTable(variant=variant, provenance=list(provenance))
    n_pairs = 0
    n_with_links = 0
    n_used = 0
    for pair in pairs:
        n_pairs += 1
        if not pair.links:
            continue
        n_with_links += 1
        src_flat = _flat_index(pair.source)
        tgt_flat = _flat_index(pair.target)
        for link in pair.links:
            src_sent, src_tok = src_flat[link.src]
            tgt_sent, tgt_tok = tgt_flat[link.tgt]
            if variant == "lemmas":
                table.add(src_tok.lemma.lower(), tgt_tok.lemma.lower())
            elif variant == "content-lemmas":
                if is_content(src_tok):
                    table.add(src_tok.lemma.lower(), tgt_tok.lemma.lower())
                else:
                    continue
            else:
                if not src_sent.children(src_tok.id):
                    continue
                table.add(
                    subtree_signature(src_sent, src_tok.id),
                    subtree_signature(tgt_sent, tgt_tok.id),
                )
            n_used += 1
    table.stats = {"pairs": n_pairs, "pairs_with_links": n_with_links, "links_used": n_used}
    return table


def merge_tables(a: TranslationTable, b: TranslationTable) -> TranslationTable:
    if a.variant != b.variant:
        raise ValueError(f"cannot merge variants {a.variant!r} and {b.variant!r}")
    out = TranslationTable(variant=a.variant, provenance=list(a.provenance) + list(b.provenance))
    for src, dist in a.counts.items():
        for tgt, c in dist.items():
            out.add(src, tgt, c)
    for src, dist in b.counts.items():
        for tgt, c in dist.items():
            out.add(src, tgt, c)
    keys = set(a.stats) | set(b.stats)
    out.stats = {k: a.stats.get(k, 0) + b.stats.get(k, 0) for k in keys}
    return out


def solution_entropy(source_key: str, table: TranslationTable) -> float:
    """H(T|S) in bits; raises FallbackNeeded for absent or singleton keys."""
    dist = table.counts.get(source_key)
    if dist is None:
        raise FallbackNeeded(source_key)
    total = sum(dist.values())
    if total < 2:
        raise FallbackNeeded(source_key)
    h = 0.0
    for count in dist.values():
        p = count / total
        h -= p * math.log2(p)
    return h


def compute_fallback(
    segments: Iterable[Segment], table: TranslationTable, filter: str = "all"
) -> FallbackPolicy:
    """median + 2*sd policy over the defined per-word entropies of the given
    source segments (population sd)."""
    defined: list[float] = []
    for segment in segments:
        for key in entropy_units(segment, table.variant, filter):
            try:
                defined.append(solution_entropy(key, table))
            except FallbackNeeded:
                continue
    if not defined:
        return FallbackPolicy(median=0.0, sd=0.0, n_defined=0)
    arr = np.asarray(defined, dtype=np.float64)
    return FallbackPolicy(median=float(np.median(arr)), sd=float(arr.std()), n_defined=len(defined))


def segment_entropy(
    segment: Segment,
    table: TranslationTable,
    fallback: FallbackPolicy | None,
    filter: str = "all",
) -> float:
    """Sum of per-word entropies over the segment's source words passing the
    filter (subtree units for the subtrees variant); fallback value for
    unaligned words and singletons.  Empty unit set -> 0."""
    units = entropy_units(segment, table.variant, filter)
    total = 0.0
    for key in units:
        try:
            total += solution_entropy(key, table)
        except FallbackNeeded:
            if fallback is None:
                raise ValueError("fallback not initialized") from None
            total += fallback.value
    return total


# ---------------------------------------------------------------------------
# Alignment means


def mean_alignment(pair: SegmentPair, filter: str = "all", unit: str = "words") -> float:
    """Mean link score (words) or mean subtree cosine (subtrees); the content
    filter keeps links whose both endpoints are content words."""
    if unit == "subtrees":
        if not pair.subtree_links:
            raise AlignmentUndefinedError("no subtree links")
        return sum(sl.cosine for sl in pair.subtree_links) / len(pair.subtree_links)
    if unit != "words":
        raise ValueError(f"unknown unit {unit!r}")
    src_flat = _flat_index(pair.source)
    tgt_flat = _flat_index(pair.target)
    scores = []
    for link in pair.links:
        if filter == "content":
            if not (is_content(src_flat[link.src][1]) and is_content(tgt_flat[link.tgt][1])):
                continue
        scores.append(link.score)
    if not scores:
        raise AlignmentUndefinedError("no links after filtering")
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# Difficulty vector


@dataclass
class DifficultyVector:
    values: dict[str, float | None]
    missing: tuple[str, ...]


def _sentence_mean(segment: Segment, key: str) -> float:
    vals = [syntactic_complexity(sent)[key] for sent in segment.sentences]
    return sum(vals) / len(vals)


def extract_difficulty_vector(
    pair: SegmentPair,
    tables: dict[str, TranslationTable],
    fallbacks: dict[str, FallbackPolicy] | None = None,
) -> DifficultyVector:
    """All 22 difficulty values for one pair; unavailable inputs produce
    per-name missing entries (None), never silent zeros.

    `tables` maps variant name -> table; `fallbacks` maps the same keys to
    policies and defaults to each table's attached fallback.
    """
    values: dict[str, float | None] = {}
    missing: list[str] = []

    def put(name: str, fn) -> None:
        try:
            values[name] = float(fn())
        except (MissingAnnotationError, EmptyFilterError, AlignmentUndefinedError, KeyError, ValueError):
            values[name] = None
            missing.append(name)

    src = pair.source
    tgt = pair.target

    def fb(variant: str) -> FallbackPolicy | None:
        if fallbacks and variant in fallbacks:
            return fallbacks[variant]
        table = tables.get(variant)
        return table.fallback if table else None

    def entropy_for(name: str, variant: str, filter: str) -> None:
        if variant not in tables:
            values[name] = None
            missing.append(name)
            return
        put(name, lambda: segment_entropy(src, tables[variant], fb(variant), filter))

    def bleu_value() -> float:
        reference = [t.form for t in tgt.tokens()]
        prediction = []
        for t in tgt.tokens():
            if t.pred_form is None:
                raise MissingAnnotationError(f"{tgt.uid} token {t.id} lacks Pred")
            prediction.append(t.pred_form)
        return pseudo_bleu(reference, prediction)

    put("bleu", bleu_value)
    put("mean_align", lambda: mean_alignment(pair, "all", "words"))
    put("mean_align_content", lambda: mean_alignment(pair, "content", "words"))
    put("mean_cosine", lambda: mean_alignment(pair, "all", "subtrees"))
    put("mt_AvS", lambda: avg_surprisal(tgt, "mt", "all", "token"))
    put("mt_AvS_content", lambda: avg_surprisal(tgt, "mt", "content", "token"))
    put("mt_AvS_subw", lambda: avg_surprisal(tgt, "mt", "all", "subword"))
    put("src_branching", lambda: _sentence_mean(src, "branching"))
    put("src_gpt_AvS", lambda: avg_surprisal(src, "src_lm", "all", "token"))
    put("src_gpt_AvS_content", lambda: avg_surprisal(src, "src_lm", "content", "token"))
    put("src_gpt_AvS_subw", lambda: avg_surprisal(src, "src_lm", "all", "subword"))
    profile = lexical_profile(src)
    for name in ("src_lex_dens", "src_wlen", "src_mwe", "src_numerals", "src_propn"):
        values[name] = profile[name]
    put("src_mdd", lambda: _sentence_mean(src, "mdd"))
    put("src_n_clauses", lambda: float(n_clauses(src)))
    put("src_tree_depth", lambda: _sentence_mean(src, "tree_depth"))
    entropy_for("tot_entropy", "lemmas", "all")
    entropy_for("tot_entropy_content", "content-lemmas", "content")
    entropy_for("tot_entropy_trees", "subtrees", "all")

    ordered = {name: values[name] for name in DIFFICULTY_NAMES}
    return DifficultyVector(values=ordered, missing=tuple(sorted(missing)))
