"""The 37 delexicalised translationese indicators on target-language segments.

Features come in five kinds: plain deprel counts, upos counts, morphological
feature counts, named rules (lexicalized or structural), and textual measures.
Counts are emitted raw; `preprocess.normalize` turns per-word counts into
relative frequencies.  Sentence-level measures (mhd, ttr, mean_sent_wc) are
averaged over the segment's sentences here, so their registry normalization
kind is "per-sentence-average" and the normalizer leaves them alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from medload.conllu import Segment, Sentence
from medload.lexicon import Lexicon, load_lexicon

CORE_ARGS = frozenset({"nsubj", "obj", "iobj"})
VERBAL_UPOS = frozenset({"VERB", "AUX"})
SUPPORTED_LANGUAGES = ("de", "en")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # deprel-count | upos-count | morph-count | rule-based | textual
    selector: str
    normalization: str  # per-word | per-sentence-average | none


def _check_language(language: str) -> None:
    if language not in SUPPORTED_LANGUAGES:
        raise ValueError(f"unsupported language {language!r}, expected one of {SUPPORTED_LANGUAGES}")


# ---------------------------------------------------------------------------
# Counting primitives


def count_deprel(segment: Segment, relations: Iterable[str]) -> int:
    """Exact-match deprel count; subtypes are distinct (aux != aux:pass)."""
    relations = set(relations)
    return sum(1 for tok in segment.tokens() if tok.deprel in relations)


def count_upos(segment: Segment, tags: Iterable[str]) -> int:
    tags = set(tags)
    return sum(1 for tok in segment.tokens() if tok.upos in tags)


def count_morph(segment: Segment, key: str, value: str) -> int:
    return sum(1 for tok in segment.tokens() if tok.feats_has(key, value))


def _has_neg_feat(tok) -> bool:
    return any("Neg" in raw.split(",") for raw in tok.feats.values())


def advmod_excluding_neg(segment: Segment) -> int:
    return sum(1 for tok in segment.tokens() if tok.deprel == "advmod" and not _has_neg_feat(tok))


def _advmod_on_verb(segment: Segment) -> int:
    count = 0
    for sent in segment.sentences:
        for tok in sent.tokens:
            if tok.deprel == "advmod" and tok.head != 0 and sent.token(tok.head).upos in VERBAL_UPOS:
                count += 1
    return count


def _negation_markers(segment: Segment) -> int:
    count = 0
    for tok in segment.tokens():
        if _has_neg_feat(tok) or tok.lemma.lower() in ("not", "nicht"):
            count += 1
    return count


def _past_tense_verbs(segment: Segment) -> int:
    return sum(1 for tok in segment.tokens() if tok.upos in VERBAL_UPOS and tok.feats_has("Tense", "Past"))


def _vo_noun(segment: Segment) -> int:
    return sum(1 for tok in segment.tokens() if tok.deprel == "obj" and tok.upos == "NOUN" and tok.id > tok.head)


# ---------------------------------------------------------------------------
# Structural measures


def mhd(sentence: Sentence) -> float:
    """Mean hierarchical distance: mean path length (edges) from the root to
    every non-root token; 0 for a single-token sentence."""
    n = len(sentence.tokens)
    if n <= 1:
        return 0.0

    def edges_to_root(tid: int) -> int:
        d = 0
        while sentence.token(tid).head != 0:
            tid = sentence.token(tid).head
            d += 1
        return d

    total = sum(edges_to_root(tok.id) for tok in sentence.tokens if tok.head != 0)
    return total / (n - 1)


def nnargs(segment: Segment) -> float:
    """Share of core verb arguments realized as nouns; 0 when no core args."""
    num = 0
    den = 0
    for tok in segment.tokens():
        if tok.deprel in CORE_ARGS:
            den += 1
            if tok.upos in ("NOUN", "PROPN"):
                num += 1
    return num / den if den else 0.0


def _obl_obj_ratio(segment: Segment) -> float:
    obl = count_deprel(segment, {"obl"})
    obj = count_deprel(segment, {"obj"})
    return obl / (obl + obj) if (obl + obj) else 0.0


def relcl(sentence: Sentence, language: str, lexicon: Lexicon | None = None) -> int:
    """Relative clause pronouns.

    en: a listed pronoun form (which/that/...) with upos=PRON whose head bears
    deprel acl:relcl.  de: a listed form (der/welch paradigms, was, wer) or a
    lemma containing "wo", with PronType containing Rel, at most 3 tokens from
    a comma.
    """
    _check_language(language)
    lexicon = lexicon or load_lexicon(language)
    count = 0
    if language == "en":
        for tok in sentence.tokens:
            if (
                tok.upos == "PRON"
                and tok.form.lower() in lexicon.relative_pronouns
                and tok.head != 0
                and sentence.token(tok.head).deprel == "acl:relcl"
            ):
                count += 1
        return count
    commas = [tok.id for tok in sentence.tokens if tok.form == ","]
    for tok in sentence.tokens:
        if tok.upos != "PRON" or not tok.feats_has("PronType", "Rel"):
            continue
        if tok.form.lower() not in lexicon.relative_pronouns and "wo" not in tok.lemma.lower():
            continue
        if any(abs(tok.id - c) <= 3 for c in commas):
            count += 1
    return count


def lexicon_markers(segment: Segment, items: Iterable[tuple[str, ...]]) -> int:
    """Occurrences of lemma-sequence items; each start position counts once."""
    items = tuple(items)
    if not items:
        raise ValueError("empty lexicon")
    by_len: dict[int, set[tuple[str, ...]]] = {}
    for item in items:
        by_len.setdefault(len(item), set()).add(item)
    count = 0
    for sent in segment.sentences:
        lemmas = [tok.lemma.lower() for tok in sent.tokens]
        for pos in range(len(lemmas)):
            for length, variants in by_len.items():
                if pos + length <= len(lemmas) and tuple(lemmas[pos : pos + length]) in variants:
                    count += 1
                    break
    return count


def mpred(segment: Segment, language: str, lexicon: Lexicon | None = None) -> int:
    """Modal predicates.

    en: MD auxiliaries minus will/shall, plus non-AUX "have" governing an
    infinitive to its right (skipped when an obj dependent sits between:
    causative), plus modal adjectives with an AUX dependent.  de: core modal
    verbs plus predicative modal adjectives (cop or AUX dependent).
    """
    _check_language(language)
    lexicon = lexicon or load_lexicon(language)
    count = 0
    for sent in segment.sentences:
        for tok in sent.tokens:
            lemma = tok.lemma.lower()
            deps = [sent.token(c) for c in sent.children(tok.id)]
            if language == "en":
                if tok.xpos == "MD" and lemma not in ("will", "shall"):
                    count += 1
                elif lemma == "have" and tok.upos != "AUX":
                    inf = next(
                        (d for d in deps if d.id > tok.id and d.feats_has("VerbForm", "Inf")),
                        None,
                    )
                    if inf is not None and not any(
                        d.deprel == "obj" and tok.id < d.id < inf.id for d in deps
                    ):
                        count += 1
                if lemma in lexicon.modal_adjectives and any(d.upos == "AUX" for d in deps):
                    count += 1
            else:
                if lemma in lexicon.modal_verbs and tok.upos in VERBAL_UPOS:
                    count += 1
                elif lemma in lexicon.modal_adjectives and any(
                    d.deprel == "cop" or d.upos == "AUX" for d in deps
                ):
                    count += 1
    return count


def ppron(segment: Segment, language: str, lexicon: Lexicon | None = None) -> int:
    """Personal pronouns: PRON with a Person feature, not possessive, listed form."""
    _check_language(language)
    lexicon = lexicon or load_lexicon(language)
    count = 0
    for tok in segment.tokens():
        if (
            tok.upos == "PRON"
            and "Person" in tok.feats
            and not tok.feats_has("Poss", "Yes")
            and tok.form.lower() in lexicon.personal_pronouns
        ):
            count += 1
    return count


def vorfeld(segment: Segment) -> float:
    """Share of declarative sentences with exactly one constituent before the
    finite verb (German verb-second pre-field); 0 when nothing is countable."""
    countable = 0
    v2 = 0
    for sent in segment.sentences:
        if sent.tokens and sent.tokens[-1].form in ("?", "!"):
            continue
        root = sent.root()
        finite = None
        if root.feats_has("VerbForm", "Fin"):
            finite = root
        else:
            for cid in sent.children(root.id):
                child = sent.token(cid)
                if child.upos == "AUX" and child.feats_has("VerbForm", "Fin"):
                    finite = child
                    break
        if finite is None:
            continue
        countable += 1
        pre = 0
        for cid in sent.children(root.id):
            child = sent.token(cid)
            if child.id == finite.id or child.upos == "PUNCT":
                continue
            if max(sent.subtree_ids(cid)) < finite.id:
                pre += 1
        if pre == 1:
            v2 += 1
    return v2 / countable if countable else 0.0


def textual_measures(segment: Segment) -> dict[str, float]:
    """mean_sent_wc: mean UD-token count per sentence; ttr: unique lowercased
    forms / tokens, per sentence, averaged."""
    wcs = []
    ttrs = []
    for sent in segment.sentences:
        n = len(sent.tokens)
        wcs.append(n)
        forms = {tok.form.lower() for tok in sent.tokens}
        ttrs.append(len(forms) / n)
    k = len(segment.sentences)
    return {"mean_sent_wc": sum(wcs) / k, "ttr": sum(ttrs) / k}


def _sentence_average(segment: Segment, fn: Callable[[Sentence], float]) -> float:
    return sum(fn(sent) for sent in segment.sentences) / len(segment.sentences)


# ---------------------------------------------------------------------------
# Registry

_DEPREL_FEATURES = (
    "acl", "advcl", "amod", "appos", "aux", "aux:pass", "case", "ccomp",
    "conj", "cop", "mark", "nmod", "nsubj", "nummod", "obj", "obl",
    "parataxis", "xcomp",
)

_RULES: dict[str, Callable[[Segment, str, Lexicon], float]] = {
    "advmod": lambda seg, lang, lex: advmod_excluding_neg(seg),
    "advmod_verb": lambda seg, lang, lex: _advmod_on_verb(seg),
    "epist": lambda seg, lang, lex: lexicon_markers(seg, lex.epist_items),
    "mhd": lambda seg, lang, lex: _sentence_average(seg, mhd),
    "mpred": lambda seg, lang, lex: mpred(seg, lang, lex),
    "negs": lambda seg, lang, lex: _negation_markers(seg),
    "nnargs": lambda seg, lang, lex: nnargs(seg),
    "obl_obj": lambda seg, lang, lex: _obl_obj_ratio(seg),
    "pastv": lambda seg, lang, lex: _past_tense_verbs(seg),
    "ppron": lambda seg, lang, lex: ppron(seg, lang, lex),
    "relcl": lambda seg, lang, lex: sum(relcl(s, lang, lex) for s in seg.sentences),
    "vo_noun": lambda seg, lang, lex: _vo_noun(seg),
    "vorfeld": lambda seg, lang, lex: vorfeld(seg) if lang == "de" else 0.0,
}


def build_registry() -> tuple[FeatureSpec, ...]:
    specs = [FeatureSpec(name, "deprel-count", f"deprel:{name}", "per-word") for name in _DEPREL_FEATURES]
    specs += [
        FeatureSpec("advmod", "rule-based", "rule:advmod_excluding_neg", "per-word"),
        FeatureSpec("advmod_verb", "rule-based", "rule:advmod_on_verbal_head", "per-word"),
        FeatureSpec("epist", "rule-based", "rule:epistemic_markers", "per-word"),
        FeatureSpec("fin", "morph-count", "morph:VerbForm=Fin", "per-word"),
        FeatureSpec("inf", "morph-count", "morph:VerbForm=Inf", "per-word"),
        FeatureSpec("mean_sent_wc", "textual", "textual:mean_sentence_token_count", "per-sentence-average"),
        FeatureSpec("mhd", "rule-based", "rule:mean_hierarchical_distance", "per-sentence-average"),
        FeatureSpec("mpred", "rule-based", "rule:modal_predicates", "per-word"),
        FeatureSpec("negs", "rule-based", "rule:negation_markers", "per-word"),
        FeatureSpec("nn", "upos-count", "upos:NOUN", "per-word"),
        FeatureSpec("nnargs", "rule-based", "rule:nominal_core_argument_share", "none"),
        FeatureSpec("obl_obj", "rule-based", "rule:oblique_to_object_ratio", "none"),
        FeatureSpec("pastv", "rule-based", "rule:past_tense_verbs", "per-word"),
        FeatureSpec("ppron", "rule-based", "rule:personal_pronouns", "per-word"),
        FeatureSpec("prep", "upos-count", "upos:ADP", "per-word"),
        FeatureSpec("relcl", "rule-based", "rule:relative_clause_pronouns", "per-word"),
        FeatureSpec("ttr", "textual", "textual:type_token_ratio", "per-sentence-average"),
        FeatureSpec("vo_noun", "rule-based", "rule:postverbal_noun_objects", "per-word"),
        FeatureSpec("vorfeld", "rule-based", "rule:prefield_v2_share", "none"),
    ]
    specs.sort(key=lambda s: s.name)
    names = [s.name for s in specs]
    if len(names) != len(set(names)):
        raise AssertionError("duplicate feature names in registry")
    return tuple(specs)


REGISTRY = build_registry()
REGISTRY_NAMES = tuple(spec.name for spec in REGISTRY)


def registry_dump_tsv(registry: Iterable[FeatureSpec] = REGISTRY) -> str:
    lines = ["name\tkind\tselector\tnormalization"]
    for spec in registry:
        lines.append(f"{spec.name}\t{spec.kind}\t{spec.selector}\t{spec.normalization}")
    return "\n".join(lines) + "\n"


def extract_translationese_vector(
    segment: Segment,
    language: str | None = None,
    registry: Iterable[FeatureSpec] = REGISTRY,
    lexicon: Lexicon | None = None,
) -> dict[str, float]:
    """All 37 raw feature values for one segment. Pure and deterministic."""
    language = language or segment.language
    _check_language(language)
    lexicon = lexicon or load_lexicon(language)
    textual = textual_measures(segment)
    out: dict[str, float] = {}
    for spec in registry:
        if spec.kind == "deprel-count":
            out[spec.name] = float(count_deprel(segment, {spec.selector.split(":", 1)[1]}))
        elif spec.kind == "upos-count":
            out[spec.name] = float(count_upos(segment, {spec.selector.split(":", 1)[1]}))
        elif spec.kind == "morph-count":
            key, value = spec.selector.split(":", 1)[1].split("=", 1)
            out[spec.name] = float(count_morph(segment, key, value))
        elif spec.kind == "textual":
            out[spec.name] = float(textual[spec.name])
        else:
            out[spec.name] = float(_RULES[spec.name](segment, language, lexicon))
    return out
