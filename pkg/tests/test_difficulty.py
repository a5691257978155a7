"""Difficulty indicators against hand-computed values on a toy pair.

The main fixture is a two-sentence de->en pair with exhaustively
hand-derived expectations for every one of the 22 features; entropy and
merge behaviour additionally get property tests with scipy as the
independent oracle.
"""

import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as scipy_stats

from medload.bleu import pseudo_bleu
from medload.conllu import Link, Segment, SegmentPair, Sentence, SubtreeLink, make_token
from medload.difficulty import (
    DIFFICULTY_NAMES,
    DIFFICULTY_NORMALIZATION,
    AlignmentUndefinedError,
    EmptyFilterError,
    FallbackNeeded,
    FallbackPolicy,
    MissingAnnotationError,
    TranslationTable,
    avg_surprisal,
    build_translation_table,
    compute_fallback,
    entropy_units,
    extract_difficulty_vector,
    lexical_profile,
    mean_alignment,
    merge_tables,
    n_clauses,
    segment_entropy,
    solution_entropy,
    subtree_signature,
    syntactic_complexity,
)


def sent(rows):
    tokens = []
    for i, row in enumerate(rows, start=1):
        form, lemma, upos, head, deprel = row[:5]
        misc = row[5] if len(row) > 5 else None
        tokens.append(
            make_token(i, form, lemma=lemma, upos=upos, head=head, deprel=deprel, misc=misc)
        )
    return Sentence(tokens=tokens)


def seg(*sentences, doc_id="d1", seg_id="s1", side="src", language="de"):
    return Segment(doc_id=doc_id, seg_id=seg_id, sentences=list(sentences), side=side, language=language)


# Source: "Der alte Mann sieht zwei Hunde ." / "New York ist gross ."
SRC = seg(
    sent([
        ("Der", "der", "DET", 3, "det", {"Srp": "1.0", "SrpSub": "1.0"}),
        ("alte", "alt", "ADJ", 3, "amod", {"Srp": "2.0", "SrpSub": "1.5,0.5"}),
        ("Mann", "Mann", "NOUN", 4, "nsubj", {"Srp": "3.0", "SrpSub": "3.0"}),
        ("sieht", "sehen", "VERB", 0, "root", {"Srp": "4.0", "SrpSub": "4.0"}),
        ("zwei", "zwei", "NUM", 6, "nummod", {"Srp": "5.0", "SrpSub": "5.0"}),
        ("Hunde", "Hund", "NOUN", 4, "obj", {"Srp": "6.0", "SrpSub": "2.0,4.0"}),
        (".", ".", "PUNCT", 4, "punct", {"Srp": "0.5", "SrpSub": "0.5"}),
    ]),
    sent([
        ("New", "New", "PROPN", 4, "nsubj", {"Srp": "2.0", "SrpSub": "2.0"}),
        ("York", "York", "PROPN", 1, "flat", {"Srp": "1.0", "SrpSub": "1.0"}),
        ("ist", "sein", "AUX", 4, "cop", {"Srp": "1.5", "SrpSub": "1.5"}),
        ("gross", "gross", "ADJ", 0, "root", {"Srp": "2.5", "SrpSub": "2.5"}),
        (".", ".", "PUNCT", 4, "punct", {"Srp": "0.5", "SrpSub": "0.5"}),
    ]),
    side="src",
    language="de",
)


def _tgt_rows(pred_by_form=None):
    pred_by_form = pred_by_form or {}

    def misc(form, srp, sub):
        vals = {"MtSrp": srp, "MtSrpSub": sub, "Pred": pred_by_form.get(form, form)}
        return vals

    return [
        sent([
            ("The", "the", "DET", 3, "det", misc("The", "1.0", "1.0")),
            ("old", "old", "ADJ", 3, "amod", misc("old", "2.0", "2.0")),
            ("man", "man", "NOUN", 4, "nsubj", misc("man", "2.0", "2.0")),
            ("sees", "see", "VERB", 0, "root", misc("sees", "3.0", "3.0")),
            ("two", "two", "NUM", 6, "nummod", misc("two", "4.0", "4.0")),
            ("dogs", "dog", "NOUN", 4, "obj", misc("dogs", "5.0", "3.0,2.0")),
            (".", ".", "PUNCT", 4, "punct", misc(".", "1.0", "1.0")),
        ]),
        sent([
            ("New", "New", "PROPN", 4, "nsubj", misc("New", "2.0", "2.0")),
            ("York", "York", "PROPN", 1, "flat", misc("York", "1.0", "1.0")),
            ("is", "be", "AUX", 4, "cop", misc("is", "1.0", "1.0")),
            ("big", "big", "ADJ", 0, "root", misc("big", "3.0", "1.5,1.5")),
            (".", ".", "PUNCT", 4, "punct", misc(".", "1.0", "1.0")),
        ]),
    ]


TGT = seg(*_tgt_rows(), side="tgt", language="en")

LINKS = [
    Link(0, 0, 0.9), Link(1, 1, 0.8), Link(2, 2, 1.0), Link(3, 3, 0.7),
    Link(4, 4, 1.0), Link(5, 5, 0.6), Link(7, 7, 1.0), Link(8, 8, 1.0),
    Link(9, 9, 0.5), Link(10, 10, 0.9),
]

SUBTREE_LINKS = [
    SubtreeLink("NOUN(amod:ADJ,det:DET)", "NOUN(amod:ADJ,det:DET)", 0.9),
    SubtreeLink("VERB(nsubj:NOUN,obj:NOUN,punct:PUNCT)", "VERB(nsubj:NOUN,obj:NOUN,punct:PUNCT)", 0.7),
]

PAIR = SegmentPair(source=SRC, target=TGT, links=list(LINKS), subtree_links=list(SUBTREE_LINKS))

H_3_1 = 0.8112781244591328  # entropy of {3, 1}

LEMMA_TABLE = TranslationTable(
    variant="lemmas",
    counts={
        "der": Counter({"the": 4}),
        "mann": Counter({"man": 2}),
        "hund": Counter({"dog": 3, "hound": 1}),
        "einzel": Counter({"single": 1}),
    },
)
CONTENT_TABLE = TranslationTable(
    variant="content-lemmas",
    counts={"hund": Counter({"dog": 1, "hound": 1}), "mann": Counter({"man": 4})},
)
SUBTREE_TABLE = TranslationTable(
    variant="subtrees",
    counts={
        "NOUN(amod:ADJ,det:DET)": Counter(
            {"NOUN(amod:ADJ,det:DET)": 2, "NOUN(det:DET)": 2}
        )
    },
)
FALLBACK = FallbackPolicy(median=1.0, sd=0.5)  # value 2.0

TABLES = {"lemmas": LEMMA_TABLE, "content-lemmas": CONTENT_TABLE, "subtrees": SUBTREE_TABLE}
FALLBACKS = {name: FALLBACK for name in TABLES}

EXPECTED = {
    "bleu": 100.0,
    "mean_align": 0.84,
    "mean_align_content": 6.0 / 7,
    "mean_cosine": 0.8,
    "mt_AvS": 26.0 / 12,
    "mt_AvS_content": 18.0 / 7,
    "mt_AvS_subw": 26.0 / 14,
    "src_branching": 2.0,
    "src_gpt_AvS": 29.0 / 12,
    "src_gpt_AvS_content": 20.5 / 7,
    "src_gpt_AvS_subw": 29.0 / 14,
    # sent 1 content pairs: (alt,ADJ) (mann,NOUN) (sehen,VERB) (hund,NOUN)
    "src_lex_dens": (4 / 7 + 3 / 5) / 2,
    "src_mdd": (10 / 6 + 3 / 2) / 2,
    "src_mwe": 0.0,
    "src_n_clauses": 2.0,
    "src_numerals": 1.0,
    "src_propn": 1.0,
    "src_tree_depth": 3.0,
    "src_wlen": 4.0,
    # der 0 + mann 0 + hund H(3,1) + 7 fallbacks at 2.0
    "tot_entropy": 14.0 + H_3_1,
    # hund 1.0 + mann 0 + 5 fallbacks at 2.0
    "tot_entropy_content": 11.0,
    # NOUN(amod:ADJ,det:DET) 1.0 + 4 fallbacks at 2.0
    "tot_entropy_trees": 9.0,
}


# ---------------------------------------------------------------------------
# Full-vector oracle


def test_difficulty_names_are_stable():
    assert len(DIFFICULTY_NAMES) == 22
    assert list(DIFFICULTY_NAMES) == sorted(DIFFICULTY_NAMES)
    assert set(EXPECTED) == set(DIFFICULTY_NAMES)


def test_extract_difficulty_vector_matches_hand_computation():
    vec = extract_difficulty_vector(PAIR, TABLES, FALLBACKS)
    assert vec.missing == ()
    assert list(vec.values) == list(DIFFICULTY_NAMES)
    for name in DIFFICULTY_NAMES:
        assert vec.values[name] == pytest.approx(EXPECTED[name], abs=1e-12), name


def test_extraction_is_deterministic():
    a = extract_difficulty_vector(PAIR, TABLES, FALLBACKS)
    b = extract_difficulty_vector(PAIR, TABLES, FALLBACKS)
    assert a.values == b.values


def test_normalization_registry_covers_all_names():
    assert set(DIFFICULTY_NORMALIZATION) == set(DIFFICULTY_NAMES)
    per_word = {n for n, k in DIFFICULTY_NORMALIZATION.items() if k == "per-word"}
    assert per_word == {"src_mwe", "src_numerals", "src_propn"}


def test_source_features_ignore_the_target_side():
    other_tgt = seg(
        sent([("Completely", "completely", "ADV", 2, "advmod"), ("different", "different", "ADJ", 0, "root")]),
        side="tgt",
        language="en",
    )
    vec_a = extract_difficulty_vector(PAIR, TABLES, FALLBACKS)
    vec_b = extract_difficulty_vector(SegmentPair(source=SRC, target=other_tgt), TABLES, FALLBACKS)
    for name in DIFFICULTY_NAMES:
        if name.startswith(("src_", "tot_")):
            assert vec_a.values[name] == vec_b.values[name], name


# ---------------------------------------------------------------------------
# Surprisal


def test_avg_surprisal_all_includes_punctuation():
    assert avg_surprisal(SRC, "src_lm", "all", "token") == pytest.approx(29 / 12)
    assert avg_surprisal(TGT, "mt", "all", "token") == pytest.approx(26 / 12)


def test_avg_surprisal_content_filter():
    assert avg_surprisal(SRC, "src_lm", "content", "token") == pytest.approx(20.5 / 7)


def test_avg_surprisal_subword_flattens_before_averaging():
    assert avg_surprisal(SRC, "src_lm", "all", "subword") == pytest.approx(29 / 14)
    assert avg_surprisal(TGT, "mt", "all", "subword") == pytest.approx(26 / 14)


def test_avg_surprisal_missing_annotation_names_the_token():
    bare = seg(sent([("Hi", "hi", "INTJ", 0, "root")]))
    with pytest.raises(MissingAnnotationError, match=r"token 1.*'Hi'.*Srp"):
        avg_surprisal(bare, "src_lm")
    with pytest.raises(MissingAnnotationError, match="MtSrp"):
        avg_surprisal(bare, "mt")


def test_avg_surprisal_empty_filter_set_is_an_error():
    only_punct = seg(sent([(".", ".", "PUNCT", 0, "root", {"Srp": "0.5"})]))
    with pytest.raises(EmptyFilterError, match="no eligible tokens"):
        avg_surprisal(only_punct, "src_lm", "content", "token")


def test_avg_surprisal_rejects_unknown_arguments():
    with pytest.raises(ValueError, match="channel"):
        avg_surprisal(SRC, "nope")
    with pytest.raises(ValueError, match="filter"):
        avg_surprisal(SRC, "src_lm", "function-words")
    with pytest.raises(ValueError, match="unit"):
        avg_surprisal(SRC, "src_lm", "all", "char")


@given(
    st.lists(st.floats(min_value=0.0, max_value=40.0, allow_nan=False), min_size=1, max_size=12)
)
def test_avg_surprisal_lies_between_min_and_max(values):
    rows = [
        ("w%d" % i, "w%d" % i, "NOUN", (i if i > 1 else 0), ("dep" if i > 1 else "root"), {"Srp": repr(v)})
        for i, v in enumerate(values, start=1)
    ]
    segment = seg(sent(rows))
    avg = avg_surprisal(segment, "src_lm", "all", "token")
    assert min(values) - 1e-9 <= avg <= max(values) + 1e-9


# ---------------------------------------------------------------------------
# Structure


def test_syntactic_complexity_chain():
    chain = sent([("a", "a", "NOUN", 0, "root"), ("b", "b", "NOUN", 1, "dep"), ("c", "c", "NOUN", 2, "dep")])
    assert syntactic_complexity(chain) == {"tree_depth": 3.0, "branching": 1.0, "mdd": 1.0}


def test_syntactic_complexity_star():
    star = sent([
        ("r", "r", "VERB", 0, "root"),
        ("a", "a", "NOUN", 1, "dep"),
        ("b", "b", "NOUN", 1, "dep"),
        ("c", "c", "NOUN", 1, "dep"),
    ])
    assert syntactic_complexity(star) == {"tree_depth": 2.0, "branching": 3.0, "mdd": 2.0}


def test_syntactic_complexity_single_token():
    lone = sent([("x", "x", "NOUN", 0, "root")])
    assert syntactic_complexity(lone) == {"tree_depth": 1.0, "branching": 0.0, "mdd": 0.0}


def test_n_clauses_counts_matrix_plus_clausal_deprels():
    assert n_clauses(SRC) == 2
    with_rel = seg(
        sent([
            ("He", "he", "PRON", 2, "nsubj"),
            ("saw", "see", "VERB", 0, "root"),
            ("dogs", "dog", "NOUN", 2, "obj"),
            ("that", "that", "PRON", 5, "nsubj"),
            ("barked", "bark", "VERB", 3, "acl:relcl"),
        ]),
        language="en",
    )
    assert n_clauses(with_rel) == 2
    # "aclx" must not match via prefix
    odd = seg(sent([("a", "a", "NOUN", 0, "root"), ("b", "b", "NOUN", 1, "aclx")]))
    assert n_clauses(odd) == 1


# ---------------------------------------------------------------------------
# Lexical profile


def test_lexical_profile_on_the_fixture():
    profile = lexical_profile(SRC)
    assert profile["src_lex_dens"] == pytest.approx((4 / 7 + 3 / 5) / 2)
    assert profile["src_wlen"] == pytest.approx(4.0)
    assert profile["src_mwe"] == 0.0
    assert profile["src_numerals"] == 1.0
    assert profile["src_propn"] == 1.0


def test_mwe_counts_compound_groups_but_not_propn_or_num_heads():
    s = seg(
        sent([
            ("The", "the", "DET", 3, "det"),
            ("apple", "apple", "NOUN", 3, "compound"),
            ("pie", "pie", "NOUN", 5, "nsubj"),
            ("is", "be", "AUX", 5, "cop"),
            ("great", "great", "ADJ", 0, "root"),
            (".", ".", "PUNCT", 5, "punct"),
        ]),
        language="en",
    )
    profile = lexical_profile(s)
    assert profile["src_mwe"] == 1.0
    assert profile["src_numerals"] == 0.0
    assert profile["src_propn"] == 0.0


def test_multiword_numeral_is_one_unit_and_not_an_mwe():
    s = seg(
        sent([
            ("two", "two", "NUM", 2, "compound"),
            ("hundred", "hundred", "NUM", 3, "nummod"),
            ("dogs", "dog", "NOUN", 4, "nsubj"),
            ("bark", "bark", "VERB", 0, "root"),
        ]),
        language="en",
    )
    profile = lexical_profile(s)
    assert profile["src_numerals"] == 1.0
    assert profile["src_mwe"] == 0.0


def test_lexical_density_example():
    s = seg(
        sent([("the", "the", "DET", 3, "det"), ("big", "big", "ADJ", 3, "amod"), ("cat", "cat", "NOUN", 0, "root")]),
        language="en",
    )
    assert lexical_profile(s)["src_lex_dens"] == pytest.approx(2 / 3)


# ---------------------------------------------------------------------------
# Subtree signatures


def test_subtree_signature_sorts_children():
    s = SRC.sentences[0]
    assert subtree_signature(s, 4) == "VERB(nsubj:NOUN,obj:NOUN,punct:PUNCT)"
    assert subtree_signature(s, 3) == "NOUN(amod:ADJ,det:DET)"
    assert subtree_signature(s, 6) == "NOUN(nummod:NUM)"
    assert subtree_signature(s, 1) == "DET()"


def test_entropy_units_per_variant():
    assert entropy_units(SRC, "lemmas") == [
        "der", "alt", "mann", "sehen", "zwei", "hund", "new", "york", "sein", "gross",
    ]
    assert entropy_units(SRC, "content-lemmas") == [
        "alt", "mann", "sehen", "hund", "new", "york", "gross",
    ]
    assert entropy_units(SRC, "subtrees") == [
        "NOUN(amod:ADJ,det:DET)",
        "VERB(nsubj:NOUN,obj:NOUN,punct:PUNCT)",
        "NOUN(nummod:NUM)",
        "PROPN(flat:PROPN)",
        "ADJ(cop:AUX,nsubj:PROPN,punct:PUNCT)",
    ]
    with pytest.raises(ValueError, match="variant"):
        entropy_units(SRC, "bigrams")


# ---------------------------------------------------------------------------
# Translation tables


def test_build_lemma_table_counts_all_links():
    table = build_translation_table([PAIR], "lemmas", provenance=["toy"])
    assert table.stats == {"pairs": 1, "pairs_with_links": 1, "links_used": 10}
    assert table.counts["hund"] == Counter({"dog": 1})
    assert table.counts["der"] == Counter({"the": 1})
    assert table.provenance == ["toy"]


def test_build_content_table_filters_on_source_token():
    table = build_translation_table([PAIR], "content-lemmas")
    assert table.stats["links_used"] == 7
    assert "der" not in table.counts
    assert "zwei" not in table.counts
    assert table.counts["alt"] == Counter({"old": 1})


def test_build_subtree_table_keys_by_signature():
    table = build_translation_table([PAIR], "subtrees")
    assert table.stats["links_used"] == 5
    assert table.counts["NOUN(amod:ADJ,det:DET)"] == Counter({"NOUN(amod:ADJ,det:DET)": 1})
    assert table.counts["PROPN(flat:PROPN)"] == Counter({"PROPN(flat:PROPN)": 1})


def test_pairs_without_links_are_reported_not_dropped_silently():
    bare = SegmentPair(source=SRC, target=TGT)
    table = build_translation_table([PAIR, bare], "lemmas")
    assert table.stats == {"pairs": 2, "pairs_with_links": 1, "links_used": 10}


def test_build_rejects_unknown_variant():
    with pytest.raises(ValueError, match="variant"):
        build_translation_table([PAIR], "phrases")


def test_merge_reproduces_pooled_counts():
    a = TranslationTable("lemmas", {"haus": Counter({"house": 3})}, stats={"links_used": 3})
    b = TranslationTable("lemmas", {"haus": Counter({"home": 1})}, stats={"links_used": 1})
    merged = merge_tables(a, b)
    assert merged.counts["haus"] == Counter({"house": 3, "home": 1})
    assert merged.prob("house", "haus") == pytest.approx(0.75)
    assert merged.stats == {"links_used": 4}
    with pytest.raises(ValueError, match="variant"):
        merge_tables(a, TranslationTable("subtrees"))


def test_table_tsv_round_trip(tmp_path):
    table = build_translation_table([PAIR], "lemmas", provenance=["d1"])
    table.fallback = FallbackPolicy(median=0.5, sd=0.25, n_defined=7)
    path = str(tmp_path / "table.tsv")
    table.to_tsv(path)
    back = TranslationTable.from_tsv(path)
    assert back.variant == table.variant
    assert back.counts == table.counts
    assert back.provenance == table.provenance
    assert back.stats == table.stats
    assert back.fallback == table.fallback


def test_table_tsv_requires_header(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("src_lemma\ttgt_lemma\tcount\n", encoding="utf-8")
    with pytest.raises(ValueError, match="JSON header"):
        TranslationTable.from_tsv(str(path))


# ---------------------------------------------------------------------------
# Entropy


def test_solution_entropy_known_values():
    assert solution_entropy("hund", LEMMA_TABLE) == pytest.approx(H_3_1, abs=1e-12)
    even = TranslationTable("lemmas", {"x": Counter({"a": 1, "b": 1})})
    assert solution_entropy("x", even) == pytest.approx(1.0, abs=1e-15)


def test_single_solution_seen_twice_has_zero_entropy():
    assert solution_entropy("mann", LEMMA_TABLE) == 0.0


def test_absent_and_singleton_keys_need_fallback():
    with pytest.raises(FallbackNeeded) as exc:
        solution_entropy("zzz", LEMMA_TABLE)
    assert exc.value.key == "zzz"
    with pytest.raises(FallbackNeeded):
        solution_entropy("einzel", LEMMA_TABLE)


def test_compute_fallback_median_plus_two_sd():
    policy = compute_fallback([SRC], LEMMA_TABLE)
    # defined entropies: der 0.0, mann 0.0, hund H(3,1)
    assert policy.n_defined == 3
    assert policy.median == 0.0
    assert policy.sd == pytest.approx(H_3_1 * math.sqrt(2) / 3, abs=1e-12)
    assert policy.value == pytest.approx(2 * H_3_1 * math.sqrt(2) / 3, abs=1e-12)


def test_compute_fallback_with_no_defined_words():
    policy = compute_fallback([SRC], TranslationTable("lemmas"))
    assert policy == FallbackPolicy(median=0.0, sd=0.0, n_defined=0)


def test_segment_entropy_sums_words_and_fallbacks():
    total = segment_entropy(SRC, LEMMA_TABLE, FALLBACK)
    assert total == pytest.approx(14.0 + H_3_1, abs=1e-9)


def test_segment_entropy_single_unseen_word_gets_fallback():
    one_word = seg(sent([("Neu", "neu", "ADJ", 0, "root")]))
    assert segment_entropy(one_word, LEMMA_TABLE, FallbackPolicy(1.0, 0.5)) == pytest.approx(2.0)


def test_segment_entropy_empty_unit_set_is_zero():
    only_punct = seg(sent([(".", ".", "PUNCT", 0, "root")]))
    assert segment_entropy(only_punct, LEMMA_TABLE, FALLBACK) == 0.0


def test_segment_entropy_without_fallback_errors_when_needed():
    with pytest.raises(ValueError, match="fallback not initialized"):
        segment_entropy(SRC, LEMMA_TABLE, None)
    covered = seg(sent([("Hund", "Hund", "NOUN", 0, "root")]))
    assert segment_entropy(covered, LEMMA_TABLE, None) == pytest.approx(H_3_1)


@settings(deadline=None)
@given(
    st.lists(st.integers(min_value=1, max_value=10), min_size=1, max_size=8)
)
def test_solution_entropy_against_scipy(counts):
    table = TranslationTable("lemmas", {"k": Counter({f"t{i}": c for i, c in enumerate(counts)})})
    if sum(counts) < 2:
        with pytest.raises(FallbackNeeded):
            solution_entropy("k", table)
        return
    h = solution_entropy("k", table)
    assert h == pytest.approx(scipy_stats.entropy(counts, base=2), abs=1e-12)
    assert -1e-12 <= h <= math.log2(len(counts)) + 1e-12


small_tables = st.dictionaries(
    st.sampled_from(["a", "b", "c"]),
    st.dictionaries(st.sampled_from(["x", "y", "z"]), st.integers(1, 5), min_size=1, max_size=3),
    max_size=3,
)


@given(small_tables, small_tables, small_tables)
def test_merge_is_associative_and_commutative_on_counts(ca, cb, cc):
    def mk(c):
        return TranslationTable("lemmas", {k: Counter(v) for k, v in c.items()})

    left = merge_tables(merge_tables(mk(ca), mk(cb)), mk(cc)).counts
    right = merge_tables(mk(ca), merge_tables(mk(cb), mk(cc))).counts
    assert left == right
    assert merge_tables(mk(ca), mk(cb)).counts == merge_tables(mk(cb), mk(ca)).counts


# ---------------------------------------------------------------------------
# Alignment means


def test_mean_alignment_worked_example():
    pair = SegmentPair(source=SRC, target=TGT, links=[Link(2, 2, 0.8), Link(3, 3, 1.0)])
    assert mean_alignment(pair) == pytest.approx(0.9)


def test_mean_alignment_on_fixture():
    assert mean_alignment(PAIR) == pytest.approx(0.84)
    assert mean_alignment(PAIR, "content") == pytest.approx(6 / 7)
    assert mean_alignment(PAIR, unit="subtrees") == pytest.approx(0.8)


def test_mean_alignment_content_requires_both_endpoints():
    # zwei(NUM) -> two(NUM): neither side is content, so the content mean
    # falls back to an error when that is the only link.
    pair = SegmentPair(source=SRC, target=TGT, links=[Link(4, 4, 1.0)])
    assert mean_alignment(pair) == pytest.approx(1.0)
    with pytest.raises(AlignmentUndefinedError):
        mean_alignment(pair, "content")


def test_mean_alignment_empty_is_an_error_not_zero():
    bare = SegmentPair(source=SRC, target=TGT)
    with pytest.raises(AlignmentUndefinedError):
        mean_alignment(bare)
    with pytest.raises(AlignmentUndefinedError):
        mean_alignment(bare, unit="subtrees")
    with pytest.raises(ValueError, match="unit"):
        mean_alignment(PAIR, unit="chars")


# ---------------------------------------------------------------------------
# Missing-value propagation


def test_bleu_uses_pred_forms_against_target_forms():
    tgt = seg(*_tgt_rows({"dogs": "cats"}), side="tgt", language="en")
    pair = SegmentPair(source=SRC, target=tgt, links=list(LINKS), subtree_links=list(SUBTREE_LINKS))
    vec = extract_difficulty_vector(pair, TABLES, FALLBACKS)
    ref = [t.form for t in tgt.tokens()]
    hyp = [t.pred_form for t in tgt.tokens()]
    assert vec.values["bleu"] == pytest.approx(pseudo_bleu(ref, hyp))
    assert vec.values["bleu"] < 100.0


def test_unannotated_pair_reports_missing_names_instead_of_zeros():
    bare_src = seg(
        sent([("Guten", "gut", "ADJ", 2, "amod"), ("Tag", "Tag", "NOUN", 0, "root")]),
        side="src",
    )
    bare_tgt = seg(
        sent([("Good", "good", "ADJ", 2, "amod"), ("day", "day", "NOUN", 0, "root")]),
        side="tgt",
        language="en",
    )
    pair = SegmentPair(source=bare_src, target=bare_tgt)
    vec = extract_difficulty_vector(pair, {}, None)
    assert set(vec.values) == set(DIFFICULTY_NAMES)
    expected_missing = {
        "bleu", "mean_align", "mean_align_content", "mean_cosine",
        "mt_AvS", "mt_AvS_content", "mt_AvS_subw",
        "src_gpt_AvS", "src_gpt_AvS_content", "src_gpt_AvS_subw",
        "tot_entropy", "tot_entropy_content", "tot_entropy_trees",
    }
    assert set(vec.missing) == expected_missing
    for name in expected_missing:
        assert vec.values[name] is None
    # structural features still come out
    assert vec.values["src_tree_depth"] == 2.0
    assert vec.values["src_n_clauses"] == 1.0


def test_fallbacks_default_to_the_tables_attachment():
    table = TranslationTable("lemmas", dict(LEMMA_TABLE.counts))
    table.fallback = FALLBACK
    tables = {"lemmas": table, "content-lemmas": CONTENT_TABLE, "subtrees": SUBTREE_TABLE}
    vec = extract_difficulty_vector(PAIR, tables, {"content-lemmas": FALLBACK, "subtrees": FALLBACK})
    assert vec.values["tot_entropy"] == pytest.approx(14.0 + H_3_1, abs=1e-9)
