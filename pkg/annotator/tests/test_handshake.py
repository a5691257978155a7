"""End-to-end contract with the consumer toolkit (medload).

The annotator only ever talks to medload through files, so these tests run a
job and then load the output directory with medload's own reader: it must
parse with zero warnings, the surprisal totals must match their subword
parts, and a gold target that equals the greedy decode must score a perfect
pseudo-BLEU.
"""

import math

import numpy as np
import pytest

from medload import conllu as primary_conllu
from medload.difficulty import pseudo_bleu
from medload.pipeline import matrix_from_pairs

from udannot.job import AnnotationJob, run_job


@pytest.fixture(scope="module")
def annotated(tmp_path_factory):
    import fixture_corpus
    from udannot import conllu as annot_conllu

    in_dir = tmp_path_factory.mktemp("handshake_in")
    out_dir = tmp_path_factory.mktemp("handshake_out")
    fixture_corpus.write_corpus_dir(in_dir, annot_conllu)
    lexicon = fixture_corpus.write_lexicon(tmp_path_factory.mktemp("handshake_lex") / "deen.tsv")
    job = AnnotationJob(
        lpair="deen",
        source_lm={"de": "hashed:0"},
        translation={"deen": f"lexicon:{lexicon}"},
    )
    report = run_job(job, str(in_dir), str(out_dir))
    return str(out_dir), report


@pytest.fixture(scope="module")
def loaded(annotated):
    out_dir, _ = annotated
    warnings: list[str] = []
    corpus = primary_conllu.load_corpus(out_dir, "written", "deen", warnings=warnings)
    return corpus, warnings


def test_fixture_has_ten_sentences(loaded):
    corpus, _ = loaded
    sentences = [s for seg in corpus.segments("src") for s in seg.sentences]
    assert len(sentences) == 10


def test_consumer_loads_with_zero_warnings(annotated, loaded):
    _, report = annotated
    corpus, warnings = loaded
    assert report["flags"] == []
    assert warnings == []
    assert len(corpus.pairs) == 10


def test_surprisal_totals_match_parts(loaded):
    corpus, _ = loaded
    checked = 0
    for segment in corpus.segments("src"):
        for token in segment.tokens():
            total = token.src_surprisal
            parts = token.src_surprisal_subwords
            assert total is not None and parts is not None
            assert abs(total - math.fsum(parts)) <= 1e-4
            checked += 1
    assert checked == 40


def test_mt_surprisal_totals_match_parts(loaded):
    corpus, _ = loaded
    for pair in corpus.pairs:
        for token in pair.target.tokens():
            total = token.mt_surprisal
            parts = token.mt_surprisal_subwords
            assert total is not None and parts is not None
            assert abs(total - math.fsum(parts)) <= 1e-4


def test_greedy_equals_gold_scores_perfect_bleu(loaded):
    corpus, _ = loaded
    for pair in corpus.pairs:
        reference = [t.form for t in pair.target.tokens()]
        prediction = [t.misc["Pred"] for t in pair.target.tokens()]
        assert prediction == reference
        assert pseudo_bleu(reference, prediction) == pytest.approx(100.0, abs=1e-9)


def test_alignment_links_survive_the_round_trip(loaded):
    corpus, _ = loaded
    linked_pairs = [pair for pair in corpus.pairs if pair.links]
    assert len(linked_pairs) == 10
    for pair in corpus.pairs:
        n_src = pair.source.token_count
        n_tgt = pair.target.token_count
        for link in pair.links:
            assert 0 <= link.src < n_src
            assert 0 <= link.tgt < n_tgt
            assert 0.0 <= link.score <= 1.0
        assert pair.subtree_links
        for sub in pair.subtree_links:
            assert 0.0 <= sub.cosine <= 1.0


def test_annotation_driven_indicators_are_finite(loaded):
    corpus, _ = loaded
    matrix = matrix_from_pairs(corpus.pairs, tables={})
    for name in ("bleu", "mean_align", "mt_AvS", "src_gpt_AvS", "mean_cosine"):
        column = matrix.data[:, matrix.names.index(name)]
        assert np.isfinite(column).all(), name
    bleu = matrix.data[:, matrix.names.index("bleu")]
    assert np.allclose(bleu, 100.0)
