import math

import pytest

from udannot import annotate, models
from udannot.annotate import PairHandle


def _pairs(corpus_docs):
    src_docs, tgt_docs, manifest = corpus_docs
    src_by_id = {d.doc_id: d for d in src_docs}
    tgt_by_id = {d.doc_id: d for d in tgt_docs}
    return [
        PairHandle(doc_id, src_seg, tgt_seg,
                   src_by_id[doc_id].segment(src_seg),
                   tgt_by_id[doc_id].segment(tgt_seg))
        for doc_id, src_seg, tgt_seg in manifest
    ]


class _OneFormFails:
    """LM stub: refuses one surface form, scores everything else."""

    def __init__(self, bad_form):
        self.bad_form = bad_form
        self.inner = models.FixedProbLM(p=0.5)

    def score(self, context, form):
        if form == self.bad_form:
            return None
        return self.inner.score(context, form)


class TestSurprisal:
    def test_totals_equal_sum_of_parts_after_reparse(self, corpus_docs):
        src_docs, _, _ = corpus_docs
        stats = annotate.annotate_surprisal(src_docs, models.HashedCharLM(seed=0))
        assert stats.flags == []
        checked = 0
        for doc in src_docs:
            for seg in doc.segments:
                for token in seg.tokens():
                    parts = [float(x) for x in token.misc["SrpSub"].split(",")]
                    assert float(token.misc["Srp"]) == math.fsum(parts)
                    assert all(p >= 0.0 for p in parts)
                    checked += 1
        assert checked == stats.annotated == 40

    def test_subword_count_matches_chunker(self, corpus_docs):
        src_docs, _, _ = corpus_docs
        annotate.annotate_surprisal(src_docs, models.FixedProbLM(p=0.5))
        token = src_docs[0].segment("s2").tokens()[2]  # schläft: 7 chars
        assert len(token.misc["SrpSub"].split(",")) == len(models.chunk_subwords(token.form))

    def test_alignment_failure_flags_token_and_continues(self, corpus_docs):
        src_docs, _, _ = corpus_docs
        stats = annotate.annotate_surprisal(src_docs, _OneFormFails("Katze"))
        assert len(stats.flags) == 1
        assert "Katze" in stats.flags[0]
        assert "subword alignment failed" in stats.flags[0]
        bad = src_docs[0].segment("s2").tokens()[1]
        assert "Srp" not in bad.misc
        # the rest of the corpus was still annotated
        assert stats.annotated == 39


class TestForcedDecoding:
    def test_matching_lexicon_predicts_gold_everywhere(self, corpus_docs, lexicon_path):
        pairs = _pairs(corpus_docs)
        translator = models.resolve_translator(f"lexicon:{lexicon_path}", max_len=64)
        stats = annotate.annotate_mt(pairs, translator)
        assert stats.flags == []
        for pair in pairs:
            for token in pair.target.tokens():
                assert token.misc["Pred"] == token.form
                assert float(token.misc["MtSrp"]) >= 0.0
                parts = [float(x) for x in token.misc["MtSrpSub"].split(",")]
                assert float(token.misc["MtSrp"]) == math.fsum(parts)

    def test_overflow_skips_segment_and_flags(self, corpus_docs):
        pairs = _pairs(corpus_docs)
        translator = models.LexiconTranslator({}, max_len=3)
        stats = annotate.annotate_mt(pairs, translator)
        # every segment has 4 tokens, so every pair overflows
        assert len(stats.flags) == len(pairs)
        assert all(flag.startswith("mt ") for flag in stats.flags)
        assert stats.annotated == 0
        for pair in pairs:
            for token in pair.target.tokens():
                assert "MtSrp" not in token.misc


class TestAlignment:
    def test_identical_sides_link_diagonally(self, corpus_docs):
        src_docs, _, manifest = corpus_docs
        pairs = [
            PairHandle(doc_id, s, t,
                       next(d for d in src_docs if d.doc_id == doc_id).segment(s),
                       next(d for d in src_docs if d.doc_id == doc_id).segment(t))
            for doc_id, s, t in manifest
        ]
        links, stats = annotate.annotate_alignment(pairs, models.NgramEncoder(dim=64))
        assert stats.flags == []
        diagonal = {(l[0], l[1], l[3]): l[4] for l in links if l[3] == l[4]}
        # every token aligns to itself when the two sides are identical
        assert len(diagonal) == 40

    def test_scores_bounded_and_misc_written(self, corpus_docs):
        pairs = _pairs(corpus_docs)
        links, stats = annotate.annotate_alignment(pairs, models.NgramEncoder(dim=64))
        assert stats.annotated == len(pairs)
        assert links
        for _, _, _, src_tok, tgt_tok, score in links:
            assert 0.0 <= score <= 1.0
            assert src_tok >= 0 and tgt_tok >= 0
        for pair in pairs:
            for token in pair.source.tokens() + pair.target.tokens():
                if "Align" in token.misc:
                    assert 0.0 <= float(token.misc["Align"]) <= 1.0

    def test_encoder_failure_flags_pair_and_continues(self, corpus_docs):
        pairs = _pairs(corpus_docs)

        class Boom:
            def __init__(self):
                self.calls = 0
                self.inner = models.NgramEncoder(dim=16)

            def embed(self, text):
                self.calls += 1
                if self.calls == 1:
                    raise models.ModelError("no embedding space")
                return self.inner.embed(text)

        links, stats = annotate.annotate_alignment(pairs, Boom())
        assert len(stats.flags) == 1
        assert stats.flags[0].startswith("alignment d1/s1->s1:")
        assert stats.annotated == len(pairs) - 1
        assert all(link[0:2] != ("d1", "s1") for link in links)


class TestSubtrees:
    def test_signature_format(self, corpus_docs):
        src_docs, _, _ = corpus_docs
        sentence = src_docs[0].segment("s1").sentences[0]
        # head is the verb (id 3) with det+nsubj+punct attached beneath it
        sig = annotate.subtree_signature(sentence, 3)
        assert sig == "VERB(nsubj:NOUN,punct:PUNCT)"

    def test_rows_follow_word_links(self, corpus_docs):
        pairs = _pairs(corpus_docs)
        encoder = models.NgramEncoder(dim=64)
        links, _ = annotate.annotate_alignment(pairs, encoder)
        rows = annotate.subtree_links(pairs, links, encoder)
        assert rows
        for doc_id, src_seg, tgt_seg, src_sig, tgt_sig, cosine in rows:
            assert "(" in src_sig and "(" in tgt_sig
            assert 0.0 <= cosine <= 1.0
