import pytest

import fixture_corpus
from udannot import conllu


# function-scoped on purpose: annotation passes mutate token MISC in place
@pytest.fixture()
def corpus_docs():
    src_text, tgt_text, manifest = fixture_corpus.build_corpus_text()
    return conllu.parse_conllu(src_text), conllu.parse_conllu(tgt_text), manifest


@pytest.fixture()
def corpus_dir(tmp_path):
    fixture_corpus.write_corpus_dir(tmp_path, conllu)
    return tmp_path


@pytest.fixture()
def lexicon_path(tmp_path_factory):
    return fixture_corpus.write_lexicon(tmp_path_factory.mktemp("lex") / "deen.tsv")
