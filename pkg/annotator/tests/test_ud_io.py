import pytest

from udannot import conllu


SAMPLE = """# newdoc id = d1
# seg_id = s1
1\tDer\tder\tDET\t_\t_\t2\tdet\t_\t_
2\tHund\tHund\tNOUN\t_\t_\t0\troot\t_\tSrp=1.5|SrpSub=0.5,1.0

# seg_id = s2
1\tJa\tja\tINTJ\t_\t_\t0\troot\t_\t_

1\tDoch\tdoch\tADV\t_\t_\t0\troot\t_\t_

# newdoc id = d2
# seg_id = s1
1\tNein\tnein\tINTJ\t_\t_\t0\troot\t_\t_

"""


def test_parse_basic_structure():
    docs = conllu.parse_conllu(SAMPLE)
    assert [d.doc_id for d in docs] == ["d1", "d2"]
    assert [s.seg_id for s in docs[0].segments] == ["s1", "s2"]
    # the bare sentence block continues segment s2
    assert len(docs[0].segment("s2").sentences) == 2
    assert [t.form for t in docs[0].segment("s2").tokens()] == ["Ja", "Doch"]


def test_misc_round_trip():
    docs = conllu.parse_conllu(SAMPLE)
    token = docs[0].segment("s1").tokens()[1]
    assert token.misc == {"Srp": "1.5", "SrpSub": "0.5,1.0"}
    assert token.to_line().endswith("Srp=1.5|SrpSub=0.5,1.0")


def test_serialize_round_trip_is_byte_identical():
    docs = conllu.parse_conllu(SAMPLE)
    text = conllu.serialize(docs)
    assert text == SAMPLE
    assert conllu.serialize(conllu.parse_conllu(text)) == text


@pytest.mark.parametrize(
    "mutation, fragment",
    [
        ("1\tDer\tder\tDET\t_\t_\t2\tdet\t_", "10 columns"),
        ("x\tDer\tder\tDET\t_\t_\t2\tdet\t_\t_", "ID"),
        ("1\tDer\tder\tDET\t_\t_\ty\tdet\t_\t_", "HEAD"),
        ("1\tDer\tder\tDET\t_\t_\t2\tdet\t_\tSrp", "MISC"),
    ],
)
def test_malformed_token_line_reports_position(mutation, fragment):
    text = SAMPLE.replace("1\tDer\tder\tDET\t_\t_\t2\tdet\t_\t_", mutation)
    with pytest.raises(conllu.ConlluFormatError) as err:
        conllu.parse_conllu(text)
    assert ":3:" in str(err.value)
    assert fragment in str(err.value)


def test_token_before_newdoc_rejected():
    with pytest.raises(conllu.ConlluFormatError) as err:
        conllu.parse_conllu("1\tJa\tja\tINTJ\t_\t_\t0\troot\t_\t_\n\n")
    assert ":1:" in str(err.value)


def test_sentence_before_seg_id_rejected():
    text = "# newdoc id = d1\n1\tJa\tja\tINTJ\t_\t_\t0\troot\t_\t_\n\n"
    with pytest.raises(conllu.ConlluFormatError):
        conllu.parse_conllu(text)


def test_seg_id_inside_sentence_rejected():
    text = (
        "# newdoc id = d1\n# seg_id = s1\n"
        "1\tJa\tja\tINTJ\t_\t_\t0\troot\t_\t_\n"
        "# seg_id = s2\n"
    )
    with pytest.raises(conllu.ConlluFormatError):
        conllu.parse_conllu(text)


def test_file_io_round_trip(tmp_path):
    path = str(tmp_path / "mini.conllu")
    docs = conllu.parse_conllu(SAMPLE)
    conllu.write_conllu(docs, path)
    assert conllu.serialize(conllu.read_conllu(path)) == SAMPLE


def test_parse_error_names_file(tmp_path):
    path = tmp_path / "bad.conllu"
    path.write_text("1\tJa\tja\tINTJ\t_\t_\t0\troot\t_\t_\n\n", encoding="utf-8")
    with pytest.raises(conllu.ConlluFormatError) as err:
        conllu.read_conllu(str(path))
    assert str(path) in str(err.value)


def test_manifest_round_trip(tmp_path):
    path = str(tmp_path / "m.tsv")
    rows = [("d1", "s1", "s1"), ("d1", "s2", "s2")]
    conllu.write_manifest(rows, path)
    assert conllu.read_manifest(path) == rows


def test_links_tsv_written_with_header(tmp_path):
    path = str(tmp_path / "l.tsv")
    conllu.write_links([("d1", "s1", "s1", 0, 0, 0.75)], path)
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0].split("\t") == list(conllu.LINKS_HEADER)
    assert lines[1] == "d1\ts1\ts1\t0\t0\t0.75"


def test_subtree_links_tsv_written_with_header(tmp_path):
    path = str(tmp_path / "st.tsv")
    conllu.write_subtree_links(
        [("d1", "s1", "s1", "VERB(nsubj:NOUN)", "VERB(nsubj:NOUN)", 1.0)], path
    )
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0].split("\t") == list(conllu.SUBTREES_HEADER)
    assert lines[1].endswith("\t1.0")


def test_corpus_paths_naming(tmp_path):
    paths = conllu.corpus_paths(str(tmp_path), "written", "deen")
    assert paths["src"].endswith("written_deen_src.conllu")
    assert paths["tgt"].endswith("written_deen_tgt.conllu")
    assert paths["org"].endswith("written_deen_org.conllu")
    assert paths["manifest"].endswith("written_deen.manifest.tsv")
    assert paths["links"].endswith("written_deen.links.tsv")
    assert paths["subtrees"].endswith("written_deen.subtrees.tsv")


def test_side_language():
    assert conllu.side_language("deen", "src") == "de"
    assert conllu.side_language("deen", "tgt") == "en"
    assert conllu.side_language("deen", "org") == "en"
    with pytest.raises(ValueError):
        conllu.side_language("de", "src")
