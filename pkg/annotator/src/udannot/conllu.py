"""Minimal CoNLL-U and sidecar TSV I/O for annotation jobs.

Covers exactly what annotation needs: documents of segments, segments of
sentences, MISC as an ordered key/value dict, and byte-stable serialization.
Deep tree and annotation validation is the consumer's job; this reader only
rejects input it cannot represent faithfully.

Conventions shared with the downstream analytics suite:
- documents open with `# newdoc id = ...`, segments with `# seg_id = ...`;
  a sentence block without its own seg_id continues the previous segment
- MISC is `Key=Value|Key=Value` with `_` for none
- link sidecar token indices are 0-based flat offsets over a segment's
  concatenated sentences
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

MANIFEST_HEADER = ("doc_id", "src_seg", "tgt_seg")
LINKS_HEADER = ("doc_id", "src_seg", "tgt_seg", "src_tok", "tgt_tok", "score")
SUBTREES_HEADER = ("doc_id", "src_seg", "tgt_seg", "src_sig", "tgt_sig", "cosine")


class ConlluFormatError(ValueError):
    """Unparseable CoNLL-U or sidecar content; message carries file:line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = f"{path or '<text>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass
class Token:
    id: int
    form: str
    lemma: str
    upos: str
    xpos: str
    feats: str
    head: int
    deprel: str
    deps: str
    misc: dict[str, str] = field(default_factory=dict)

    def to_line(self) -> str:
        misc = "|".join(f"{k}={v}" for k, v in self.misc.items()) or "_"
        return "\t".join(
            (str(self.id), self.form, self.lemma, self.upos, self.xpos,
             self.feats, str(self.head), self.deprel, self.deps, misc)
        )


@dataclass
class Sentence:
    tokens: list[Token] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)

    def token(self, token_id: int) -> Token:
        return self.tokens[token_id - 1]

    def children(self, head_id: int) -> list[int]:
        return [tok.id for tok in self.tokens if tok.head == head_id]


@dataclass
class Segment:
    seg_id: str
    sentences: list[Sentence] = field(default_factory=list)

    def tokens(self) -> list[Token]:
        """Flat token list across sentences; its 0-based positions are the
        link sidecar offsets."""
        return [tok for sent in self.sentences for tok in sent.tokens]


@dataclass
class Document:
    doc_id: str
    segments: list[Segment] = field(default_factory=list)

    def segment(self, seg_id: str) -> Segment:
        for seg in self.segments:
            if seg.seg_id == seg_id:
                return seg
        raise KeyError(f"document {self.doc_id!r} has no segment {seg_id!r}")


def _parse_misc(raw: str, path: str | None, lineno: int) -> dict[str, str]:
    if raw == "_":
        return {}
    misc: dict[str, str] = {}
    for part in raw.split("|"):
        key, eq, value = part.partition("=")
        if not eq or not key:
            raise ConlluFormatError(f"MISC entry {part!r} is not Key=Value", path, lineno)
        misc[key] = value
    return misc


def _parse_token(line: str, path: str | None, lineno: int) -> Token:
    cols = line.split("\t")
    if len(cols) != 10:
        raise ConlluFormatError(f"expected 10 columns, got {len(cols)}", path, lineno)
    try:
        token_id, head = int(cols[0]), int(cols[6])
    except ValueError:
        raise ConlluFormatError(f"non-integer ID or HEAD in {line!r}", path, lineno) from None
    return Token(
        id=token_id, form=cols[1], lemma=cols[2], upos=cols[3], xpos=cols[4],
        feats=cols[5], head=head, deprel=cols[7], deps=cols[8],
        misc=_parse_misc(cols[9], path, lineno),
    )


def parse_conllu(text: str, path: str | None = None) -> list[Document]:
    documents: list[Document] = []
    doc: Document | None = None
    pending_seg: str | None = None
    tokens: list[Token] = []
    comments: list[str] = []
    start_line = 0

    def flush(lineno: int) -> None:
        nonlocal tokens, comments, pending_seg
        if not tokens and not comments and pending_seg is None:
            return
        if not tokens:
            raise ConlluFormatError("comments without token lines", path, start_line)
        if doc is None:
            raise ConlluFormatError("token lines before any '# newdoc id'", path, start_line)
        sentence = Sentence(tokens=tokens, comments=comments)
        if pending_seg is not None:
            doc.segments.append(Segment(seg_id=pending_seg, sentences=[sentence]))
        elif doc.segments:
            doc.segments[-1].sentences.append(sentence)
        else:
            raise ConlluFormatError("sentence before any '# seg_id'", path, start_line)
        tokens, comments, pending_seg = [], [], None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            if not tokens:
                start_line = lineno
            body = line[1:].strip()
            if body.startswith("newdoc id"):
                flush(lineno)
                doc = Document(doc_id=body.partition("=")[2].strip())
                documents.append(doc)
            elif body.startswith("seg_id"):
                if tokens:
                    raise ConlluFormatError("seg_id comment inside a sentence", path, lineno)
                pending_seg = body.partition("=")[2].strip()
            else:
                comments.append(line)
            continue
        if not tokens:
            start_line = lineno
        tokens.append(_parse_token(line, path, lineno))
    flush(len(text.splitlines()) + 1)
    return documents


def serialize(documents: list[Document]) -> str:
    out: list[str] = []
    for doc in documents:
        out.append(f"# newdoc id = {doc.doc_id}")
        for seg in doc.segments:
            out.append(f"# seg_id = {seg.seg_id}")
            for sent in seg.sentences:
                out.extend(sent.comments)
                out.extend(tok.to_line() for tok in sent.tokens)
                out.append("")
    return "\n".join(out) + ("\n" if out else "")


def read_conllu(path: str) -> list[Document]:
    with open(path, encoding="utf-8") as handle:
        return parse_conllu(handle.read(), path=path)


def write_conllu(documents: list[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize(documents))


def read_manifest(path: str) -> list[tuple[str, str, str]]:
    rows = _read_tsv(path, MANIFEST_HEADER)
    return [(r[0], r[1], r[2]) for r in rows]


def write_manifest(rows: list[tuple[str, str, str]], path: str) -> None:
    _write_tsv(path, MANIFEST_HEADER, rows)


def write_links(rows: list[tuple], path: str) -> None:
    """Rows are (doc_id, src_seg, tgt_seg, src_tok, tgt_tok, score)."""
    _write_tsv(path, LINKS_HEADER, [r[:5] + (repr(float(r[5])),) for r in rows])


def write_subtree_links(rows: list[tuple], path: str) -> None:
    """Rows are (doc_id, src_seg, tgt_seg, src_sig, tgt_sig, cosine)."""
    _write_tsv(path, SUBTREES_HEADER, [r[:5] + (repr(float(r[5])),) for r in rows])


def _read_tsv(path: str, header: tuple[str, ...]) -> list[list[str]]:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].split("\t") != list(header):
        raise ConlluFormatError(f"expected header {list(header)}", path, 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != len(header):
            raise ConlluFormatError(
                f"expected {len(header)} columns, got {len(cols)}", path, lineno
            )
        rows.append(cols)
    return rows


def _write_tsv(path: str, header: tuple[str, ...], rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            handle.write("\t".join(str(col) for col in row) + "\n")


def corpus_paths(directory: str, mode: str, lpair: str) -> dict[str, str]:
    base = os.path.join(directory, f"{mode}_{lpair}")
    return {
        "org": f"{base}_org.conllu",
        "src": f"{base}_src.conllu",
        "tgt": f"{base}_tgt.conllu",
        "manifest": f"{base}.manifest.tsv",
        "links": f"{base}.links.tsv",
        "subtrees": f"{base}.subtrees.tsv",
    }


def side_language(lpair: str, side: str) -> str:
    if len(lpair) != 4:
        raise ValueError(f"language pair must be 4 letters like 'deen', got {lpair!r}")
    return lpair[:2] if side == "src" else lpair[2:]
