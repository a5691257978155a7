"""CoNLL-U ingestion, validation, serialization, and parallel-corpus assembly.

File conventions
----------------
Documents open with ``# newdoc id = <doc_id>``, segments with
``# seg_id = <seg_id>``; sentences that follow without a new ``seg_id``
continue the current segment.  Token lines carry the usual 10 tab-separated
columns with ``_`` for empty.  Recognized MISC keys:

    Srp      per-token source-LM surprisal, bits
    SrpSub   comma-joined per-subword surprisals, bits
    MtSrp    per-token MT-decoder surprisal, bits
    MtSrpSub comma-joined per-subword MT surprisals, bits
    Align    alignment confidence in [0, 1]
    Pred     teacher-forced decoder prediction for the token

Unrecognized MISC keys, multiword-token ranges (``1-2``) and empty nodes
(``1.1``) are preserved opaquely.  ``serialize(parse(text))`` reproduces token
columns and recognized MISC keys byte-identically for valid inputs (FEATS and
MISC are kept in input order); comments are re-emitted after the structural
``newdoc``/``seg_id`` lines of their sentence.

Sidecar TSVs
------------
Segment manifest:   doc_id  src_seg  tgt_seg
Word links:         doc_id  src_seg  tgt_seg  src_tok  tgt_tok  score
Subtree links:      doc_id  src_seg  tgt_seg  src_sig  tgt_sig  cosine

Word-link token indices are 0-based flat offsets across the segment's
concatenated sentences.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator

MISC_KEYS = ("Srp", "SrpSub", "MtSrp", "MtSrpSub", "Align", "Pred")

MANIFEST_HEADER = ("doc_id", "src_seg", "tgt_seg")
LINKS_HEADER = ("doc_id", "src_seg", "tgt_seg", "src_tok", "tgt_tok", "score")
SUBTREES_HEADER = ("doc_id", "src_seg", "tgt_seg", "src_sig", "tgt_sig", "cosine")


class ConlluError(ValueError):
    """Malformed or invariant-violating CoNLL-U / sidecar input."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = path
        if line is not None:
            loc = f"{loc}:{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


def _parse_kv_column(raw: str, column: str) -> dict[str, str]:
    # FEATS/MISC "_" means empty; entries keep input order, bare keys map to "".
    if raw == "_":
        return {}
    out: dict[str, str] = {}
    for item in raw.split("|"):
        if not item:
            raise ConlluError(f"empty {column} entry in {raw!r}")
        key, sep, value = item.partition("=")
        out[key] = value if sep else ""
    return out


def _serialize_kv_column(entries: dict[str, str]) -> str:
    if not entries:
        return "_"
    parts = []
    for key, value in entries.items():
        parts.append(f"{key}={value}" if value != "" else key)
    return "|".join(parts)


@dataclass
class Token:
    """One syntactic word (a plain integer-ID CoNLL-U row)."""

    id: int
    form: str
    lemma: str
    upos: str
    xpos: str | None
    feats: dict[str, str]
    head: int
    deprel: str
    deps: str
    misc: dict[str, str]

    @property
    def is_punct(self) -> bool:
        return self.upos == "PUNCT"

    def feats_has(self, key: str, value: str) -> bool:
        """True when FEATS carries `value` under `key`, honoring comma
        multi-values (PronType=Int,Rel matches Rel)."""
        raw = self.feats.get(key)
        if raw is None:
            return False
        return value in raw.split(",")

    def _misc_float(self, key: str) -> float | None:
        raw = self.misc.get(key)
        if raw is None:
            return None
        try:
            return float(raw)
        except ValueError as exc:
            raise ConlluError(f"token {self.id}: MISC {key}={raw!r} is not a number") from exc

    def _misc_float_list(self, key: str) -> list[float] | None:
        raw = self.misc.get(key)
        if raw is None:
            return None
        try:
            return [float(part) for part in raw.split(",")]
        except ValueError as exc:
            raise ConlluError(f"token {self.id}: MISC {key}={raw!r} is not a comma-joined float list") from exc

    @property
    def src_surprisal(self) -> float | None:
        return self._misc_float("Srp")

    @property
    def src_surprisal_subwords(self) -> list[float] | None:
        return self._misc_float_list("SrpSub")

    @property
    def mt_surprisal(self) -> float | None:
        return self._misc_float("MtSrp")

    @property
    def mt_surprisal_subwords(self) -> list[float] | None:
        return self._misc_float_list("MtSrpSub")

    @property
    def align_score(self) -> float | None:
        return self._misc_float("Align")

    @property
    def pred_form(self) -> str | None:
        return self.misc.get("Pred")

    def to_line(self) -> str:
        cols = (
            str(self.id),
            self.form,
            self.lemma,
            self.upos,
            self.xpos if self.xpos is not None else "_",
            _serialize_kv_column(self.feats),
            str(self.head),
            self.deprel,
            self.deps,
            _serialize_kv_column(self.misc),
        )
        return "\t".join(cols)


def make_token(
    id: int,
    form: str,
    lemma: str | None = None,
    upos: str = "X",
    head: int = 0,
    deprel: str = "root",
    xpos: str | None = None,
    feats: dict[str, str] | None = None,
    misc: dict[str, str] | None = None,
) -> Token:
    """Builder for programmatic construction; FEATS sorted canonically."""
    feats = dict(sorted((feats or {}).items(), key=lambda kv: kv[0].lower()))
    return Token(
        id=id,
        form=form,
        lemma=lemma if lemma is not None else form.lower(),
        upos=upos,
        xpos=xpos,
        feats=feats,
        head=head,
        deprel=deprel,
        deps="_",
        misc=dict(misc or {}),
    )


@dataclass
class Sentence:
    """A validated dependency tree plus opaque extras (MWT/empty-node lines).

    `extras` pairs (n_tokens_before, raw_line) so serialization restores the
    original line positions.
    """

    tokens: list[Token]
    comments: list[str] = field(default_factory=list)
    extras: list[tuple[int, str]] = field(default_factory=list)
    _children: list[list[int]] | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def children(self, token_id: int) -> list[int]:
        """IDs of dependents of `token_id` (0 = root pseudo-node)."""
        if self._children is None:
            table: list[list[int]] = [[] for _ in range(len(self.tokens) + 1)]
            for tok in self.tokens:
                table[tok.head].append(tok.id)
            self._children = table
        return self._children[token_id]

    def root(self) -> Token:
        return self.tokens[self.children(0)[0] - 1]

    def token(self, token_id: int) -> Token:
        return self.tokens[token_id - 1]

    def subtree_ids(self, token_id: int) -> list[int]:
        """IDs in the subtree rooted at `token_id`, ascending."""
        out = []
        stack = [token_id]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(self.children(cur))
        return sorted(out)


@dataclass
class Segment:
    """One alignable text unit: a doc-scoped run of sentences."""

    doc_id: str
    seg_id: str
    sentences: list[Sentence]
    side: str = "tgt"
    language: str = "und"

    def tokens(self) -> Iterator[Token]:
        for sent in self.sentences:
            yield from sent.tokens

    def flat_tokens(self) -> list[Token]:
        return list(self.tokens())

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    @property
    def word_count(self) -> int:
        """Non-punctuation token count."""
        return sum(1 for t in self.tokens() if not t.is_punct)

    @property
    def uid(self) -> str:
        return f"{self.doc_id}:{self.seg_id}"


@dataclass
class Document:
    doc_id: str
    segments: list[Segment]
    side: str = "tgt"
    language: str = "und"
    mode: str = "written"


@dataclass
class Link:
    """Word alignment link; indices are 0-based flat token offsets."""

    src: int
    tgt: int
    score: float


@dataclass
class SubtreeLink:
    src_sig: str
    tgt_sig: str
    cosine: float


@dataclass
class SegmentPair:
    source: Segment
    target: Segment
    links: list[Link] = field(default_factory=list)
    subtree_links: list[SubtreeLink] = field(default_factory=list)

    @property
    def doc_id(self) -> str:
        return self.source.doc_id


@dataclass
class Corpus:
    """All sides of one (mode, lpair) subcorpus plus segment pairs."""

    mode: str
    lpair: str
    documents: dict[tuple[str, str], Document] = field(default_factory=dict)
    pairs: list[SegmentPair] = field(default_factory=list)

    def docs(self, side: str) -> list[Document]:
        return [doc for (s, _), doc in self.documents.items() if s == side]

    def segments(self, side: str | None = None) -> Iterator[Segment]:
        for (s, _), doc in self.documents.items():
            if side is None or s == side:
                yield from doc.segments


def side_language(lpair: str, side: str) -> str:
    """Language of a corpus side. lpair concatenates source and target codes
    (deen = de->en); originals share the target language."""
    if len(lpair) != 4:
        raise ValueError(f"lpair must be 4 letters (e.g. deen), got {lpair!r}")
    src, tgt = lpair[:2], lpair[2:]
    if side == "src":
        return src
    if side in ("tgt", "org"):
        return tgt
    raise ValueError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# Parsing


def _validate_tree(tokens: list[Token], path: str | None, line: int) -> None:
    n = len(tokens)
    roots = 0
    for tok in tokens:
        if not 0 <= tok.head <= n:
            raise ConlluError(f"token {tok.id}: head {tok.head} out of range 0..{n}", path, line)
        if tok.head == tok.id:
            raise ConlluError(f"token {tok.id}: self-headed", path, line)
        if tok.head == 0:
            roots += 1
    if roots != 1:
        raise ConlluError(f"sentence has {roots} roots, expected exactly 1", path, line)
    # Cycle check: walk to the root from every node.
    depth_cache = [0] * (n + 1)
    for tok in tokens:
        seen = set()
        cur = tok.id
        while cur != 0 and depth_cache[cur] == 0:
            if cur in seen:
                raise ConlluError(f"dependency cycle through token {cur}", path, line)
            seen.add(cur)
            cur = tokens[cur - 1].head
        for node in seen:
            depth_cache[node] = 1


def _validate_annotations(tokens: list[Token], path: str | None, line: int, warnings: list[str] | None) -> None:
    for tok in tokens:
        try:
            srp = tok.src_surprisal
            srp_sub = tok.src_surprisal_subwords
            mt = tok.mt_surprisal
            mt_sub = tok.mt_surprisal_subwords
            align = tok.align_score
        except ConlluError as exc:
            raise ConlluError(str(exc), path, line) from exc
        for label, val in (("Srp", srp), ("MtSrp", mt)):
            if val is not None and val < 0:
                raise ConlluError(f"token {tok.id}: {label} must be >= 0, got {val}", path, line)
        for label, vals in (("SrpSub", srp_sub), ("MtSrpSub", mt_sub)):
            if vals is not None and any(v < 0 for v in vals):
                raise ConlluError(f"token {tok.id}: {label} values must be >= 0", path, line)
        if align is not None and not 0.0 <= align <= 1.0:
            raise ConlluError(f"token {tok.id}: Align must be in [0, 1], got {align}", path, line)
        if warnings is not None:
            for total, subs, label in ((srp, srp_sub, "Srp"), (mt, mt_sub, "MtSrp")):
                if total is not None and subs is not None and abs(total - sum(subs)) > 1e-4:
                    warnings.append(
                        f"token {tok.id} near line {line}: {label}={total} != sum of subwords {sum(subs):.6f}"
                    )


def _parse_token_line(line: str, path: str | None, lineno: int) -> Token:
    cols = line.split("\t")
    if len(cols) != 10:
        raise ConlluError(f"expected 10 tab-separated columns, got {len(cols)}", path, lineno)
    try:
        tok_id = int(cols[0])
    except ValueError as exc:
        raise ConlluError(f"bad token id {cols[0]!r}", path, lineno) from exc
    try:
        head = int(cols[6])
    except ValueError as exc:
        raise ConlluError(f"token {cols[0]}: bad head {cols[6]!r}", path, lineno) from exc
    try:
        feats = _parse_kv_column(cols[5], "FEATS")
        misc = _parse_kv_column(cols[9], "MISC")
    except ConlluError as exc:
        raise ConlluError(str(exc), path, lineno) from exc
    return Token(
        id=tok_id,
        form=cols[1],
        lemma=cols[2],
        upos=cols[3],
        xpos=None if cols[4] == "_" else cols[4],
        feats=feats,
        head=head,
        deprel=cols[7],
        deps=cols[8],
        misc=misc,
    )


def parse(
    text: str,
    *,
    side: str = "tgt",
    language: str = "und",
    mode: str = "written",
    path: str | None = None,
    warnings: list[str] | None = None,
) -> list[Document]:
    """Parse CoNLL-U text into Documents of Segments.

    Raises ConlluError with the offending line number on malformed input or
    tree/annotation invariant violations.  Non-fatal oddities are appended to
    `warnings` when a list is supplied.
    """
    documents: list[Document] = []
    doc: Document | None = None
    seg: Segment | None = None

    tokens: list[Token] = []
    comments: list[str] = []
    extras: list[tuple[int, str]] = []
    sent_start_line = 0
    pending_seg: str | None = None

    def flush_sentence(end_line: int) -> None:
        nonlocal tokens, comments, extras, pending_seg, seg
        if not tokens and not comments and not extras:
            return
        if not tokens:
            raise ConlluError("comment block without token lines", path, sent_start_line)
        for pos, tok in enumerate(tokens, start=1):
            if tok.id != pos:
                raise ConlluError(
                    f"token ids must be 1..n contiguous, got {tok.id} at position {pos}",
                    path,
                    sent_start_line,
                )
        _validate_tree(tokens, path, sent_start_line)
        _validate_annotations(tokens, path, sent_start_line, warnings)
        if doc is None:
            raise ConlluError("token lines before any '# newdoc id =' header", path, sent_start_line)
        if pending_seg is not None:
            if any(s.seg_id == pending_seg for s in doc.segments):
                raise ConlluError(
                    f"duplicate seg_id {pending_seg!r} in document {doc.doc_id!r}", path, sent_start_line
                )
            seg = Segment(doc.doc_id, pending_seg, [], side=side, language=language)
            doc.segments.append(seg)
            pending_seg = None
        if seg is None:
            raise ConlluError("sentence before any '# seg_id =' header", path, sent_start_line)
        seg.sentences.append(Sentence(tokens=tokens, comments=comments, extras=extras))
        tokens, comments, extras = [], [], []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if line.strip() == "":
            flush_sentence(lineno)
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            key = key.strip()
            value = value.strip()
            if sep and key == "newdoc id":
                flush_sentence(lineno)
                doc = Document(doc_id=value, segments=[], side=side, language=language, mode=mode)
                documents.append(doc)
                seg = None
            elif sep and key == "seg_id":
                flush_sentence(lineno)
                if doc is None:
                    raise ConlluError("'# seg_id =' before any '# newdoc id ='", path, lineno)
                pending_seg = value
            else:
                if not tokens and not comments:
                    sent_start_line = lineno
                comments.append(line)
            continue
        if not tokens and not comments:
            sent_start_line = lineno
        first = line.split("\t", 1)[0]
        if "-" in first or "." in first:
            extras.append((len(tokens), line))
            continue
        tokens.append(_parse_token_line(line, path, lineno))
    flush_sentence(len(text.splitlines()) + 1)

    if warnings is not None:
        for document in documents:
            if not document.segments:
                warnings.append(f"document {document.doc_id!r} has no segments")
    return documents


def parse_document(text: str, **kwargs) -> Document:
    """Parse text expected to hold exactly one document."""
    docs = parse(text, **kwargs)
    if len(docs) != 1:
        raise ConlluError(f"expected exactly 1 document, found {len(docs)}", kwargs.get("path"))
    return docs[0]


def serialize(documents: Iterable[Document] | Document) -> str:
    if isinstance(documents, Document):
        documents = [documents]
    out: list[str] = []
    for doc in documents:
        out.append(f"# newdoc id = {doc.doc_id}")
        for seg in doc.segments:
            out.append(f"# seg_id = {seg.seg_id}")
            for sent in seg.sentences:
                out.extend(sent.comments)
                extras_at: dict[int, list[str]] = {}
                for pos, raw in sent.extras:
                    extras_at.setdefault(pos, []).append(raw)
                out.extend(extras_at.get(0, ()))
                for i, tok in enumerate(sent.tokens, start=1):
                    out.append(tok.to_line())
                    out.extend(extras_at.get(i, ()))
                out.append("")
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# Sidecar TSVs


def _read_tsv(path: str, header: tuple[str, ...]) -> list[list[str]]:
    rows: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first.split("\t") != list(header):
            raise ConlluError(f"bad header: expected {chr(9).join(header)!r}, got {first!r}", path, 1)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != len(header):
                raise ConlluError(f"expected {len(header)} columns, got {len(cols)}", path, lineno)
            rows.append(cols)
    return rows


@dataclass
class ManifestRow:
    doc_id: str
    src_seg: str
    tgt_seg: str


def read_manifest(path: str) -> list[ManifestRow]:
    return [ManifestRow(*cols) for cols in _read_tsv(path, MANIFEST_HEADER)]


def write_manifest(rows: Iterable[ManifestRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(MANIFEST_HEADER) + "\n")
        for row in rows:
            fh.write(f"{row.doc_id}\t{row.src_seg}\t{row.tgt_seg}\n")


@dataclass
class LinkRow:
    doc_id: str
    src_seg: str
    tgt_seg: str
    src_tok: int
    tgt_tok: int
    score: float


def read_links(path: str) -> list[LinkRow]:
    out = []
    for cols in _read_tsv(path, LINKS_HEADER):
        out.append(LinkRow(cols[0], cols[1], cols[2], int(cols[3]), int(cols[4]), float(cols[5])))
    return out


def write_links(rows: Iterable[LinkRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(LINKS_HEADER) + "\n")
        for r in rows:
            fh.write(f"{r.doc_id}\t{r.src_seg}\t{r.tgt_seg}\t{r.src_tok}\t{r.tgt_tok}\t{r.score!r}\n")


@dataclass
class SubtreeRow:
    doc_id: str
    src_seg: str
    tgt_seg: str
    src_sig: str
    tgt_sig: str
    cosine: float


def read_subtree_links(path: str) -> list[SubtreeRow]:
    out = []
    for cols in _read_tsv(path, SUBTREES_HEADER):
        out.append(SubtreeRow(cols[0], cols[1], cols[2], cols[3], cols[4], float(cols[5])))
    return out


def write_subtree_links(rows: Iterable[SubtreeRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(SUBTREES_HEADER) + "\n")
        for r in rows:
            fh.write(f"{r.doc_id}\t{r.src_seg}\t{r.tgt_seg}\t{r.src_sig}\t{r.tgt_sig}\t{r.cosine!r}\n")


# ---------------------------------------------------------------------------
# Parallel assembly


def load_parallel(
    src_docs: Iterable[Document],
    tgt_docs: Iterable[Document],
    manifest: Iterable[ManifestRow],
    links: Iterable[LinkRow] = (),
    subtree_links: Iterable[SubtreeRow] = (),
) -> tuple[list[SegmentPair], list[str]]:
    """Join source and target segments through the manifest.

    Returns (pairs, problems); manifest rows referencing absent segments,
    links with out-of-range token indices, and unmatched segments are
    reported, not fatal.  Many-to-many segment mappings are unsupported and
    raise ConlluError naming the rows.
    """
    src_index = {(d.doc_id, s.seg_id): s for d in src_docs for s in d.segments}
    tgt_index = {(d.doc_id, s.seg_id): s for d in tgt_docs for s in d.segments}
    problems: list[str] = []

    manifest = list(manifest)
    for attr, label in (("src_seg", "src"), ("tgt_seg", "tgt")):
        seen: dict[tuple[str, str], ManifestRow] = {}
        for row in manifest:
            key = (row.doc_id, getattr(row, attr))
            if key in seen:
                prev = seen[key]
                raise ConlluError(
                    f"many-to-many segment mapping on {label} {key[0]}:{key[1]}: rows "
                    f"({prev.doc_id},{prev.src_seg},{prev.tgt_seg}) and ({row.doc_id},{row.src_seg},{row.tgt_seg})"
                )
            seen[key] = row

    link_map: dict[tuple[str, str, str], list[LinkRow]] = {}
    for row in links:
        link_map.setdefault((row.doc_id, row.src_seg, row.tgt_seg), []).append(row)
    sub_map: dict[tuple[str, str, str], list[SubtreeRow]] = {}
    for row in subtree_links:
        sub_map.setdefault((row.doc_id, row.src_seg, row.tgt_seg), []).append(row)

    pairs: list[SegmentPair] = []
    for row in manifest:
        src = src_index.get((row.doc_id, row.src_seg))
        tgt = tgt_index.get((row.doc_id, row.tgt_seg))
        if src is None or tgt is None:
            missing = []
            if src is None:
                missing.append(f"src {row.doc_id}:{row.src_seg}")
            if tgt is None:
                missing.append(f"tgt {row.doc_id}:{row.tgt_seg}")
            problems.append("manifest row skipped, missing " + " and ".join(missing))
            continue
        pair = SegmentPair(source=src, target=tgt)
        key = (row.doc_id, row.src_seg, row.tgt_seg)
        n_src, n_tgt = src.token_count, tgt.token_count
        for lr in link_map.get(key, ()):
            if not (0 <= lr.src_tok < n_src and 0 <= lr.tgt_tok < n_tgt):
                problems.append(
                    f"link {key}: token index ({lr.src_tok}, {lr.tgt_tok}) out of range "
                    f"({n_src} src, {n_tgt} tgt tokens)"
                )
                continue
            if not 0.0 <= lr.score <= 1.0:
                problems.append(f"link {key}: score {lr.score} outside [0, 1]")
                continue
            pair.links.append(Link(src=lr.src_tok, tgt=lr.tgt_tok, score=lr.score))
        for sr in sub_map.get(key, ()):
            pair.subtree_links.append(SubtreeLink(sr.src_sig, sr.tgt_sig, sr.cosine))
        pairs.append(pair)

    paired_src = {(p.source.doc_id, p.source.seg_id) for p in pairs}
    paired_tgt = {(p.target.doc_id, p.target.seg_id) for p in pairs}
    for key in src_index.keys() - paired_src:
        problems.append(f"unmatched src segment {key[0]}:{key[1]}")
    for key in tgt_index.keys() - paired_tgt:
        problems.append(f"unmatched tgt segment {key[0]}:{key[1]}")
    return pairs, problems


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


def load_corpus(
    directory: str,
    mode: str,
    lpair: str,
    warnings: list[str] | None = None,
) -> Corpus:
    """Load {mode}_{lpair}_{org,src,tgt}.conllu plus sidecars from a directory."""
    paths = corpus_paths(directory, mode, lpair)
    corpus = Corpus(mode=mode, lpair=lpair)
    per_side: dict[str, list[Document]] = {}
    for side in ("org", "src", "tgt"):
        p = paths[side]
        if not os.path.exists(p):
            if side == "org":
                per_side[side] = []
                continue
            raise ConlluError(f"required corpus file missing: {p}", p)
        with open(p, encoding="utf-8") as fh:
            docs = parse(
                fh.read(),
                side=side,
                language=side_language(lpair, side),
                mode=mode,
                path=p,
                warnings=warnings,
            )
        per_side[side] = docs
        for doc in docs:
            key = (side, doc.doc_id)
            if key in corpus.documents:
                raise ConlluError(f"duplicate doc id {doc.doc_id!r} on side {side}", p)
            corpus.documents[key] = doc
    manifest = read_manifest(paths["manifest"]) if os.path.exists(paths["manifest"]) else []
    links = read_links(paths["links"]) if os.path.exists(paths["links"]) else []
    subs = read_subtree_links(paths["subtrees"]) if os.path.exists(paths["subtrees"]) else []
    pairs, problems = load_parallel(per_side["src"], per_side["tgt"], manifest, links, subs)
    if warnings is not None:
        warnings.extend(problems)
    corpus.pairs = pairs
    return corpus


def write_corpus(corpus: Corpus, directory: str) -> dict[str, str]:
    """Inverse of load_corpus; links/subtrees are rebuilt from the pairs."""
    os.makedirs(directory, exist_ok=True)
    paths = corpus_paths(directory, corpus.mode, corpus.lpair)
    for side in ("org", "src", "tgt"):
        docs = corpus.docs(side)
        if not docs and side == "org":
            continue
        with open(paths[side], "w", encoding="utf-8") as fh:
            fh.write(serialize(docs))
    manifest = []
    link_rows: list[LinkRow] = []
    sub_rows: list[SubtreeRow] = []
    for pair in corpus.pairs:
        manifest.append(ManifestRow(pair.doc_id, pair.source.seg_id, pair.target.seg_id))
        for ln in pair.links:
            link_rows.append(
                LinkRow(pair.doc_id, pair.source.seg_id, pair.target.seg_id, ln.src, ln.tgt, ln.score)
            )
        for sl in pair.subtree_links:
            sub_rows.append(
                SubtreeRow(pair.doc_id, pair.source.seg_id, pair.target.seg_id, sl.src_sig, sl.tgt_sig, sl.cosine)
            )
    write_manifest(manifest, paths["manifest"])
    write_links(link_rows, paths["links"])
    if sub_rows:
        write_subtree_links(sub_rows, paths["subtrees"])
    return paths


def filter_short_segments(corpus: Corpus, min_tokens: int = 4, count_punct: bool = False) -> Corpus:
    """Drop segments below the length floor from all views, including pairs.

    The floor applies to the non-punctuation word count by default; set
    count_punct=True to count every token.  Idempotent.
    """

    def keep(seg: Segment) -> bool:
        size = seg.token_count if count_punct else seg.word_count
        return size >= min_tokens

    out = Corpus(mode=corpus.mode, lpair=corpus.lpair)
    kept_ids: set[tuple[str, str, str]] = set()
    for (side, doc_id), doc in corpus.documents.items():
        segments = [s for s in doc.segments if keep(s)]
        for s in segments:
            kept_ids.add((side, doc_id, s.seg_id))
        if segments:
            out.documents[(side, doc_id)] = Document(
                doc_id=doc_id, segments=segments, side=doc.side, language=doc.language, mode=doc.mode
            )
    for pair in corpus.pairs:
        if ("src", pair.source.doc_id, pair.source.seg_id) in kept_ids and (
            "tgt",
            pair.target.doc_id,
            pair.target.seg_id,
        ) in kept_ids:
            out.pairs.append(pair)
    return out
