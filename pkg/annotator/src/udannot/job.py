"""Annotation jobs: YAML config, whole-corpus runs, file handoff.

A job reads `{mode}_{lpair}_{src,tgt}.conllu` plus the segment manifest from
an input directory, runs the three passes, and writes the enriched corpus,
the link sidecars, and a report.json into an output directory.  The output
directory is a complete, self-describing corpus for the downstream suite;
nothing is shared with it except these files.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import asdict, dataclass, field

import yaml

from udannot.annotate import (
    PairHandle,
    annotate_alignment,
    annotate_mt,
    annotate_surprisal,
    subtree_links,
)
from udannot.conllu import (
    ConlluFormatError,
    corpus_paths,
    read_conllu,
    read_manifest,
    side_language,
    write_conllu,
    write_links,
    write_manifest,
    write_subtree_links,
)
from udannot.models import ModelError, resolve_encoder, resolve_lm, resolve_translator


class JobError(ValueError):
    """Bad job configuration or unusable input corpus."""


@dataclass
class AnnotationJob:
    """What to annotate and with which models.

    `source_lm` maps language codes to LM identifiers, `translation` maps
    direction codes (same shape as lpair) to translator identifiers.
    batch_size and device are recorded for parity with heavyweight backends;
    the toy models ignore them.
    """

    lpair: str
    mode: str = "written"
    source_lm: dict[str, str] = field(default_factory=dict)
    translation: dict[str, str] = field(default_factory=dict)
    encoder: str = "ngram:64"
    batch_size: int = 8
    device: str = "cpu"
    max_len: int = 256

    def __post_init__(self):
        if len(self.lpair) != 4:
            raise JobError(f"lpair must be 4 letters like 'deen', got {self.lpair!r}")
        if not self.mode:
            raise JobError("mode must be non-empty")
        if self.batch_size < 1:
            raise JobError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_len < 1:
            raise JobError(f"max_len must be >= 1, got {self.max_len}")


_JOB_KEYS = {
    "lpair", "mode", "source_lm", "translation", "encoder",
    "batch_size", "device", "max_len",
}


def load_job(path: str) -> AnnotationJob:
    """Read a YAML job file; unknown keys are errors so typos surface."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as err:
        raise JobError(f"{path}: {err.strerror or err}") from None
    except yaml.YAMLError as err:
        raise JobError(f"{path}: not valid YAML: {err}") from None
    if not isinstance(raw, dict):
        raise JobError(f"{path}: job file must be a mapping")
    unknown = sorted(set(raw) - _JOB_KEYS)
    if unknown:
        raise JobError(f"{path}: unknown job keys: {', '.join(unknown)}")
    if "lpair" not in raw:
        raise JobError(f"{path}: job needs an lpair")
    for key in ("source_lm", "translation"):
        if key in raw and not isinstance(raw[key], dict):
            raise JobError(f"{path}: {key} must map codes to model identifiers")
    try:
        return AnnotationJob(**raw)
    except TypeError as err:
        raise JobError(f"{path}: {err}") from None


def _build_pairs(src_docs, tgt_docs, manifest, flags: list[str]) -> list[PairHandle]:
    src_index = {doc.doc_id: doc for doc in src_docs}
    tgt_index = {doc.doc_id: doc for doc in tgt_docs}
    pairs = []
    for doc_id, src_seg, tgt_seg in manifest:
        try:
            source = src_index[doc_id].segment(src_seg)
            target = tgt_index[doc_id].segment(tgt_seg)
        except KeyError as missing:
            flags.append(f"manifest {doc_id}/{src_seg}->{tgt_seg}: {missing.args[0]}")
            continue
        pairs.append(PairHandle(doc_id, src_seg, tgt_seg, source, target))
    return pairs


def run_job(job: AnnotationJob, in_dir: str, out_dir: str) -> dict:
    """Annotate one corpus directory into another; returns the report dict
    (also written as report.json next to the outputs)."""
    in_paths = corpus_paths(in_dir, job.mode, job.lpair)
    for required in ("src", "tgt", "manifest"):
        if not os.path.exists(in_paths[required]):
            raise JobError(f"required input missing: {in_paths[required]}")

    src_language = side_language(job.lpair, "src")
    try:
        lm = resolve_lm(job.source_lm.get(src_language, "hashed:0"))
        translator = resolve_translator(
            job.translation.get(job.lpair, "copy"), max_len=job.max_len
        )
        encoder = resolve_encoder(job.encoder)
    except ModelError as err:
        raise JobError(str(err)) from None

    src_docs = read_conllu(in_paths["src"])
    tgt_docs = read_conllu(in_paths["tgt"])
    manifest = read_manifest(in_paths["manifest"])
    flags: list[str] = []
    pairs = _build_pairs(src_docs, tgt_docs, manifest, flags)

    surprisal = annotate_surprisal(src_docs, lm)
    mt = annotate_mt(pairs, translator)
    links, alignment = annotate_alignment(pairs, encoder)
    subtrees = subtree_links(pairs, links, encoder)

    os.makedirs(out_dir, exist_ok=True)
    out_paths = corpus_paths(out_dir, job.mode, job.lpair)
    write_conllu(src_docs, out_paths["src"])
    write_conllu(tgt_docs, out_paths["tgt"])
    write_manifest(manifest, out_paths["manifest"])
    write_links(links, out_paths["links"])
    write_subtree_links(subtrees, out_paths["subtrees"])
    written = ["src", "tgt", "manifest", "links", "subtrees"]
    if os.path.exists(in_paths["org"]):
        shutil.copyfile(in_paths["org"], out_paths["org"])
        written.insert(0, "org")

    report = {
        "job": asdict(job),
        "inputs": {name: in_paths[name] for name in ("src", "tgt", "manifest")},
        "outputs": {name: out_paths[name] for name in written},
        "counts": {
            "documents": len(src_docs) + len(tgt_docs),
            "pairs": len(pairs),
            "tokens_with_surprisal": surprisal.annotated,
            "segments_force_decoded": len(pairs) - sum(
                1 for f in mt.flags if f.startswith("mt ")
            ),
            "target_tokens_scored": mt.annotated,
            "pairs_aligned": alignment.annotated,
            "word_links": len(links),
            "subtree_links": len(subtrees),
        },
        "flags": flags + surprisal.flags + mt.flags + alignment.flags,
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as handle:
        json.dump(report, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return report


__all__ = [
    "AnnotationJob",
    "JobError",
    "ConlluFormatError",
    "load_job",
    "run_job",
]
