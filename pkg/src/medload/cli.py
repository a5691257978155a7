"""Command-line pipeline: extract features, run experiments, render reports.

Exit codes: 0 success; 2 malformed input (CLI usage, config or corpus or
table parse errors, all with file:line where known); 3 unknown feature
subset; 4 report schema mismatch or an empty report directory; 1 anything
else that stops a run.

Every command writes all its outputs plus exactly one manifest.json into
--out and touches nothing else.  Report JSON and TSV outputs carry no
timestamps; wall-clock timings live only in the manifest, so reruns with
the same seed produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import medload
from medload import conllu
from medload import report as report_mod
from medload.difficulty import (
    TABLE_VARIANTS,
    MissingAnnotationError,
    TranslationTable,
    build_translation_table,
    compute_fallback,
)
from medload.experiments import (
    ExperimentConfig,
    SubsetError,
    file_sha256,
    run_classification,
    run_regression,
    write_scores_tsv,
)
from medload.pipeline import matrix_from_pairs, matrix_from_segments
from medload.preprocess import TableError, write_matrix_tsv

EXIT_PARSE = 2
EXIT_SUBSET = 3
EXIT_REPORT = 4

_SURPRISAL_FIELDS = (
    ("source", "src_surprisal", "Srp"),
    ("source", "src_surprisal_subwords", "SrpSub"),
    ("target", "mt_surprisal", "MtSrp"),
    ("target", "mt_surprisal_subwords", "MtSrpSub"),
)


class ConfigError(ValueError):
    """Bad config file; messages carry file:line where applicable."""


def parse_config(path: str) -> dict[str, tuple[object, int]]:
    """Flat key = value config: whole-line # comments, quoted or bare
    strings, integers, floats, true/false.  Returns value and line number
    per key so later validation can point at the offending line."""
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror or err}") from None
    values: dict[str, tuple[object, int]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, rest = line.partition("=")
        key, rest = key.strip(), rest.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key before '='")
        if not rest:
            raise ConfigError(f"{path}:{lineno}: missing value for {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = (_parse_scalar(rest, path, lineno), lineno)
    return values


def _parse_scalar(text: str, path: str, lineno: int):
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ConfigError(f"{path}:{lineno}: unterminated string")
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


_INT_KEYS = ("k", "seed", "jobs", "min_features", "calib_splits", "rfecv_folds")
_FLOAT_KEYS = ("r_max", "epsilon")
_BOOL_KEYS = ("grouped",)
_STR_KEYS = ("mode", "lpair", "unit", "subset", "backend")
_PATH_KEYS = ("org_features", "tgt_features", "difficulty_features", "scores")


def _env_seed() -> int:
    raw = os.environ.get("MEDLOAD_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"MEDLOAD_SEED must be an integer, got {raw!r}") from None


def build_experiment_config(task: str, path: str, args) -> ExperimentConfig:
    raw = parse_config(path)
    base = Path(path).resolve().parent
    kwargs: dict[str, object] = {}
    paths: dict[str, str] = {}
    for key, (value, lineno) in raw.items():
        where = f"{path}:{lineno}"
        if key == "task":
            if value != task:
                raise ConfigError(f"{where}: config is for task {value!r}, command runs {task!r}")
        elif key in _PATH_KEYS:
            if not isinstance(value, str):
                raise ConfigError(f"{where}: {key} must be a path string")
            paths[key] = value if os.path.isabs(value) else str(base / value)
        elif key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}: {key} must be an integer")
            kwargs[key] = value
        elif key in _FLOAT_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}: {key} must be a number")
            kwargs[key] = float(value)
        elif key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise ConfigError(f"{where}: {key} must be true or false")
            kwargs[key] = value
        elif key == "shared_drop":
            if not isinstance(value, str):
                raise ConfigError(f"{where}: shared_drop must be a comma-separated string")
            kwargs[key] = tuple(part.strip() for part in value.split(",") if part.strip())
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise ConfigError(f"{where}: {key} must be a string")
            kwargs[key] = value
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    elif "seed" not in kwargs:
        kwargs["seed"] = _env_seed()
    if getattr(args, "jobs", None) is not None:
        kwargs["jobs"] = args.jobs
    elif "jobs" not in kwargs:
        kwargs["jobs"] = os.cpu_count() or 1
    try:
        return ExperimentConfig(task=task, paths=paths, **kwargs)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None


def _write_manifest(out_dir: Path, command: str, *, config: str | None, inputs: dict[str, str],
                    seed: int | None, timings: dict[str, float], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {
            name: {"path": path, "sha256": file_sha256(path)}
            for name, path in sorted(inputs.items())
        },
        "seed": seed,
        "tool_version": medload.__version__,
        "timings": {name: round(value, 6) for name, value in timings.items()},
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _existing_corpus_files(directory: str, mode: str, lpair: str) -> dict[str, str]:
    return {
        name: path
        for name, path in conllu.corpus_paths(directory, mode, lpair).items()
        if os.path.exists(path)
    }


def _check_surprisal(pairs) -> None:
    for pair in pairs:
        for side, attr, key in _SURPRISAL_FIELDS:
            segment = pair.source if side == "source" else pair.target
            for token in segment.tokens():
                if getattr(token, attr) is None:
                    raise MissingAnnotationError(
                        f"{segment.uid} token {token.id} ({token.form!r}) lacks MISC {key}"
                    )


def cmd_extract(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    warnings: list[str] = []
    corpus = conllu.load_corpus(args.corpus, args.mode, args.lpair, warnings=warnings)
    for message in warnings:
        print(f"warning: {message}", file=sys.stderr)
    loaded = time.perf_counter()
    inputs = _existing_corpus_files(args.corpus, args.mode, args.lpair)
    if args.kind == "translationese":
        segments = list(corpus.segments(args.side))
        if not segments:
            raise ValueError(
                f"corpus has no {args.side} side for {args.mode}/{args.lpair}"
            )
        language = conllu.side_language(args.lpair, args.side)
        matrix = matrix_from_segments(segments, language=language)
        out_name = f"features_{args.side}.tsv"
    else:
        if not corpus.pairs:
            raise ValueError(f"corpus has no aligned pairs for {args.mode}/{args.lpair}")
        if args.require_surprisal:
            _check_surprisal(corpus.pairs)
        tables = {}
        for spec_text in args.table or ():
            variant, _, table_path = spec_text.partition("=")
            if variant not in TABLE_VARIANTS or not table_path:
                raise ConfigError(
                    f"--table needs VARIANT=PATH with VARIANT one of {', '.join(TABLE_VARIANTS)}"
                )
            tables[variant] = TranslationTable.from_tsv(table_path)
            inputs[f"table_{variant}"] = table_path
        matrix = matrix_from_pairs(corpus.pairs, tables)
        out_name = "difficulty.tsv"
    write_matrix_tsv(matrix, str(out / out_name))
    done = time.perf_counter()
    _write_manifest(
        out,
        "extract",
        config=None,
        inputs=inputs,
        seed=None,
        timings={"load_s": loaded - t0, "extract_s": done - loaded, "total_s": done - t0},
        extra={"kind": args.kind, "mode": args.mode, "lpair": args.lpair,
               "rows": len(matrix.ids), "columns": len(matrix.names)},
    )
    return 0


def cmd_build_table(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    warnings: list[str] = []
    corpus = conllu.load_corpus(args.corpus, args.mode, args.lpair, warnings=warnings)
    for message in warnings:
        print(f"warning: {message}", file=sys.stderr)
    if not corpus.pairs:
        raise ValueError(f"corpus has no aligned pairs for {args.mode}/{args.lpair}")
    sources = [pair.source for pair in corpus.pairs]
    provenance = [f"{args.mode}_{args.lpair}"]
    built = {}
    for variant in args.variants:
        table = build_translation_table(corpus.pairs, variant, provenance=provenance)
        table.fallback = compute_fallback(sources, table)
        table.to_tsv(str(out / f"table_{variant}.tsv"))
        built[variant] = table.stats
    done = time.perf_counter()
    _write_manifest(
        out,
        "build-table",
        config=None,
        inputs=_existing_corpus_files(args.corpus, args.mode, args.lpair),
        seed=None,
        timings={"total_s": done - t0},
        extra={"mode": args.mode, "lpair": args.lpair, "tables": built},
    )
    return 0


def cmd_classify(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    config = build_experiment_config("classify", args.config, args)
    report = run_classification(config)
    ran = time.perf_counter()
    report_mod.write_report_json(report, str(out / "report.json"))
    write_scores_tsv(report["scores"], str(out / "scores.tsv"))
    done = time.perf_counter()
    _write_manifest(
        out,
        "classify",
        config=args.config,
        inputs=dict(config.paths),
        seed=config.seed,
        timings={"run_s": ran - t0, "write_s": done - ran, "total_s": done - t0},
    )
    return 0


def cmd_score(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    report = report_mod.load_report(args.report)
    if report.get("task") != "classify" or "scores" not in report:
        raise report_mod.SchemaError(
            f"{args.report}: scores come from a classification report with a 'scores' map"
        )
    write_scores_tsv(report["scores"], str(out / "scores.tsv"))
    done = time.perf_counter()
    _write_manifest(
        out,
        "score",
        config=None,
        inputs={"report": args.report},
        seed=report.get("seed"),
        timings={"total_s": done - t0},
        extra={"rows": len(report["scores"])},
    )
    return 0


def cmd_regress(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    config = build_experiment_config("regress", args.config, args)
    report = run_regression(config)
    ran = time.perf_counter()
    report_mod.write_report_json(report, str(out / "report.json"))
    done = time.perf_counter()
    _write_manifest(
        out,
        "regress",
        config=args.config,
        inputs=dict(config.paths),
        seed=config.seed,
        timings={"run_s": ran - t0, "write_s": done - ran, "total_s": done - t0},
    )
    return 0


def cmd_report(args) -> int:
    out = _out_dir(args)
    t0 = time.perf_counter()
    outputs = report_mod.render(args.in_dir, args.format)
    for name, content in sorted(outputs.items()):
        with open(out / name, "w", encoding="utf-8") as handle:
            handle.write(content)
    done = time.perf_counter()
    report_paths = sorted(
        str(path) for path in Path(args.in_dir).rglob("report*.json") if path.is_file()
    )
    _write_manifest(
        out,
        "report",
        config=None,
        inputs={f"report_{i}": path for i, path in enumerate(report_paths)},
        seed=None,
        timings={"total_s": done - t0},
        extra={"format": args.format, "outputs": sorted(outputs)},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medload",
        description="Translatedness scoring and translation-difficulty analytics.",
    )
    parser.add_argument("--version", action="version", version=f"medload {medload.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="extract feature tables from a corpus")
    extract.add_argument("--corpus", required=True, help="corpus directory")
    extract.add_argument("--mode", required=True, help="corpus mode, e.g. written")
    extract.add_argument("--lpair", required=True, help="language pair, e.g. deen")
    extract.add_argument(
        "--kind", choices=("translationese", "difficulty"), default="translationese"
    )
    extract.add_argument("--side", choices=("org", "src", "tgt"), default="tgt",
                         help="corpus side for translationese extraction")
    extract.add_argument("--table", action="append", metavar="VARIANT=PATH",
                         help="translation table for difficulty extraction; repeatable")
    extract.add_argument("--require-surprisal", action="store_true",
                         help="fail when MISC surprisal annotations are missing")
    extract.add_argument("--out", required=True)
    extract.set_defaults(func=cmd_extract)

    build = sub.add_parser("build-table", help="build translation tables from aligned pairs")
    build.add_argument("--corpus", required=True)
    build.add_argument("--mode", required=True)
    build.add_argument("--lpair", required=True)
    build.add_argument("--variants", nargs="+", choices=TABLE_VARIANTS,
                       default=list(TABLE_VARIANTS))
    build.add_argument("--out", required=True)
    build.set_defaults(func=cmd_build_table)

    classify = sub.add_parser("classify", help="run the org-vs-tgt classification experiment")
    classify.add_argument("--config", required=True, help="key = value experiment config")
    classify.add_argument("--seed", type=int, help="overrides config seed and MEDLOAD_SEED")
    classify.add_argument("--jobs", type=int, help="fold workers; defaults to available cores")
    classify.add_argument("--out", required=True)
    classify.set_defaults(func=cmd_classify)

    score = sub.add_parser("score", help="write scores.tsv from a classification report")
    score.add_argument("--report", required=True, help="path to a classify report.json")
    score.add_argument("--out", required=True)
    score.set_defaults(func=cmd_score)

    regress = sub.add_parser("regress", help="run the translatedness regression experiment")
    regress.add_argument("--config", required=True)
    regress.add_argument("--seed", type=int, help="overrides config seed and MEDLOAD_SEED")
    regress.add_argument("--jobs", type=int, help="fold workers; defaults to available cores")
    regress.add_argument("--out", required=True)
    regress.set_defaults(func=cmd_regress)

    report = sub.add_parser("report", help="render stored reports to tables and charts")
    report.add_argument("--in", dest="in_dir", required=True, help="directory with report JSON")
    report.add_argument("--format", choices=report_mod.FORMATS, required=True)
    report.add_argument("--out", required=True)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, conllu.ConlluError, TableError, MissingAnnotationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except SubsetError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SUBSET
    except (report_mod.SchemaError, report_mod.EmptyInputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_REPORT
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
