"""Render stored experiment reports to TSV tables and SVG charts.

Every renderer is a pure function from report dicts to output text, so the
same inputs always produce the same bytes.  JSON serialization sorts keys
and carries no timestamps for the same reason.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

SCHEMA_PREFIX = "medload-report/"
SET_SCHEMA = "medload-report-set/1"
FORMATS = ("json", "tsv", "svg")

_BAR_STRONG = "#1f77b4"
_BAR_WEAK = "#9ecae1"


class SchemaError(ValueError):
    """A stored report does not look like one of ours."""


class EmptyInputError(ValueError):
    """The input directory holds no report JSON at all."""


def validate_report(report: object, origin: str = "report") -> None:
    if not isinstance(report, dict):
        raise SchemaError(f"{origin}: expected a JSON object, got {type(report).__name__}")
    schema = report.get("schema")
    if not isinstance(schema, str) or not schema.startswith(SCHEMA_PREFIX):
        raise SchemaError(f"{origin}: schema {schema!r} is not a {SCHEMA_PREFIX}* report")
    for key in ("task", "results"):
        if key not in report:
            raise SchemaError(f"{origin}: missing required key {key!r}")


def write_report_json(report: dict, path: str) -> None:
    validate_report(report, origin=path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, sort_keys=True, indent=2)
        handle.write("\n")


def load_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            report = json.load(handle)
        except json.JSONDecodeError as err:
            raise SchemaError(f"{path}: not valid JSON ({err})") from None
    validate_report(report, origin=path)
    return report


def _num(value, digits: int = 3) -> str:
    if value is None:
        return "--"
    return f"{float(value):.{digits}f}"


def _count(value) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else f"{value:.1f}"


def _ratio(results: dict) -> str:
    return f"{_count(results['n_selected_median'])}/{_count(results['n_input_median'])}"


def classification_tsv(entries: Sequence[tuple[str, dict]]) -> str:
    lines = ["run\tmode\tlpair\tunit\tmacro_f1\tsd\tselected/input"]
    for label, report in entries:
        results = report["results"]
        lines.append(
            "\t".join(
                [
                    label,
                    report["mode"],
                    report["lpair"],
                    report["unit"],
                    _num(results["macro_f1_mean"]),
                    _num(results["macro_f1_sd"]),
                    _ratio(results),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def regression_tsv(entries: Sequence[tuple[str, dict]]) -> str:
    lines = ["lpair\tmode\tapproach\trho\tR2\tMAE\tselected/input"]
    for _, report in entries:
        results = report["results"]
        lines.append(
            "\t".join(
                [
                    report["lpair"],
                    report["mode"],
                    report["subset"],
                    _num(results["rho"]),
                    _num(results["r2"]),
                    _num(results["mae"]),
                    _ratio(results),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def univariate_tsv(report: dict) -> str:
    lines = ["feature\tmean\trho\tbold"]
    for row in report["univariate"]:
        mean = "--" if row["mean"] is None else f"{row['mean']:.4f}"
        lines.append(
            "\t".join(
                [row["feature"], mean, _num(row["rho"]), "yes" if row["bold"] else "no"]
            )
        )
    return "\n".join(lines) + "\n"


def frequency_tsv(report: dict) -> str:
    lines = ["feature\tdirection\tf1"]
    for row in report["frequency"]:
        f1 = "undefined" if row["f1"] is None else f"{row['f1']:.3f}"
        lines.append("\t".join([row["feature"], row["direction"], f1]))
    return "\n".join(lines) + "\n"


def _heat_color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    start, end = (255, 255, 255), (31, 119, 180)
    r, g, b = (round(s + (e - s) * t) for s, e in zip(start, end))
    return f"rgb({r},{g},{b})"


def _svg_text(x: float, y: float, text: str, anchor: str = "start", extra: str = "") -> str:
    return (
        f'<text x="{x:.1f}" y="{y:.1f}" font-family="monospace" font-size="11" '
        f'text-anchor="{anchor}"{extra}>{text}</text>'
    )


def shap_heatmap_svg(entries: Sequence[tuple[str, dict]]) -> str:
    """Features-by-runs heatmap of mean |SHAP| contributions."""
    features = sorted({name for _, report in entries for name in report["shap_means"]})
    if not features:
        raise ValueError("no SHAP summaries to draw")
    labels = [label for label, _ in entries]
    vmax = max(
        (value for _, report in entries for value in report["shap_means"].values()),
        default=0.0,
    )
    vmax = vmax if vmax > 0 else 1.0
    cell_w, cell_h = 26, 18
    left = 10 + max(len(name) for name in features) * 7
    top = 20 + max(len(label) for label in labels) * 6
    width = left + cell_w * len(labels) + 140
    height = top + cell_h * len(features) + 30
    body = []
    for col, label in enumerate(labels):
        x = left + col * cell_w + cell_w / 2
        body.append(
            _svg_text(x, top - 6, label, anchor="start", extra=f' transform="rotate(-60 {x:.1f} {top - 6:.1f})"')
        )
    for row, name in enumerate(features):
        y = top + row * cell_h
        body.append(_svg_text(left - 6, y + cell_h - 5, name, anchor="end"))
        for col, (_, report) in enumerate(entries):
            value = report["shap_means"].get(name)
            x = left + col * cell_w
            if value is None:
                fill = "rgb(245,245,245)"
                title = f"{name} not selected"
            else:
                fill = _heat_color(value / vmax)
                title = f"{name}: {value:.4f}"
            body.append(
                f'<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" '
                f'fill="{fill}" stroke="rgb(200,200,200)"><title>{title}</title></rect>'
            )
    legend_x = left + cell_w * len(labels) + 16
    body.append(_svg_text(legend_x, top + 12, f"0 .. {vmax:.3g}"))
    body.append(_svg_text(legend_x, top + 28, "mean |SHAP|"))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n"
    )


def correlation_bar_svg(report: dict) -> str:
    """Horizontal bars of per-feature Spearman rho against translatedness."""
    rows = report["univariate"]
    if not rows:
        raise ValueError("no univariate rows to draw")
    row_h = 18
    left = 10 + max(len(row["feature"]) for row in rows) * 7
    plot_w = 360
    top = 26
    width = left + plot_w + 70
    height = top + row_h * len(rows) + 24
    center = left + plot_w / 2
    vmax = max((abs(row["rho"]) for row in rows if row["rho"] is not None), default=0.0)
    vmax = max(vmax, 0.25)
    scale = (plot_w / 2 - 6) / vmax
    body = [
        f'<line x1="{center}" y1="{top - 8}" x2="{center}" y2="{height - 18}" '
        'stroke="rgb(120,120,120)"/>',
        _svg_text(center, 14, "Spearman rho", anchor="middle"),
        _svg_text(center - vmax * scale, height - 6, f"-{vmax:.2f}", anchor="middle"),
        _svg_text(center + vmax * scale, height - 6, f"+{vmax:.2f}", anchor="middle"),
    ]
    for i, row in enumerate(rows):
        y = top + i * row_h
        body.append(_svg_text(left - 6, y + row_h - 5, row["feature"], anchor="end"))
        rho = row["rho"]
        if rho is None:
            body.append(_svg_text(center, y + row_h - 5, "--", anchor="middle"))
            continue
        length = abs(rho) * scale
        x = center if rho >= 0 else center - length
        fill = _BAR_STRONG if row["bold"] else _BAR_WEAK
        body.append(
            f'<rect x="{x:.1f}" y="{y + 3}" width="{length:.1f}" height="{row_h - 7}" '
            f'fill="{fill}"><title>{row["feature"]}: {rho:.3f}</title></rect>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n"
    )


def _labeled_reports(in_dir: str) -> list[tuple[str, dict]]:
    root = Path(in_dir)
    paths = sorted(path for path in root.rglob("report*.json") if path.is_file())
    if not paths:
        raise EmptyInputError(f"no report JSON files under {in_dir}")
    entries = []
    seen: dict[str, int] = {}
    for path in paths:
        # A bare "report.json" is named after its run directory.
        if path.stem == "report" and path.parent != root:
            label = path.parent.name
        elif path.stem == "report":
            label = root.name or "report"
        else:
            label = path.stem
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}-{seen[label]}"
        entries.append((label, load_report(str(path))))
    return entries


def render(in_dir: str, fmt: str) -> dict[str, str]:
    """Produce output files (name -> content) for every report under in_dir."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    entries = _labeled_reports(in_dir)
    classify = [(label, r) for label, r in entries if r["task"] == "classify"]
    regress = [(label, r) for label, r in entries if r["task"] == "regress"]
    outputs: dict[str, str] = {}
    if fmt == "json":
        merged = {
            "schema": SET_SCHEMA,
            "reports": [{"label": label, "report": report} for label, report in entries],
        }
        outputs["reports.json"] = json.dumps(merged, sort_keys=True, indent=2) + "\n"
    elif fmt == "tsv":
        if classify:
            outputs["classification.tsv"] = classification_tsv(classify)
        if regress:
            outputs["regression.tsv"] = regression_tsv(regress)
        for label, report in classify:
            if report.get("frequency"):
                outputs[f"frequency-{label}.tsv"] = frequency_tsv(report)
        for label, report in regress:
            if report.get("univariate"):
                outputs[f"univariate-{label}.tsv"] = univariate_tsv(report)
    else:
        outputs["shap-heatmap.svg"] = shap_heatmap_svg(entries)
        for label, report in regress:
            if report.get("univariate"):
                outputs[f"correlations-{label}.svg"] = correlation_bar_svg(report)
    return outputs
