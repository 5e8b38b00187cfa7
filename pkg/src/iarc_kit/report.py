"""Self-contained HTML report for a card document.

The report is a single file with no external resources: styles are inline,
figures are inline SVG, and the canonical card JSON is embedded in a data
block so the machine-readable form can be recovered from the report alone.
Sections collapse via native details/summary elements; an optional flag adds
a small script with expand/collapse-all buttons.
"""

from __future__ import annotations

import html

from .card import IarcDocument, serialize_json
from . import plots

_CSS = """
body { font-family: "Segoe UI", Helvetica, Arial, sans-serif; margin: 0;
       background: #f4f6fb; color: #111827; }
main { max-width: 1080px; margin: 1.5rem auto; padding: 0 1rem; }
h1 { font-size: 1.4rem; }
details { background: #ffffff; border: 1px solid #d7dce5; border-radius: 8px;
          margin-bottom: 0.9rem; padding: 0.2rem 0.9rem 0.7rem; }
summary { font-size: 1.05rem; font-weight: 600; cursor: pointer;
          padding: 0.5rem 0; }
summary .reg { font-size: 0.75rem; font-weight: 400; color: #64748b;
               margin-left: 0.6rem; }
table { border-collapse: collapse; margin: 0.5rem 0; font-size: 0.85rem; }
th, td { border: 1px solid #d7dce5; padding: 0.28rem 0.55rem; text-align: left; }
th { background: #eef2f9; }
td.num { text-align: right; font-variant-numeric: tabular-nums; }
.pass { color: #047857; font-weight: 600; }
.fail { color: #b91c1c; font-weight: 600; }
figure.iarc-figure { margin: 0.8rem 0; }
figure.iarc-figure figcaption { font-size: 0.78rem; color: #64748b; }
ul { margin: 0.4rem 0; }
.figure-grid { display: flex; flex-wrap: wrap; gap: 0.8rem; }
.mono { font-family: Consolas, monospace; font-size: 0.8rem; }
"""

_TOGGLE_SCRIPT = """
<script>
function iarcSetAll(open) {
  document.querySelectorAll("details").forEach(function (d) { d.open = open; });
}
</script>
<p>
  <button onclick="iarcSetAll(true)">Expand all</button>
  <button onclick="iarcSetAll(false)">Collapse all</button>
</p>
"""


def fmt(value) -> str:
    """Numbers at four significant digits; everything else as text."""
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, int):
        return str(value)
    return str(value)


def esc(value) -> str:
    return html.escape(str(value))


def _table(headers: list[str], rows: list[list[str]], numeric_from: int = 1) -> str:
    head = "".join(f"<th>{esc(h)}</th>" for h in headers)
    body = []
    for row in rows:
        cells = []
        for i, cell in enumerate(row):
            css = ' class="num"' if i >= numeric_from else ""
            cells.append(f"<td{css}>{cell}</td>")
        body.append("<tr>" + "".join(cells) + "</tr>")
    return f"<table><tr>{head}</tr>{''.join(body)}</table>"


def _kv_table(mapping: dict) -> str:
    rows = [[f"<strong>{esc(k)}</strong>", esc(fmt(v))] for k, v in mapping.items()]
    return _table(["field", "value"], rows, numeric_from=99)


def _figure(svg: str, caption: str, plot_kind: str) -> str:
    return (
        f'<figure class="iarc-figure" data-plot="{plot_kind}">{svg}'
        f"<figcaption>{esc(caption)}</figcaption></figure>"
    )


def _section(title: str, regulation: str, body: str) -> str:
    reg = f'<span class="reg">{esc(regulation)}</span>' if regulation else ""
    return f"<details open><summary>{esc(title)}{reg}</summary>{body}</details>"


def _quality_table(report: dict) -> str:
    rows = []
    for name, stats in report.get("features", {}).items():
        rows.append(
            [esc(name)]
            + [
                fmt(stats.get(k))
                for k in ("missingness_rate", "mean", "std", "min", "p25", "p50", "p75", "max")
            ]
            + ["yes" if stats.get("defined") else "no (all missing)"]
        )
    meta = (
        f"<p>rows: {report.get('row_count')}, features: {report.get('feature_count')}, "
        f"duplicate timestamps: {report.get('duplicate_timestamp_count')}</p>"
    )
    return meta + _table(
        ["feature", "missing", "mean", "std", "min", "p25", "p50", "p75", "max", "defined"],
        rows,
    )


def _general_section(doc: IarcDocument) -> str:
    info = dict(doc.general_information)
    stamp = info.pop("run_stamp", {})
    body = _kv_table(info)
    body += "<h4>Run stamp</h4>" + _kv_table(stamp)
    return body


def _intended_section(doc: IarcDocument) -> str:
    section = doc.intended_use
    body = f"<p>{esc(section.get('description', ''))}</p>"
    uses = section.get("out_of_scope_uses", [])
    if uses:
        body += "<h4>Out-of-scope uses</h4><ul>"
        body += "".join(f"<li>{esc(u)}</li>" for u in uses)
        body += "</ul>"
    return body


def _data_section(doc: IarcDocument) -> str:
    data = doc.data
    parts = []
    overview = {
        "overview": data.get("overview"),
        "provenance": data.get("provenance"),
        "preprocessing_notes": data.get("preprocessing_notes"),
    }
    parts.append(_kv_table({k: v for k, v in overview.items() if v}))

    quality = data.get("quality", {})
    for stage in ("raw", "preprocessed"):
        if stage in quality:
            parts.append(f"<h4>Quality ({stage})</h4>")
            parts.append(_quality_table(quality[stage]))

    odd = data.get("odd")
    if odd:
        parts.append("<h4>Operational design domain</h4>")
        rows = [
            [
                esc(name),
                fmt(spec["range"][0]),
                fmt(spec["range"][1]),
                fmt(spec["bandwidth"]),
                fmt(spec["log_density_threshold"]),
            ]
            for name, spec in odd.get("features", {}).items()
        ]
        parts.append(
            _table(["feature", "range lo", "range hi", "bandwidth", "log-density threshold"], rows)
        )
        coverage = odd.get("coverage_fractions", {})
        if coverage:
            parts.append("<h4>ODD coverage by slice</h4>")
            parts.append(
                _table(
                    ["slice", "in-ODD fraction"],
                    [[esc(k), fmt(v)] for k, v in coverage.items()],
                )
            )

    diagnostics = data.get("distributional_diagnostics", {})
    reports = diagnostics.get("reports", [])
    if reports:
        parts.append("<h4>Distributional diagnostics</h4>")
        rows = []
        for rep in reports:
            top = rep.get("ranking", [])[:3]
            rows.append(
                [
                    esc(rep.get("scenario")),
                    fmt(rep.get("score")),
                    esc(", ".join(top)),
                ]
            )
        parts.append(_table(["scenario", "mean normalized W1", "most-shifted features"], rows))

    overlays = diagnostics.get("overlays", [])
    if overlays:
        parts.append('<div class="figure-grid">')
        for overlay in overlays:
            svg = plots.fig_to_svg(plots.kde_overlay_figure(overlay))
            caption = (
                f"Feature {overlay.get('feature')}: training vs "
                f"{overlay.get('scenario', 'scenario')} density"
            )
            parts.append(_figure(svg, caption, "kde-overlay"))
        parts.append("</div>")
    return "".join(parts)


def _coverage_pairs(metrics: dict) -> dict:
    pairs = {}
    for key, value in metrics.items():
        if key.startswith("coverage_") and value is not None:
            try:
                lo, hi = key.split("_")[1:3]
                nominal = float(hi) - float(lo)
            except (ValueError, IndexError):
                continue
            pairs[f"{lo}-{hi}"] = {"empirical": value, "nominal": nominal}
    return pairs


def _evaluation_section(doc: IarcDocument) -> str:
    evaluation = doc.evaluation
    parts = []

    kpis = evaluation.get("kpis", [])
    if kpis:
        parts.append("<h4>KPIs vs acceptance thresholds</h4>")
        rows = []
        for entry in kpis:
            verdict = (
                '<span class="pass">pass</span>'
                if entry.get("passed")
                else '<span class="fail">fail</span>'
            )
            rows.append(
                [
                    esc(entry["metric"]),
                    fmt(entry["value"]),
                    fmt(entry["threshold"]),
                    esc(entry["orientation"]),
                    verdict,
                ]
            )
        parts.append(_table(["metric", "value", "threshold", "orientation", "result"], rows))

    uq = evaluation.get("uq", [])
    if uq:
        parts.append("<h4>Metrics per slice</h4>")
        metric_names: list[str] = []
        for entry in uq:
            for m in entry.get("metrics", {}):
                if m not in metric_names:
                    metric_names.append(m)
        rows = []
        for entry in uq:
            metrics = entry.get("metrics", {})
            rows.append(
                [esc(entry["model_version"]), esc(entry["slice_name"])]
                + [fmt(metrics.get(m)) for m in metric_names]
            )
        parts.append(_table(["version", "slice"] + metric_names, rows, numeric_from=2))

    baseline_reg = next(
        (
            e
            for e in uq
            if e.get("task") == "regression" and e.get("slice_name") == "baseline"
        ),
        None,
    )
    if baseline_reg:
        pairs = _coverage_pairs(baseline_reg.get("metrics", {}))
        if pairs:
            svg = plots.fig_to_svg(plots.coverage_bars_figure(pairs))
            parts.append(_figure(svg, "Baseline interval coverage", "coverage-bars"))
    classification = next(
        (e for e in uq if e.get("task") == "classification" and e.get("reliability_bins")),
        None,
    )
    if classification:
        svg = plots.fig_to_svg(plots.reliability_figure(classification["reliability_bins"]))
        parts.append(
            _figure(
                svg,
                f"Reliability diagram ({classification['slice_name']})",
                "reliability",
            )
        )

    robustness = evaluation.get("robustness")
    if robustness:
        summaries = robustness.get("summaries", {})
        if summaries:
            parts.append("<h4>Robustness</h4>")
            rows = [
                [
                    esc(version),
                    fmt(summary.get("aggregated_robustness")),
                    esc(", ".join(summary.get("weakest_scenarios", [])[:3])),
                ]
                for version, summary in summaries.items()
            ]
            parts.append(
                _table(["version", "aggregated robustness", "weakest scenarios"], rows)
            )

        radar = robustness.get("radar")
        if radar and radar.get("scenarios"):
            svg = plots.fig_to_svg(plots.radar_figure(radar))
            parts.append(_figure(svg, "Scenario retention radar", "radar"))
            rows = []
            for i, scenario in enumerate(radar["scenarios"]):
                rows.append(
                    [esc(scenario)] + [fmt(v) for v in radar["matrix"][i]]
                )
            parts.append(
                _table(["scenario"] + [esc(v) for v in radar["versions"]], rows)
            )

        curves = []
        for summary in summaries.values():
            curves.extend(summary.get("severity_curves", []))
        if curves:
            svg = plots.fig_to_svg(plots.severity_curves_figure(curves))
            parts.append(_figure(svg, "Severity vs performance curves", "severity-curves"))
            rows = []
            for curve in curves:
                for severity, value in curve["points"]:
                    rows.append(
                        [
                            esc(curve["family"]),
                            esc(curve["model_version"]),
                            fmt(severity),
                            fmt(value),
                        ]
                    )
            parts.append(
                _table(["family", "version", "severity", curves[0]["metric"]], rows, numeric_from=2)
            )

    notes = evaluation.get("methodology_notes", [])
    if notes:
        parts.append("<h4>Methodology notes</h4><ul>")
        parts.extend(f"<li>{esc(n)}</li>" for n in notes)
        parts.append("</ul>")
    return "".join(parts)


def _limitations_section(doc: IarcDocument) -> str:
    items = doc.limitations
    if not items:
        return "<p>No recorded limitations.</p>"
    return "<ul>" + "".join(f"<li>{esc(i)}</li>" for i in items) + "</ul>"


def render_html(doc: IarcDocument, collapsible: bool = False) -> str:
    """Render the card to one self-contained HTML page.

    The canonical JSON is embedded in a non-executed data block
    (`id="iarc-card-json"`) for export parity with the JSON artifact.
    """
    regs = doc.regulation_references
    title = (
        f"{doc.general_information.get('model_name', 'model')} "
        f"{doc.general_information.get('model_version', '')}".strip()
    )
    sections = [
        _section(
            "General information", regs.get("general_information", ""), _general_section(doc)
        ),
        _section("Intended use", regs.get("intended_use", ""), _intended_section(doc)),
        _section("Data", regs.get("data", ""), _data_section(doc)),
        _section("Evaluation", regs.get("evaluation", ""), _evaluation_section(doc)),
        _section("Limitations", regs.get("limitations", ""), _limitations_section(doc)),
    ]
    canonical = serialize_json(doc).replace("</", "<\\/")
    toggle = _TOGGLE_SCRIPT if collapsible else ""
    return (
        "<!doctype html>\n"
        '<html lang="en"><head><meta charset="utf-8">'
        f"<title>Robustness card: {esc(title)}</title>"
        f"<style>{_CSS}</style></head>\n"
        f"<body><main><h1>Industrial AI Robustness Card</h1>{toggle}"
        + "".join(sections)
        + '<script type="application/json" id="iarc-card-json">\n'
        + canonical
        + "</script>"
        + "</main></body></html>\n"
    )
