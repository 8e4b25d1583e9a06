"""Report serialization: JSON, RFC-4180 CSV, and static SVG log-log plots.

Float fields serialize via ``repr``, i.e. the shortest decimal string that
round-trips exactly, so parsing a report back yields bitwise-identical
values.  Emitted files contain no timestamps: a seeded run reproduces its
outputs byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict

from .expansion import LeadingConstant
from .montecarlo import RichardsonPoint, WeakErrorReport
from .rates import ExpansionTable, RateFit

FORMATS = ("json", "csv", "svg")


def _rate_fit_dict(fit: RateFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept,
            "r_squared": fit.r_squared, "n_excluded": fit.n_excluded,
            "points": [list(pt) for pt in fit.points]}


def _json_payload(report):
    if isinstance(report, WeakErrorReport):
        return report.to_json_dict()
    if isinstance(report, ExpansionTable):
        return {
            "problem": report.problem,
            "psi_kind": report.psi_name,
            "c1": asdict(report.c1),
            "levels": [asdict(r) for r in report.rows],
            "residual_fit": None if report.residual_fit is None
            else _rate_fit_dict(report.residual_fit),
        }
    if isinstance(report, RateFit):
        return _rate_fit_dict(report)
    if isinstance(report, LeadingConstant):
        return asdict(report)
    if isinstance(report, list) and all(isinstance(r, RichardsonPoint) for r in report):
        return {"points": [asdict(r) for r in report]}
    if isinstance(report, dict):
        return report
    raise TypeError(f"cannot serialize report of type {type(report).__name__}")


def _csv_table(report):
    if isinstance(report, WeakErrorReport):
        header = ["n_steps", "h", "estimate", "stderr", "source"]
        rows = [[lv.n_steps, lv.h, lv.estimate, lv.stderr, lv.source]
                for lv in report.levels]
    elif isinstance(report, ExpansionTable):
        header = ["n_steps", "h", "weak_err", "h_times_c1", "second_order_residual"]
        rows = [[r.n_steps, r.h, r.weak_err, r.h_times_c1, r.second_order_residual]
                for r in report.rows]
    elif isinstance(report, RateFit):
        header = ["h", "abs_err"]
        rows = [[h, e] for h, e in report.points]
    elif isinstance(report, list) and all(isinstance(r, RichardsonPoint) for r in report):
        header = ["h", "extrapolated_error", "stderr"]
        rows = [[r.h, r.extrapolated_error, r.stderr] for r in report]
    else:
        raise TypeError(f"cannot tabulate report of type {type(report).__name__}")
    return header, rows


def _svg_series(report):
    """(title, series, fit) where series is [(label, [(h, |err|), ...]), ...]."""
    if isinstance(report, WeakErrorReport):
        pts = [(lv.h, abs(lv.estimate)) for lv in report.levels]
        return f"{report.problem} / {report.scheme}", [("weak error", pts)], None
    if isinstance(report, ExpansionTable):
        series = [
            ("weak error", [(r.h, abs(r.weak_err)) for r in report.rows]),
            ("residual", [(r.h, abs(r.second_order_residual)) for r in report.rows]),
        ]
        return f"{report.problem} / {report.psi_name}", series, report.residual_fit
    if isinstance(report, RateFit):
        return "rate fit", [("error", list(report.points))], report
    if isinstance(report, list) and all(isinstance(r, RichardsonPoint) for r in report):
        pts = [(r.h, abs(r.extrapolated_error)) for r in report]
        return "richardson", [("extrapolated error", pts)], None
    raise TypeError(f"cannot plot report of type {type(report).__name__}")


def _render_svg(title, series, fit) -> str:
    width, height = 640, 480
    ml, mr, mt, mb = 70, 20, 40, 50
    pts = [(h, e) for _, data in series for h, e in data if e > 0 and h > 0]
    if pts:
        xs = [math.log10(h) for h, _ in pts]
        ys = [math.log10(e) for _, e in pts]
        x_lo, x_hi = min(xs) - 0.2, max(xs) + 0.2
        y_lo, y_hi = min(ys) - 0.3, max(ys) + 0.3
    else:
        x_lo, x_hi, y_lo, y_hi = -3.0, 0.0, -3.0, 0.0
    if x_hi - x_lo < 1e-9:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(logh):
        return ml + (logh - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def sy(loge):
        return height - mb - (loge - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
        f'fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">h (log scale)</text>',
    ]
    for tick in range(math.ceil(x_lo), math.floor(x_hi) + 1):
        parts.append(f'<line x1="{sx(tick):.2f}" y1="{height - mb}" '
                     f'x2="{sx(tick):.2f}" y2="{height - mb + 5}" stroke="#444"/>')
        parts.append(f'<text x="{sx(tick):.2f}" y="{height - mb + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                     f'1e{tick}</text>')
    for tick in range(math.ceil(y_lo), math.floor(y_hi) + 1):
        parts.append(f'<line x1="{ml - 5}" y1="{sy(tick):.2f}" x2="{ml}" '
                     f'y2="{sy(tick):.2f}" stroke="#444"/>')
        parts.append(f'<text x="{ml - 8}" y="{sy(tick):.2f}" text-anchor="end" '
                     f'dominant-baseline="middle" font-family="sans-serif" '
                     f'font-size="12">1e{tick}</text>')
    for idx, (label, data) in enumerate(series):
        color = colors[idx % len(colors)]
        shown = [(h, e) for h, e in data if h > 0 and e > 0]
        if not shown:
            continue
        coords = " ".join(f"{sx(math.log10(h)):.2f},{sy(math.log10(e)):.2f}"
                          for h, e in sorted(shown))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        for h, e in shown:
            parts.append(f'<circle cx="{sx(math.log10(h)):.2f}" '
                         f'cy="{sy(math.log10(e)):.2f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{width - mr - 8}" y="{mt + 18 + 16 * idx}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="12" '
                     f'fill="{color}">{label}</text>')
    if fit is not None:
        ln10 = math.log(10.0)
        y0 = (fit.slope * x_lo * ln10 + fit.intercept) / ln10
        y1 = (fit.slope * x_hi * ln10 + fit.intercept) / ln10
        parts.append(f'<line x1="{sx(x_lo):.2f}" y1="{sy(y0):.2f}" '
                     f'x2="{sx(x_hi):.2f}" y2="{sy(y1):.2f}" stroke="#888" '
                     f'stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{ml + 10}" y="{mt + 18}" font-family="sans-serif" '
                     f'font-size="13">slope = {fit.slope:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report, format: str, path) -> None:
    """Write a report to ``path`` as json, csv or svg.

    IO failures propagate as OSError with the offending path attached.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "json":
        text = json.dumps(_json_payload(report), indent=2) + "\n"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif format == "csv":
        header, rows = _csv_table(report)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    else:
        title, series, fit = _svg_series(report)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_render_svg(title, series, fit))
