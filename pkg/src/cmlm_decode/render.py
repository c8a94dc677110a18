"""Trace rendering: per-iteration rows of newly predicted tokens.

A token appears in a row when it differs from the previous iteration
(fresh commits and revisions). Text mode annotates each shown token with
its probability in brackets; HTML mode colors the cell background from
dark blue (low score) to yellow (high score).
"""

from __future__ import annotations

import html

#: RGB endpoints of the score color scale.
LOW_COLOR = (38, 55, 160)
HIGH_COLOR = (250, 222, 60)


def score_color(prob: float) -> str:
    p = min(max(prob, 0.0), 1.0)
    rgb = tuple(round(lo + p * (hi - lo)) for lo, hi in zip(LOW_COLOR, HIGH_COLOR))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _step_cells(record: dict) -> list[list[tuple[int, float] | str | None]]:
    """Per step, one cell per position: (token, prob) when shown this step,
    "MASK" when masked, None when unchanged."""
    n = record["n"]
    rows = []
    masked = set(range(n))
    for step in record["steps"]:
        shown = {pos: (tok, prob) for pos, tok, prob in step["unmask"]}
        shown.update({pos: (tok, prob) for pos, tok, prob in step.get("revise", [])})
        masked -= set(shown)
        masked |= set(step.get("remask", []))
        cells: list[tuple[int, float] | str | None] = []
        for pos in range(n):
            if pos in shown:
                cells.append(shown[pos])
            elif pos in masked:
                cells.append("MASK")
            else:
                cells.append(None)
        rows.append(cells)
    return rows


def render_text(record: dict) -> str:
    """Plain-text rendering with bracketed probability annotations."""
    lines = [
        "src:   " + " ".join(map(str, record["src"])),
        "final: " + " ".join(map(str, record["final"]))
        + f"   (norm score {record['norm_score']:.4f})",
    ]
    if record.get("cap_forced"):
        lines.append("note:  iteration cap forced the final unmask")
    for t, cells in enumerate(_step_cells(record), start=1):
        parts = []
        for cell in cells:
            if cell == "MASK":
                parts.append("_")
            elif cell is None:
                parts.append("·")
            else:
                tok, prob = cell
                parts.append(f"{tok}[{prob:.2f}]")
        lines.append(f"t={t:<2d} " + " ".join(parts))
    return "\n".join(lines)


def render_html(record: dict) -> str:
    """Single-table HTML rendering with score-colored cells."""
    n = record["n"]
    head = "".join(f"<th>{i + 1}</th>" for i in range(n))
    body_rows = []
    for t, cells in enumerate(_step_cells(record), start=1):
        tds = []
        for cell in cells:
            if cell == "MASK":
                tds.append('<td class="mask">&#9617;</td>')
            elif cell is None:
                tds.append("<td></td>")
            else:
                tok, prob = cell
                tds.append(
                    f'<td style="background:{score_color(prob)}" title="p={prob:.4f}">'
                    f"{html.escape(str(tok))}</td>"
                )
        body_rows.append(f"<tr><th>t={t}</th>{''.join(tds)}</tr>")
    src = html.escape(" ".join(map(str, record["src"])))
    final = html.escape(" ".join(map(str, record["final"])))
    return (
        "<!doctype html><html><head><meta charset='utf-8'><style>"
        "table{border-collapse:collapse;font-family:monospace}"
        "td,th{border:1px solid #999;padding:3px 7px;text-align:center}"
        "td.mask{color:#bbb}"
        "</style></head><body>"
        f"<p>src: {src}</p><p>final: {final} (norm score {record['norm_score']:.4f})</p>"
        f"<table><tr><th></th>{head}</tr>{''.join(body_rows)}</table>"
        "</body></html>"
    )


def render_svg_scatter(
    points: list[tuple[float, float, str]],
    *,
    title: str = "speed vs quality",
    width: int = 640,
    height: int = 420,
) -> str:
    """Minimal SVG scatter of (speedup, BLEU, label) points."""
    if not points:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    pad = 50
    labels = sorted({p[2] for p in points})
    palette = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    color = {label: palette[i % len(palette)] for i, label in enumerate(labels)}

    def sx(x: float) -> float:
        return pad + (x - x_lo) / x_span * (width - 2 * pad)

    def sy(y: float) -> float:
        return height - pad - (y - y_lo) / y_span * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle">{html.escape(title)}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">speedup</text>',
        f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" text-anchor="middle">BLEU</text>',
        f'<text x="{pad}" y="{height - pad + 16}" font-size="10">{x_lo:.2f}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" font-size="10" text-anchor="end">{x_hi:.2f}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y_lo:.2f}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" font-size="10" text-anchor="end">{y_hi:.2f}</text>',
    ]
    for x, y, label in points:
        parts.append(
            f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="{color[label]}">'
            f"<title>{html.escape(label)}: speedup {x:.2f}, BLEU {y:.2f}</title></circle>"
        )
    for i, label in enumerate(labels):
        y = pad + 14 * i
        parts.append(f'<circle cx="{width - pad - 90}" cy="{y}" r="4" fill="{color[label]}"/>')
        parts.append(f'<text x="{width - pad - 80}" y="{y + 4}" font-size="11">{html.escape(label)}</text>')
    parts.append("</svg>")
    return "".join(parts)
