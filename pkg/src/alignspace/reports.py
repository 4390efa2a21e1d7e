"""Deterministic emission of CSV/JSON/SVG result artifacts.

All writers format floats with shortest round-trip repr and sort JSON
keys, so reruns with identical values produce byte-identical files (the
determinism contract checked by the acceptance suite).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._util import fmt_float

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return fmt_float(float(value))
    return str(value)


def write_csv(path: Path | str, header: list[str], rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path: Path | str, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def svg_scatter(
    path: Path | str,
    coords: np.ndarray,
    labels,
    xlabel: str = "pc1",
    ylabel: str = "pc2",
    width: int = 640,
    height: int = 480,
) -> Path:
    """Minimal hand-rolled SVG scatter (matplotlib SVG output embeds
    nondeterministic ids, which would break rerun checksums)."""
    path = Path(path)
    coords = np.asarray(coords, dtype=float)
    x = coords[:, 0]
    y = coords[:, 1] if coords.shape[1] > 1 else np.zeros_like(x)
    pad = 50.0
    span_x = max(x.max() - x.min(), 1e-12)
    span_y = max(y.max() - y.min(), 1e-12)

    def sx(v: float) -> str:
        return f"{pad + (v - x.min()) / span_x * (width - 2 * pad):.3f}"

    def sy(v: float) -> str:
        return f"{height - pad - (v - y.min()) / span_y * (height - 2 * pad):.3f}"

    ordered = list(dict.fromkeys(labels))
    color = {lab: _PALETTE[i % len(_PALETTE)] for i, lab in enumerate(ordered)}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        'stroke="black" stroke-width="1"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="14">{xlabel}</text>',
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>',
    ]
    for i, lab in enumerate(labels):
        parts.append(
            f'<circle cx="{sx(x[i])}" cy="{sy(y[i])}" r="5" fill="{color[lab]}" '
            'fill-opacity="0.8"/>'
        )
    for i, lab in enumerate(ordered):
        ly = pad + 18 * i
        parts.append(
            f'<circle cx="{width - pad - 90:.0f}" cy="{ly:.0f}" r="5" fill="{color[lab]}"/>'
        )
        parts.append(
            f'<text x="{width - pad - 78:.0f}" y="{ly + 4:.0f}" font-size="12">{lab}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
