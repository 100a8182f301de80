"""Dependency-free SVG scatter of a diagram."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInput

SIZE = 360
PAD = 40


def render_svg(diagram, labels=None, title: str = "") -> str:
    d = np.asarray(diagram, dtype=np.float64).reshape(-1, 2) if np.size(diagram) else np.zeros((0, 2))
    lab = np.zeros(len(d), dtype=bool) if labels is None else np.asarray(labels, dtype=bool).ravel()
    if len(lab) != len(d):
        raise InvalidInput(f"{len(lab)} labels for {len(d)} diagram points")
    hi = float(d.max()) if len(d) else 1.0
    hi = hi * 1.05 if hi > 0 else 1.0
    span = SIZE - 2 * PAD

    def sx(v):
        return PAD + span * v / hi

    def sy(v):
        return SIZE - PAD - span * v / hi

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" '
        'stroke="#888" stroke-dasharray="4 3"/>',
        f'<line x1="{PAD}" y1="{SIZE - PAD}" x2="{SIZE - PAD}" y2="{SIZE - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{SIZE - PAD}" stroke="black"/>',
        f'<text x="{SIZE / 2:.0f}" y="{SIZE - 10}" text-anchor="middle" font-size="12">birth</text>',
        f'<text x="12" y="{SIZE / 2:.0f}" font-size="12" transform="rotate(-90 12 {SIZE / 2:.0f})" '
        'text-anchor="middle">death</text>',
        f'<text x="{SIZE - PAD}" y="{SIZE - PAD + 14}" text-anchor="end" font-size="10">{hi:.3g}</text>',
    ]
    if title:
        out.append(f'<text x="{SIZE / 2:.0f}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    # noise first so significant markers sit on top
    for sig in (False, True):
        for (b, dd), flag in zip(d, lab):
            if flag != sig:
                continue
            if sig:
                out.append(f'<circle cx="{sx(b):.2f}" cy="{sy(dd):.2f}" r="5" fill="#d62728" '
                           'class="significant"/>')
            else:
                out.append(f'<circle cx="{sx(b):.2f}" cy="{sy(dd):.2f}" r="3" fill="none" '
                           'stroke="#555" class="noise"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_pd(diagram, labels, path, title: str = "") -> Path:
    p = Path(path)
    text = render_svg(diagram, labels, title)
    try:
        p.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write plot to {p}: {exc}") from exc
    return p
