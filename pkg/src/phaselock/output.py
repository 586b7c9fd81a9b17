"""CSV, SVG and run-manifest writers. All files are written atomically."""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from html import escape

CSV_HEADER = "p,q,B,A_left,A_right,width,multiplier,status"

# fixed drawing geometry: plot area inside a 800x500 viewBox
SVG_W, SVG_H = 800, 500
SVG_LEFT, SVG_RIGHT, SVG_TOP, SVG_BOTTOM = 60, 20, 20, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temp file in the target directory and rename it into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def slices_csv(slices) -> str:
    rows = [CSV_HEADER]
    for s in slices:
        rows.append(",".join([str(s.p), str(s.q), repr(float(s.B)), repr(float(s.A_left)),
                              repr(float(s.A_right)), repr(float(s.width)),
                              repr(float(s.multiplier)), s.status.replace(",", ";")]))
    return "\n".join(rows) + "\n"


def slices_svg(slices, A_range, B_values) -> str:
    """Tongue diagram: ``A`` to the right, ``B`` upward, one segment per slice colored by ``q``."""
    A0, A1 = (float(A_range[0]), float(A_range[1])) if A_range else (0.0, 1.0)
    Bs = [float(b) for b in B_values] or [0.0]
    B0, B1 = min(Bs), max(Bs)
    if B1 == B0:
        B0, B1 = B0 - 0.5, B1 + 0.5
    if A1 == A0:
        A0, A1 = A0 - 0.5, A1 + 0.5
    pw = SVG_W - SVG_LEFT - SVG_RIGHT
    ph = SVG_H - SVG_TOP - SVG_BOTTOM

    def px(A):
        return SVG_LEFT + (A - A0) / (A1 - A0) * pw

    def py(B):
        return SVG_TOP + (B1 - B) / (B1 - B0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_W} {SVG_H}">',
        f"<!-- mapping: x = {SVG_LEFT} + (A - {A0!r}) / ({A1!r} - {A0!r}) * {pw}; "
        f"y = {SVG_TOP} + ({B1!r} - B) / ({B1!r} - {B0!r}) * {ph} -->",
        f'<rect x="{SVG_LEFT}" y="{SVG_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{SVG_LEFT + pw / 2}" y="{SVG_H - 12}" text-anchor="middle">A</text>',
        f'<text x="16" y="{SVG_TOP + ph / 2}" text-anchor="middle">B</text>',
        f'<text x="{SVG_LEFT}" y="{SVG_H - 30}" text-anchor="middle">{A0:g}</text>',
        f'<text x="{SVG_LEFT + pw}" y="{SVG_H - 30}" text-anchor="middle">{A1:g}</text>',
    ]
    for B in sorted(set(Bs)):
        out.append(f'<text x="{SVG_LEFT - 6}" y="{py(B) + 4:.2f}" text-anchor="end">{B:g}</text>')
    for s in slices:
        if not (math.isfinite(s.A_left) and math.isfinite(s.A_right)):
            continue
        color = PALETTE[(s.q - 1) % len(PALETTE)]
        x0, x1 = px(max(s.A_left, A0)), px(min(s.A_right, A1))
        y = py(s.B)
        out.append(f'<line x1="{x0:.2f}" y1="{y:.2f}" x2="{max(x1, x0 + 1):.2f}" y2="{y:.2f}" '
                   f'stroke="{color}" stroke-width="6"><title>{escape(f"{s.p}/{s.q}")} '
                   f'width {s.width:.6g}</title></line>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RunManifest:
    """Resolved parameters of one CLI run, as ``key = value`` lines.

    Parameters are stored as JSON values under ``param.<name>`` so they
    re-parse to identical Python values; ``version`` and ``wall_time`` are
    informational.
    """

    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = ""
    wall_time: float = 0.0

    def to_text(self) -> str:
        lines = [f"subcommand = {self.subcommand}", f"version = {self.version}",
                 f"seed = {json.dumps(self.seed)}", f"wall_time = {self.wall_time!r}"]
        lines += [f"param.{k} = {json.dumps(v)}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        m = cls("")
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition(" = ")
            if not sep:
                raise ValueError(f"manifest line {lineno}: expected 'key = value'")
            if key == "subcommand":
                m.subcommand = val
            elif key == "version":
                m.version = val
            elif key == "seed":
                m.seed = json.loads(val)
            elif key == "wall_time":
                m.wall_time = float(val)
            elif key.startswith("param."):
                m.params[key[6:]] = json.loads(val)
            else:
                raise ValueError(f"manifest line {lineno}: unknown key {key!r}")
        if not m.subcommand:
            raise ValueError("manifest has no subcommand")
        return m

    def write(self, path) -> None:
        atomic_write(path, self.to_text())

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls.from_text(fh.read())
