"""Run artifacts: metrics CSV, SVG error curves and the run manifest."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Iterable, Sequence

from .engine import MetricsLog

CSV_HEADER = "iteration,err_g1,err_g2,err_g3"
COLORS = ("#1f77b4", "#d62728", "#2ca02c")


def write_csv(log: MetricsLog, path: str | os.PathLike) -> None:
    lines = [CSV_HEADER]
    lines += [f"{it},{e1:.6f},{e2:.6f},{e3:.6f}" for it, e1, e2, e3 in log]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str | os.PathLike) -> MetricsLog:
    text = Path(path).read_text(encoding="ascii")
    lines = text.split("\n")
    if lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {lines[0]!r}")
    log = MetricsLog()
    for line in lines[1:]:
        if not line:
            continue
        it, *errs = line.split(",")
        log.append(int(it), [float(e) for e in errs])
    return log


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _nice_step(span: float, target: int = 6) -> int:
    raw = max(span / target, 1.0)
    mag = 10 ** (len(str(int(raw))) - 1)
    for mult in (1, 2, 5, 10):
        if mag * mult >= raw:
            return int(mag * mult)
    return int(mag * 10)


def render_svg(
    log: MetricsLog,
    path: str | os.PathLike,
    probs: Sequence[float] | None = None,
    title: str = "Per-group classification error",
) -> None:
    if len(log) == 0:
        raise ValueError("cannot plot an empty log")
    width, height = 800, 480
    left, right, top, bottom = 70, 180, 40, 60
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = log.rows[0][0], log.rows[-1][0]
    span = max(x1 - x0, 1)

    def px(it: int) -> float:
        return left + (it - x0) / span * pw

    def py(err: float) -> float:
        return top + (1.0 - err) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left + pw / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{_esc(title)}</text>',
    ]
    for i in range(6):
        err = i / 5
        y = py(err)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#e0e0e0"/>')
        out.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{err:.1f}</text>'
        )
    step = _nice_step(span)
    tick = x0 - x0 % step + (step if x0 % step else 0)
    while tick <= x1:
        x = px(tick)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="#000000"/>')
        out.append(
            f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{tick}</text>'
        )
        tick += step
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>'
    )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 18}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">iteration</text>'
    )
    out.append(
        f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 18 {top + ph / 2:.1f})">error rate</text>'
    )
    for g in range(3):
        pts = " ".join(f"{px(row[0]):.2f},{py(row[g + 1]):.2f}" for row in log.rows)
        out.append(
            f'<polyline id="group{g + 1}" fill="none" stroke="{COLORS[g]}" stroke-width="1.5" '
            f'points="{pts}"/>'
        )
    for g in range(3):
        y = top + 20 + g * 22
        label = f"group {g + 1}"
        if probs is not None:
            label += f" (p={probs[g]:g})"
        out.append(
            f'<line x1="{left + pw + 15}" y1="{y}" x2="{left + pw + 40}" y2="{y}" '
            f'stroke="{COLORS[g]}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{left + pw + 46}" y="{y + 4}" font-family="sans-serif" '
            f'font-size="12">{_esc(label)}</text>'
        )
    out.append("</svg>")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | os.PathLike,
    entries: Iterable[tuple[str, str]],
    artifacts: Iterable[str | os.PathLike] = (),
) -> None:
    """Flat ``key = value`` manifest; artifact checksums keyed by file name."""
    lines = [f"{k} = {v}" for k, v in entries]
    for art in artifacts:
        lines.append(f"sha256.{Path(art).name} = {sha256_file(art)}")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out
