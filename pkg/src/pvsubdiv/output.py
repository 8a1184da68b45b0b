"""File formats: subdivision JSON, precision logs, CSV tables and SVG pictures.

All writers are deterministic: exact rationals go out as exact decimals
(or p/q), floats as their shortest round-trip repr, and wall-clock times
only when explicitly requested.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .boxes import index_of_box, NBox
from .interval import CODE_OF_KIND, CertificateKind, KIND_OF_CODE, Subdivision
from .poly import AffinePoly, PolynomialError, eval_many, format_rational, poly_from_dict, poly_to_dict

FORMAT_TAG = "pvsubdiv.subdivision"
FORMAT_VERSION = 1


def _num(x) -> str:
    return format_rational(x)


def _float(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# subdivision files


def _json_stats(stats: dict) -> dict:
    out = {}
    for key in ("max_scheduled_precision", "max_precision", "bit_cost"):
        if key in stats:
            out[key] = int(stats[key])
    if "precision_by_depth" in stats:
        out["precision_by_depth"] = {str(k): list(v) for k, v in sorted(stats["precision_by_depth"].items())}
    return out


def dumps_subdivision(sub: Subdivision, f: AffinePoly | None = None, record_time: bool = False) -> str:
    """JSON text with one box per line."""
    head = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "mode": sub.mode,
        "a": _num(sub.a),
        "n": sub.n,
        "box_count": sub.box_count,
        "processed": int(sub.processed),
        "deepest": int(sub.max_depth),
        "total_volume": _num(sub.total_volume()),
        "stats": _json_stats(sub.stats),
    }
    if f is not None:
        head["poly"] = poly_to_dict(f)
    if record_time:
        head["wall_time"] = sub.wall_time
    lines = []
    for i in range(sub.box_count):
        box = sub.box(i)
        lines.append(json.dumps({
            "depth": box.depth,
            "center": [_num(c) for c in box.center],
            "width": _num(box.width),
            "certificate": KIND_OF_CODE[int(sub.kinds[i])].value,
            "lhs": _float(sub.lhs[i]),
            "threshold": _float(sub.thresholds[i]),
        }, separators=(", ", ": ")))
    fields = [f" {json.dumps(k)}: {json.dumps(v)}" for k, v in head.items()]
    return "{\n" + ",\n".join(fields) + ',\n "boxes": [\n  ' + ",\n  ".join(lines) + "\n ]\n}\n"


def loads_subdivision(text: str) -> tuple[Subdivision, AffinePoly | None]:
    """Parse :func:`dumps_subdivision` output back into a Subdivision."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"subdivision file is not valid JSON: {exc}") from exc
    if data.get("format") != FORMAT_TAG:
        raise ValueError("not a subdivision file")
    a = Fraction(data["a"])
    n = int(data["n"])
    boxes = data["boxes"]
    k = len(boxes)
    depths = np.zeros(k, dtype=np.int64)
    indices = np.zeros((k, n), dtype=np.int64)
    kinds = np.zeros(k, dtype=np.int8)
    lhs = np.zeros(k)
    thr = np.zeros(k)
    for i, b in enumerate(boxes):
        box = NBox.make([Fraction(c) for c in b["center"]], Fraction(b["width"]), int(b["depth"]))
        if box.width != 2 * a / 2 ** box.depth:
            raise ValueError(f"box {i} has the wrong width for its depth")
        depths[i] = box.depth
        indices[i] = index_of_box(a, box)
        kinds[i] = CODE_OF_KIND[CertificateKind(b["certificate"])]
        lhs[i] = math.nan if b["lhs"] is None else b["lhs"]
        thr[i] = math.nan if b["threshold"] is None else b["threshold"]
    stats = dict(data.get("stats", {}))
    if "precision_by_depth" in stats:
        stats["precision_by_depth"] = {int(k): tuple(v) for k, v in stats["precision_by_depth"].items()}
    sub = Subdivision(a, n, depths, indices, kinds, lhs, thr, int(data["processed"]), int(data["deepest"]),
                      data["mode"], float(data.get("wall_time", 0.0)), stats)
    f = poly_from_dict(data["poly"]) if "poly" in data else None
    return sub, f


def load_subdivision(path) -> tuple[Subdivision, AffinePoly | None]:
    with open(path) as fh:
        return loads_subdivision(fh.read())


# ---------------------------------------------------------------------------
# CSV


def _cell(v) -> str:
    if isinstance(v, (Fraction, int)) and not isinstance(v, bool):
        return _num(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def dumps_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def loads_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def precision_log_rows(rows: Iterable[dict], n: int) -> list[dict]:
    out = []
    for r in rows:
        row = {"depth": r["depth"]}
        for i, c in enumerate(r["center"]):
            row[f"center_{i + 1}"] = c
        row.update(width=r["width"], m_scheduled=r["m_scheduled"], m_used=r["m_used"],
                   certificate=r["certificate"] or "subdivided")
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# SVG

SVG_SIZE = 512


def _px(v: float) -> str:
    return repr(round(float(v), 6))


def zero_crossing_cells(f: AffinePoly, a: float, size: int = SVG_SIZE) -> np.ndarray:
    """Boolean (size, size) mask of grid cells whose corner values change sign.

    Row 0 is the top of the picture (largest y).
    """
    t = np.linspace(-a, a, size + 1)
    X, Y = np.meshgrid(t, t[::-1])
    vals = eval_many(f, np.column_stack([X.ravel(), Y.ravel()])).reshape(size + 1, size + 1)
    s = np.sign(vals)
    corners = np.stack([s[:-1, :-1], s[:-1, 1:], s[1:, :-1], s[1:, 1:]])
    return (corners.max(axis=0) > 0) & (corners.min(axis=0) < 0) | (corners == 0).any(axis=0)


def render_svg(sub: Subdivision, f: AffinePoly | None = None, size: int = SVG_SIZE) -> str:
    """Box outlines in red over [-a, a]^2, with an optional sampled zero curve in blue."""
    if sub.n != 2:
        raise PolynomialError("SVG rendering needs n = 2")
    a = float(sub.a)
    scale = size / (2 * a)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>']
    if f is not None:
        mask = zero_crossing_cells(f, a, size)
        rows, cols = np.nonzero(mask)
        if len(rows):
            d = "".join(f"M{c} {r}h1v1h-1z" for r, c in zip(rows.tolist(), cols.tolist()))
            out.append(f'<path d="{d}" fill="blue" stroke="none"/>')
    C = sub.centers_float()
    W = sub.widths_float()
    out.append('<g fill="none" stroke="red" stroke-width="0.5">')
    for (cx, cy), w in zip(C.tolist(), W.tolist()):
        x0 = (cx - w / 2 + a) * scale
        y0 = (a - cy - w / 2) * scale
        out.append(f'<rect x="{_px(x0)}" y="{_px(y0)}" width="{_px(w * scale)}" height="{_px(w * scale)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def loglog_svg(xs: Sequence[float], ys: Sequence[float], slope: float, intercept: float,
               xlabel: str = "d", ylabel: str = "mean boxes", size: int = SVG_SIZE) -> str:
    """A small log-log scatter with the fitted line."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    fit = slope * lx + intercept
    lo_x, hi_x = lx.min(), lx.max()
    lo_y, hi_y = min(ly.min(), fit.min()), max(ly.max(), fit.max())
    pad = 48
    span_x = (hi_x - lo_x) or 1.0
    span_y = (hi_y - lo_y) or 1.0
    px = lambda v: pad + (v - lo_x) / span_x * (size - 2 * pad)
    py = lambda v: size - pad - (v - lo_y) / span_y * (size - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
           f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
           f'<line x1="{_px(px(lo_x))}" y1="{_px(py(fit[lx.argmin()]))}" x2="{_px(px(hi_x))}" '
           f'y2="{_px(py(fit[lx.argmax()]))}" stroke="gray" stroke-dasharray="4 3"/>']
    for x, y, vx in zip(lx, ly, xs):
        out.append(f'<circle cx="{_px(px(x))}" cy="{_px(py(y))}" r="3" fill="red"/>')
        out.append(f'<text x="{_px(px(x))}" y="{size - pad + 16}" font-size="11" text-anchor="middle">{vx:g}</text>')
    out.append(f'<text x="{size // 2}" y="{size - 8}" font-size="12" text-anchor="middle">log {xlabel}</text>')
    out.append(f'<text x="12" y="{size // 2}" font-size="12" transform="rotate(-90 12 {size // 2})" '
               f'text-anchor="middle">log {ylabel}</text>')
    out.append(f'<text x="{pad + 8}" y="{pad - 12}" font-size="12">slope {slope:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
