"""File emitters: CSV, JSON, static SVG and run manifests."""

import csv
import datetime as _dt
import hashlib
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from xml.sax.saxutils import escape

import numpy as np


class EmitError(OSError):
    """Writing an output file failed."""


def _open(path, mode="w"):
    try:
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(path, header, rows):
    """Header row plus one line per row; LF endings, shortest round-trip floats."""
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(data):
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, default=_plain) + "\n"


def emit_json(path, data):
    text = dumps(data)
    with _open(path) as fh:
        fh.write(text)
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- SVG ---------------------------------------------------------------------

_W, _H = 640, 480
_PAD = (70, 20, 30, 55)  # left, right, top, bottom

# a few anchors of a perceptually ordered dark-to-bright map
_COLORS = np.array([
    [13, 8, 135], [84, 2, 163], [139, 10, 165], [185, 50, 137],
    [219, 92, 104], [244, 136, 73], [254, 188, 43], [240, 249, 33],
], dtype=float)


def _color(x):
    x = min(max(float(x), 0.0), 1.0) * (len(_COLORS) - 1)
    i = min(int(x), len(_COLORS) - 2)
    c = _COLORS[i] + (x - i) * (_COLORS[i + 1] - _COLORS[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _ticks(lo, hi, n=5):
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


class _Frame:
    def __init__(self, xlim, ylim):
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 1, xlim[0] + 1)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 1, ylim[0] + 1)
        left, right, top, bottom = _PAD
        self.x0, self.x1 = left, _W - right
        self.y0, self.y1 = _H - bottom, top

    def x(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * (self.x1 - self.x0)

    def y(self, v):
        lo, hi = self.ylim
        return self.y0 + (v - lo) / (hi - lo) * (self.y1 - self.y0)


def _axes(frame, title, xlabel, ylabel):
    parts = [
        f'<rect x="{frame.x0}" y="{frame.y1}" width="{frame.x1 - frame.x0}" '
        f'height="{frame.y0 - frame.y1}" fill="none" stroke="black"/>'
    ]
    for t in _ticks(*frame.xlim):
        x = frame.x(t)
        parts.append(f'<line x1="{x:.2f}" y1="{frame.y0}" x2="{x:.2f}" y2="{frame.y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{frame.y0 + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(*frame.ylim):
        y = frame.y(t)
        parts.append(f'<line x1="{frame.x0 - 5}" y1="{y:.2f}" x2="{frame.x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{frame.x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    cx = (frame.x0 + frame.x1) / 2
    cy = (frame.y0 + frame.y1) / 2
    parts.append(f'<text x="{cx:.1f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="16" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>'
    )
    if title:
        parts.append(f'<text x="{cx:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    return parts


def _svg(body):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _limits(values, pad=0.0):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return (0.0, 1.0)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    return (lo - pad * span, hi + pad * span)


def emit_svg_scatter(path, xs, ys, weights=None, title="", xlabel="x", ylabel="y",
                     xlim=None, ylim=None, lines=()):
    """Scatter plot with marker area proportional to weight.

    ``lines`` is an optional sequence of polylines drawn underneath.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    w = np.ones_like(xs) if weights is None else np.asarray(weights, dtype=float)
    allx = np.concatenate([xs] + [np.asarray(l)[:, 0] for l in lines if len(l)])
    ally = np.concatenate([ys] + [np.asarray(l)[:, 1] for l in lines if len(l)])
    frame = _Frame(xlim or _limits(allx, 0.02), ylim or _limits(ally, 0.02))
    body = _axes(frame, title, xlabel, ylabel)
    for line in lines:
        pts = " ".join(f"{frame.x(a):.2f},{frame.y(b):.2f}" for a, b in np.asarray(line))
        body.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-dasharray="4 3"/>')
    wmax = float(w.max()) if w.size else 1.0
    for x, y, wt in zip(xs, ys, w):
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        r = 3.0 * math.sqrt(max(wt, 0.0) / wmax) if wmax > 0 else 0.0
        if r > 0.05:
            body.append(f'<circle cx="{frame.x(x):.2f}" cy="{frame.y(y):.2f}" r="{r:.2f}" fill="black"/>')
    with _open(path) as fh:
        fh.write(_svg(body))
    return path


def _block_reduce(values, max_cells):
    # average blocks so neither axis exceeds max_cells
    values = np.asarray(values, dtype=float)
    fy = max(1, math.ceil(values.shape[0] / max_cells))
    fx = max(1, math.ceil(values.shape[1] / max_cells))
    ny, nx = values.shape[0] // fy, values.shape[1] // fx
    trimmed = values[: ny * fy, : nx * fx]
    with warnings.catch_warnings():
        # all-NaN blocks stay NaN and are drawn grey
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmean(trimmed.reshape(ny, fy, nx, fx), axis=(1, 3))


def emit_svg_heatmap(path, values, xlim, ylim, title="", xlabel="x", ylabel="y", max_cells=200,
                     lines=()):
    """Heat map of ``values[row, col]``: rows run along y, columns along x."""
    grid = _block_reduce(values, max_cells)
    frame = _Frame(tuple(xlim), tuple(ylim))
    finite = grid[np.isfinite(grid)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    ny, nx = grid.shape
    dx = (frame.x1 - frame.x0) / nx
    dy = (frame.y0 - frame.y1) / ny
    body = []
    for i in range(ny):
        for j in range(nx):
            v = grid[i, j]
            fill = "#808080" if not math.isfinite(v) else _color((v - lo) / span)
            body.append(
                f'<rect x="{frame.x0 + j * dx:.2f}" y="{frame.y0 - (i + 1) * dy:.2f}" '
                f'width="{dx + 0.05:.2f}" height="{dy + 0.05:.2f}" fill="{fill}"/>'
            )
    for line in lines:
        pts = " ".join(f"{frame.x(a):.2f},{frame.y(b):.2f}" for a, b in np.asarray(line))
        body.append(f'<polyline points="{pts}" fill="none" stroke="white" stroke-dasharray="4 3"/>')
    body.extend(_axes(frame, title, xlabel, ylabel))
    with _open(path) as fh:
        fh.write(_svg(body))
    return path


# -- manifests ---------------------------------------------------------------


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    params: dict
    version: str
    seed: int = None
    started: str = field(default_factory=_now)
    finished: str = None
    outputs: dict = field(default_factory=dict)

    def add_output(self, path):
        self.outputs[os.path.basename(path)] = sha256(path)

    def finish(self):
        self.finished = _now()

    def to_dict(self):
        return asdict(self)

    def write(self, path):
        if self.finished is None:
            self.finish()
        return emit_json(path, self.to_dict())

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))
