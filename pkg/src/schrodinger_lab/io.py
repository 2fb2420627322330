"""File formats: graph descriptions, marginal CSVs, JSON records, SVG charts.

Graph file grammar (one directive per line, ``#`` starts a comment)::

    states: <n>                      # required, first directive
    edge <i> <j> <rate_ij> <rate_ji> # states are integers 0..n-1
    m <i> <value>                    # reversing measure, one line per state
    simple                           # instead of m lines: simple random walk

With ``simple`` the edges carry no rates (``edge <i> <j>``) and each state
jumps to each of its ``n_x`` neighbours at rate ``1/n_x``, reversible with
respect to ``m(x) = n_x``.  Unknown directives are rejected.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .entropy import Measure, PreconditionError
from .markov import GraphError, RateGraph, ReversibleChain, simple_random_walk

MASS_SLACK = 1e-6


class InputError(PreconditionError):
    """A file cannot be parsed or violates its format."""


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _int(tok, where, n=None):
    try:
        v = int(tok)
    except ValueError:
        raise InputError(f"{where}: expected an integer state, got {tok!r}") from None
    if n is not None and not 0 <= v < n:
        raise InputError(f"{where}: state {v} outside 0..{n - 1}")
    return v


def _float(tok, where):
    try:
        v = float(tok)
    except ValueError:
        raise InputError(f"{where}: expected a number, got {tok!r}") from None
    if not math.isfinite(v):
        raise InputError(f"{where}: value must be finite")
    return v


def parse_graph(text: str, source: str = "<graph>") -> ReversibleChain:
    """Parse the graph grammar above into a :class:`ReversibleChain`."""
    n = None
    simple = False
    edges: list[tuple[int, int, float | None, float | None]] = []
    m: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if n is None:
            head, _, rest = line.partition(":")
            if head.strip() != "states" or not rest.strip():
                raise InputError(f"{where}: the first directive must be 'states: <n>'")
            n = _int(rest.strip(), where)
            if n < 2:
                raise InputError(f"{where}: need at least 2 states")
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "edge":
            if len(tok) == 3:
                i, j = _int(tok[1], where, n), _int(tok[2], where, n)
                edges.append((i, j, None, None))
            elif len(tok) == 5:
                i, j = _int(tok[1], where, n), _int(tok[2], where, n)
                edges.append((i, j, _float(tok[3], where), _float(tok[4], where)))
            else:
                raise InputError(f"{where}: expected 'edge <i> <j> [<rate_ij> <rate_ji>]'")
            if i == j:
                raise InputError(f"{where}: self-loop at state {i}")
        elif kind == "m":
            if len(tok) != 3:
                raise InputError(f"{where}: expected 'm <i> <value>'")
            i = _int(tok[1], where, n)
            if i in m:
                raise InputError(f"{where}: duplicate m entry for state {i}")
            m[i] = _float(tok[2], where)
        elif kind == "simple" and len(tok) == 1:
            simple = True
        else:
            raise InputError(f"{where}: unknown directive {kind!r}")
    if n is None:
        raise InputError(f"{source}: empty graph file")
    if not edges:
        raise InputError(f"{source}: no edges")
    try:
        if simple:
            if m:
                raise InputError(f"{source}: 'simple' and 'm' lines are mutually exclusive")
            if any(e[2] is not None for e in edges):
                raise InputError(f"{source}: edges of a 'simple' graph take no rates")
            return simple_random_walk(n, [(i, j) for i, j, _, _ in edges])
        if any(e[2] is None for e in edges):
            raise InputError(f"{source}: edges need rates unless 'simple' is given")
        missing = sorted(set(range(n)) - set(m))
        if missing:
            raise InputError(f"{source}: reversing measure missing for states {missing}")
        J = np.zeros((n, n))
        for i, j, rij, rji in edges:
            if J[i, j] or J[j, i]:
                raise InputError(f"{source}: duplicate edge ({i}, {j})")
            J[i, j], J[j, i] = rij, rji
        return ReversibleChain(RateGraph(tuple(range(n)), J), Measure([m[i] for i in range(n)]))
    except GraphError as exc:
        raise InputError(f"{source}: {exc}") from exc


def read_graph(path) -> ReversibleChain:
    return parse_graph(_read_text(path), str(path))


def parse_marginal(text: str, n_states: int, source: str = "<marginal>") -> np.ndarray:
    """``state,weight`` rows (optional header) into a probability vector.

    Unlisted states get weight 0.  A total within ``1e-6`` of 1 is
    renormalised; anything further off is rejected.
    """
    out = np.zeros(n_states)
    seen = set()
    rows = list(csv.reader(text.splitlines()))
    for lineno, row in enumerate(rows, start=1):
        row = [c.strip() for c in row]
        if not row or not any(row) or row[0].startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if len(row) != 2:
            raise InputError(f"{where}: expected 'state,weight'")
        if lineno == 1 and row[0].lower() == "state":
            continue
        i = _int(row[0], where, n_states)
        if i in seen:
            raise InputError(f"{where}: duplicate state {i}")
        seen.add(i)
        w = _float(row[1], where)
        if w < 0:
            raise InputError(f"{where}: negative weight")
        out[i] = w
    total = out.sum()
    if abs(total - 1.0) > MASS_SLACK:
        raise InputError(f"{source}: weights sum to {total!r}, not 1")
    return out / total


def read_marginal(path, n_states: int) -> np.ndarray:
    return parse_marginal(_read_text(path), n_states, str(path))


def format_marginal(weights) -> str:
    lines = ["state,weight"] + [f"{i},{float(w)!r}" for i, w in enumerate(weights)]
    return "\n".join(lines) + "\n"


# serialisation


def to_jsonable(obj):
    """Plain-Python copy of ``obj``; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    # repr-based floats are the shortest strings that round-trip exactly
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps_json(obj))


def read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def csv_text(header, rows) -> str:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            v = float(v)
            return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# charts


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def svg_line_chart(series: dict, title: str, xlabel: str, ylabel: str, hlines: dict | None = None,
                   width: int = 640, height: int = 400) -> str:
    """Static SVG with one polyline per series (``name -> (xs, ys)``), axis
    ticks, and optional labelled horizontal reference lines."""
    hlines = hlines or {}
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()] + [np.array(list(hlines.values()), float)])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')
    for name, yv in hlines.items():
        out.append(f'<line x1="{left}" y1="{py(yv):.2f}" x2="{left + pw}" y2="{py(yv):.2f}" '
                   f'stroke="gray" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{left + pw - 4}" y="{py(yv) - 4:.2f}" text-anchor="end" fill="gray">{name}</text>')
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    for c, (name, (x, y)) in enumerate(series.items()):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        col = colours[c % len(colours)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="2"/>')
        for a, b in zip(x, y):
            if math.isfinite(b):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{col}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 16 + 14 * c}" fill="{col}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
