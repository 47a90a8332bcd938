"""Slope tables and self-contained log-log SVG plots."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from .experiments import QUANTITIES, StudyResult, slopes_to_csv
from .io import atomic_write_text
from .schemes import LABELS, SCHEME_NAMES
from .stats import fit_loglog_slope

_QUANTITY_SUFFIX = {"f": "", "fx": ",x", "fy": ",y", "fxx": ",xx", "fxy": ",xy", "fyy": ",yy"}
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
            "#e377c2", "#7f7f7f", "#bcbd22")


def _fmt_slope(v: float) -> str:
    if round(v, 2) == 0.0:
        return "0"
    return f"{v:+.2f}"


def emit_slope_table(results: Sequence[StudyResult], metric: str = "rmse") -> tuple[str, str]:
    """Scheme x quantity matrix of fitted slopes, one block per distribution.

    Quantities a scheme does not compute are shown as dashes.  Returns the
    text table and the slopes CSV.
    """
    results = list(results)
    if not results:
        raise ValueError("no studies to tabulate")
    blocks = []
    for dist in dict.fromkeys(r.distribution for r in results):
        subset = [r for r in results if r.distribution == dist]
        schemes = [s for s in SCHEME_NAMES if any(r.scheme == s for r in subset)]
        schemes += sorted({r.scheme for r in subset} - set(schemes))
        fields = sorted({r.field for r in subset})
        by_key = {(r.scheme, r.field): r for r in subset}
        width = 8
        head = f"{'quantity':<10}" + "".join(f"{LABELS.get(s, s):>{width}}" for s in schemes)
        lines = [f"Convergence rates of {metric.upper()} vs N ({dist} distribution)", head,
                 "-" * len(head)]
        for fld in fields:
            for q in QUANTITIES:
                cells = []
                for s in schemes:
                    res = by_key.get((s, fld))
                    cell = "-----"
                    if res is not None and q in res.quantities and len(res.rows) >= 2:
                        try:
                            cell = _fmt_slope(res.slope(q, metric=metric).slope)
                        except ValueError:
                            cell = "n/a"
                    cells.append(f"{cell:>{width}}")
                lines.append(f"{fld + _QUANTITY_SUFFIX[q]:<10}" + "".join(cells))
            lines.append("-" * len(head))
        notes = []
        for r in subset:
            for row in r.degraded_rows:
                notes.append(f"  * {LABELS.get(r.scheme, r.scheme)} {r.field}: N={row.N} "
                             f"fallbacks={row.fallbacks} ({row.fallbacks / row.N:.2%})")
        if notes:
            lines.append("Degraded rows (fallbacks > 1% of particles):")
            lines.extend(notes)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n", slopes_to_csv(results)


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

Reference = Union[float, tuple[str, Callable[[np.ndarray], np.ndarray]]]


def emit_loglog_plot(series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
                     reference_slopes: Iterable[Reference], path, title: str = "",
                     xlabel: str = "N", ylabel: str = "RMSE") -> Path:
    """Write a log-log SVG with one polyline per series and dashed guides.

    A reference is either an exponent ``p`` (drawn as ``x^p``) or a
    ``(label, g)`` pair drawn as ``g(x)``; each guide passes through the
    first point of the first series.
    """
    data = {}
    for name, (xs, ys) in series.items():
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        if x.size == 0 or x.shape != y.shape:
            raise ValueError(f"series {name!r}: x and y must be non-empty and equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))) or np.any(x <= 0) or np.any(y <= 0):
            raise ValueError(f"series {name!r} has non-positive or non-finite values")
        data[name] = (x, y)
    if not data:
        raise ValueError("nothing to plot")

    x0, y0 = next(iter(data.values()))
    guides = []
    for ref in reference_slopes:
        if isinstance(ref, tuple):
            label, g = ref
        else:
            p = float(ref)
            label, g = f"x^{p:g}", (lambda x, p=p: x ** p)
        guides.append((label, g))

    allx = np.concatenate([d[0] for d in data.values()])
    ally = np.concatenate([d[1] for d in data.values()])
    lxmin, lxmax = math.floor(np.log10(allx.min())), math.ceil(np.log10(allx.max()))
    if lxmax == lxmin:
        lxmax += 1
    gx = np.logspace(np.log10(allx.min()), np.log10(allx.max()), 32)
    guide_curves = []
    for label, g in guides:
        gy = y0[0] * g(gx) / g(np.array([x0[0]]))[0]
        guide_curves.append((label, gx, gy))
        ally = np.concatenate([ally, gy[gy > 0]])
    lymin, lymax = math.floor(np.log10(ally.min())), math.ceil(np.log10(ally.max()))
    if lymax == lymin:
        lymax += 1

    W, H = 720, 520
    left, right, top, bottom = 80, 200, 40, 60
    pw, ph = W - left - right, H - top - bottom

    def sx(v):
        return left + (np.log10(v) - lxmin) / (lxmax - lxmin) * pw

    def sy(v):
        return top + ph - (np.log10(v) - lymin) / (lymax - lymin) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in range(lxmin, lxmax + 1):
        px = sx(10.0 ** d)
        out.append(f'<line x1="{px:.2f}" y1="{top}" x2="{px:.2f}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{px:.2f}" y="{top + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in range(lymin, lymax + 1):
        py = sy(10.0 ** d)
        out.append(f'<line x1="{left}" y1="{py:.2f}" x2="{left + pw}" y2="{py:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{py + 4:.2f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')

    legend_y = top + 10
    for label, gxs, gys in guide_curves:
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(gxs, gys))
        out.append(f'<polyline class="reference" points="{pts}" fill="none" stroke="#555555" '
                   f'stroke-dasharray="6,4"/>')
        out.append(f'<line x1="{left + pw + 12}" y1="{legend_y}" x2="{left + pw + 36}" y2="{legend_y}" '
                   f'stroke="#555555" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{left + pw + 42}" y="{legend_y + 4}">{escape(label)}</text>')
        legend_y += 18

    for i, (name, (x, y)) in enumerate(data.items()):
        colour = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for a, b in zip(x, y):
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="{colour}"/>')
        label = name
        if x.size >= 2 and np.ptp(x) > 0:
            label += f" ({fit_loglog_slope(zip(x, y)).slope:+.2f})"
        out.append(f'<line x1="{left + pw + 12}" y1="{legend_y}" x2="{left + pw + 36}" y2="{legend_y}" '
                   f'stroke="{colour}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw + 42}" y="{legend_y + 4}">{escape(label)}</text>')
        legend_y += 18
    out.append("</svg>")
    path = Path(path)
    atomic_write_text(path, "\n".join(out) + "\n")
    return path


def study_plots(results: Sequence[StudyResult], out_dir, metric: str = "rmse") -> list[Path]:
    """Figure set: error vs N per field and quantity, std vs n for scaled schemes."""
    out_dir = Path(out_dir)
    written = []
    for dist in dict.fromkeys(r.distribution for r in results):
        subset = [r for r in results if r.distribution == dist]
        for fld in sorted({r.field for r in subset}):
            for q in QUANTITIES:
                series = {}
                for r in subset:
                    if r.field != fld or q not in r.quantities:
                        continue
                    ys = r.column(metric, q)
                    if np.all(np.isfinite(ys)) and np.all(ys > 0):
                        series[LABELS.get(r.scheme, r.scheme)] = ([row.N for row in r.rows], ys)
                if not series:
                    continue
                written.append(emit_loglog_plot(
                    series, [-1.0, -2.0], out_dir / f"{metric}_{dist}_{fld}_{q}.svg",
                    title=f"{fld}{_QUANTITY_SUFFIX[q]} ({dist})", xlabel="N",
                    ylabel=metric.upper()))
            series = {}
            for r in subset:
                if r.field != fld or not r.scheme.endswith("n"):
                    continue
                xs = np.array([row.n_interior for row in r.rows])
                ys = r.column("std", "f")
                if np.all(np.isfinite(xs)) and np.all(ys > 0):
                    series[LABELS.get(r.scheme, r.scheme)] = (xs, ys)
            if series:
                written.append(emit_loglog_plot(
                    series, [-1.0, ("n^-1 log n", lambda x: np.log(x) / x)],
                    out_dir / f"std_{dist}_{fld}.svg", title=f"std of {fld} error ({dist})",
                    xlabel="n", ylabel="standard deviation"))
    return written
