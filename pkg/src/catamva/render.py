"""Deterministic SVG figures for fitted models.

Output is plain SVG text with a fixed element order and two-decimal
coordinates, so identical models always render to identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .ca import CAModel, ContributionTable, contributions
from .errors import DimensionOutOfRange, EmptyModel
from .inference import ConfidenceEllipse
from .mds import MDSModel, group_means
from .mfa import MFAModel
from .plsc import LatentPair, salience_contributions

KINDS = (
    "scree",
    "factor-map",
    "contribution-bars",
    "mfa-partial-map",
    "mds-ellipse-map",
    "latent-pair-map",
)

# Okabe-Ito, then a few neutral extras; cluster/group index i uses PALETTE[i % len]
PALETTE = (
    "#E69F00", "#56B4E9", "#009E73", "#F0E442", "#0072B2",
    "#D55E00", "#CC79A7", "#999999", "#882255", "#44AA99",
)
SUPPLEMENTARY_COLOR = "#000000"
SIGNIFICANT_COLOR = "#6A3D9A"
AXIS_TEMPLATE = "Dimension {dim}, λ = {eig:.4g}, τ = {tau:.2f}%"

WIDTH, HEIGHT = 640, 520
MARGIN = dict(left=70, right=20, top=40, bottom=60)


@dataclass
class FigureSpec:
    kind: str
    dims: tuple[int, int] = (1, 2)  # 1-based; contribution bars and latent maps use dims[0]
    side: str = "row"
    colors: Sequence | None = None  # cluster indices or group labels, one per point
    title: str = ""
    axis_template: str = AXIS_TEMPLATE
    significant: Sequence[bool] | None = None
    ellipses: dict = field(default_factory=dict)
    supplementary: dict = field(default_factory=dict)  # label -> coordinates (all dims)
    important_only: bool = False
    show_labels: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _n(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


class _Svg:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def add(self, tag: str, text: str | None = None, **attrs):
        items = []
        for k, v in attrs.items():
            if v is None:
                continue
            k = k.rstrip("_").replace("_", "-")
            if isinstance(v, float):
                v = _n(v)
            items.append(f'{k}="{escape(str(v), {chr(34): "&quot;"})}"')
        head = f"<{tag} " + " ".join(items) if items else f"<{tag}"
        if text is None:
            self.parts.append(head + "/>")
        else:
            self.parts.append(f"{head}>{escape(text)}</{tag}>")

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">'
        )
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


class _Frame:
    """Maps data coordinates into the plotting rectangle."""

    def __init__(self, xlim, ylim, equal=False, width=WIDTH, height=HEIGHT):
        self.x0, self.x1 = MARGIN["left"], width - MARGIN["right"]
        self.y0, self.y1 = MARGIN["top"], height - MARGIN["bottom"]
        xlim, ylim = list(map(float, xlim)), list(map(float, ylim))
        for lim in (xlim, ylim):
            if lim[1] - lim[0] <= 0:
                half = max(abs(lim[0]), 1.0) * 0.5
                lim[0], lim[1] = lim[0] - half, lim[1] + half
        if equal:
            sx = (self.x1 - self.x0) / (xlim[1] - xlim[0])
            sy = (self.y1 - self.y0) / (ylim[1] - ylim[0])
            s = min(sx, sy)
            cx, cy = sum(xlim) / 2, sum(ylim) / 2
            hx, hy = (self.x1 - self.x0) / (2 * s), (self.y1 - self.y0) / (2 * s)
            xlim, ylim = [cx - hx, cx + hx], [cy - hy, cy + hy]
        self.xlim, self.ylim = xlim, ylim

    def x(self, v):
        return self.x0 + (float(v) - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * (self.x1 - self.x0)

    def y(self, v):
        return self.y1 - (float(v) - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * (self.y1 - self.y0)

    @property
    def sx(self):
        return (self.x1 - self.x0) / (self.xlim[1] - self.xlim[0])

    @property
    def sy(self):
        return (self.y1 - self.y0) / (self.ylim[1] - self.ylim[0])


def _limits(*arrays, pad=0.08):
    vals = np.concatenate([np.ravel(a) for a in arrays if np.size(a)] + [np.zeros(1)])
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo if hi > lo else 1.0
    return lo - pad * span, hi + pad * span


def _color_indices(colors, n):
    if colors is None:
        return [0] * n
    colors = list(colors)
    if len(colors) != n:
        raise ValueError(f"expected {n} color assignments, got {len(colors)}")
    if all(isinstance(c, (int, np.integer)) for c in colors):
        return [int(c) for c in colors]
    order = {c: i for i, c in enumerate(dict.fromkeys(colors))}
    return [order[c] for c in colors]


def _color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def _axis_label(template, dim, eig, tau):
    return template.format(dim=dim, eig=float(eig), tau=100.0 * float(tau))


def _title(svg, text):
    if text:
        svg.add("text", text, x=float(svg.width / 2), y=22.0, text_anchor="middle", font_size=14, class_="title")


def _axes(svg, fr, xlabel, ylabel):
    svg.add("rect", x=float(fr.x0), y=float(fr.y0), width=float(fr.x1 - fr.x0), height=float(fr.y1 - fr.y0),
            fill="none", stroke="#cccccc", class_="frame")
    if fr.ylim[0] < 0 < fr.ylim[1]:
        svg.add("line", x1=float(fr.x0), y1=fr.y(0), x2=float(fr.x1), y2=fr.y(0), stroke="#888888", class_="axis")
    if fr.xlim[0] < 0 < fr.xlim[1]:
        svg.add("line", x1=fr.x(0), y1=float(fr.y0), x2=fr.x(0), y2=float(fr.y1), stroke="#888888", class_="axis")
    svg.add("text", xlabel, x=float((fr.x0 + fr.x1) / 2), y=float(svg.height - 20), text_anchor="middle",
            class_="axis-label x-label")
    cy = (fr.y0 + fr.y1) / 2
    svg.add("text", ylabel, x=18.0, y=float(cy), text_anchor="middle",
            transform=f"rotate(-90 18.00 {_n(cy)})", class_="axis-label y-label")


def _require_dims(n_dims, dims):
    if n_dims == 0:
        raise EmptyModel("model has no dimensions to plot")
    for d in dims:
        if not 1 <= d <= n_dims:
            raise DimensionOutOfRange(f"dimension {d} requested but the model has {n_dims}")


def _diamond(svg, cx, cy, r, color, cls):
    pts = [(cx, cy - r), (cx + r, cy), (cx, cy + r), (cx - r, cy)]
    svg.add("polygon", points=" ".join(f"{_n(a)},{_n(b)}" for a, b in pts), fill=color,
            stroke="#000000", class_=cls)


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, without repeated endpoint."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


# ---------------------------------------------------------------------------
# figure kinds


def _eigen_tau(model):
    return np.asarray(model.eigenvalues, dtype=float), np.asarray(model.tau, dtype=float)


def _scree(fig, model):
    eig, tau = _eigen_tau(model)
    L = eig.size
    if L == 0:
        raise EmptyModel("model has no dimensions")
    svg = _Svg()
    _title(svg, fig.title)
    pct = 100.0 * tau
    fr = _Frame((0.4, L + 0.6), (0.0, float(pct.max()) * 1.12))
    _axes(svg, fr, "Dimension", "Explained variance (%)")
    bw = 0.7 * fr.sx
    for l in range(L):
        x = fr.x(l + 1) - bw / 2
        svg.add("rect", x=x, y=fr.y(pct[l]), width=bw, height=fr.y(0) - fr.y(pct[l]),
                fill="#BBBBBB", stroke="#555555", class_="bar")
        svg.add("text", str(l + 1), x=fr.x(l + 1), y=fr.y(0) + 14, text_anchor="middle", class_="tick")
    avg = 100.0 / L
    svg.add("line", x1=float(fr.x0), y1=fr.y(avg), x2=float(fr.x1), y2=fr.y(avg), stroke="#D55E00",
            stroke_dasharray="6 4", class_="average-line")
    if fig.significant is not None:
        sig = list(fig.significant)
        if len(sig) != L:
            raise ValueError(f"significance mask has {len(sig)} entries for {L} dimensions")
        for l, s in enumerate(sig):
            if s:
                svg.add("circle", cx=fr.x(l + 1), cy=fr.y(pct[l]) - 8, r=4.0, fill=SIGNIFICANT_COLOR,
                        class_="significance-marker")
    return svg.render()


def _points(fig, model):
    """Coordinates, labels, eigenvalues and tau for a factor map."""
    if isinstance(model, CAModel):
        return model.scores(fig.side), model.labels(fig.side), *_eigen_tau(model)
    if isinstance(model, MDSModel):
        return model.scores, model.labels, *_eigen_tau(model)
    if isinstance(model, MFAModel):
        return model.F, model.row_labels, *_eigen_tau(model)
    if isinstance(model, LatentPair):
        S = model.U if fig.side in ("row", "x") else model.V
        labels = model.x_labels if fig.side in ("row", "x") else model.y_labels
        return S, labels, *_eigen_tau(model)
    raise TypeError(f"cannot draw a factor map for {type(model).__name__}")


def _factor_map(fig, model):
    scores, labels, eig, tau = _points(fig, model)
    _require_dims(scores.shape[1], fig.dims)
    a, b = fig.dims[0] - 1, fig.dims[1] - 1
    sup = {k: np.asarray(v, dtype=float) for k, v in fig.supplementary.items()}
    sup_xy = np.array([[v[a], v[b]] for v in sup.values()]).reshape(-1, 2)
    keep = np.ones(len(labels), dtype=bool)
    if fig.important_only and isinstance(model, CAModel):
        keep = contributions(model, fig.side).mask[:, [a, b]].any(axis=1)
    colors = _color_indices(fig.colors, len(labels))
    svg = _Svg()
    _title(svg, fig.title)
    fr = _Frame(_limits(scores[keep, a], sup_xy[:, 0]), _limits(scores[keep, b], sup_xy[:, 1]), equal=True)
    _axes(svg, fr, _axis_label(fig.axis_template, a + 1, eig[a], tau[a]),
          _axis_label(fig.axis_template, b + 1, eig[b], tau[b]))
    for i, lab in enumerate(labels):
        if not keep[i]:
            continue
        x, y = fr.x(scores[i, a]), fr.y(scores[i, b])
        svg.add("circle", cx=x, cy=y, r=4.0, fill=_color(colors[i]), class_="point")
        if fig.show_labels:
            svg.add("text", str(lab), x=x + 6, y=y - 4, class_="point-label")
    for lab, (x, y) in zip(sup, sup_xy):
        px, py = fr.x(x), fr.y(y)
        svg.add("rect", x=px - 4, y=py - 4, width=8.0, height=8.0, fill="none", stroke=SUPPLEMENTARY_COLOR,
                class_="supplementary-point")
        if fig.show_labels:
            svg.add("text", str(lab), x=px + 6, y=py - 4, font_style="italic", class_="point-label")
    return svg.render()


def _contribution_bars(fig, model):
    if isinstance(model, ContributionTable):
        table = model
    elif isinstance(model, CAModel):
        table = contributions(model, fig.side)
    elif isinstance(model, LatentPair):
        table = salience_contributions(model, "x" if fig.side in ("row", "x") else "y")
    else:
        raise TypeError(f"cannot draw contributions for {type(model).__name__}")
    _require_dims(table.signed.shape[1], fig.dims[:1])
    d = fig.dims[0] - 1
    values = table.signed[:, d]
    idx = np.flatnonzero(table.mask[:, d]) if fig.important_only else np.arange(values.size)
    colors = _color_indices(fig.colors, values.size)
    svg = _Svg(width=max(WIDTH, 40 + 22 * len(idx)))
    _title(svg, fig.title)
    t = table.threshold
    fr = _Frame((-0.5, max(len(idx), 1) - 0.5), _limits(values[idx], [t, -t]), width=svg.width)
    _axes(svg, fr, "", f"Signed contribution, dimension {d + 1}")
    bw = 0.8 * fr.sx
    for pos, i in enumerate(idx):
        v = values[i]
        top = fr.y(max(v, 0.0))
        svg.add("rect", x=fr.x(pos) - bw / 2, y=top, width=bw, height=abs(fr.y(v) - fr.y(0)),
                fill=_color(colors[i]), class_="contribution-bar")
        ty = fr.y(0) + (12 if v >= 0 else -6)
        svg.add("text", str(table.labels[i]), x=fr.x(pos), y=ty, text_anchor="end",
                transform=f"rotate(-60 {_n(fr.x(pos))} {_n(ty)})", font_size=9, class_="bar-label")
    for s in (t, -t):
        svg.add("line", x1=float(fr.x0), y1=fr.y(s), x2=float(fr.x1), y2=fr.y(s), stroke="#D55E00",
                stroke_dasharray="4 3", class_="threshold-line")
    return svg.render()


def _mfa_partial_map(fig, model):
    if not isinstance(model, MFAModel):
        raise TypeError("mfa-partial-map needs an MFAModel")
    _require_dims(model.n_dims, fig.dims)
    a, b = fig.dims[0] - 1, fig.dims[1] - 1
    eig, tau = _eigen_tau(model)
    colors = _color_indices(fig.colors, len(model.row_labels))
    svg = _Svg()
    _title(svg, fig.title)
    fr = _Frame(_limits(model.F[:, a], model.partial[:, :, a]), _limits(model.F[:, b], model.partial[:, :, b]),
                equal=True)
    _axes(svg, fr, _axis_label(fig.axis_template, a + 1, eig[a], tau[a]),
          _axis_label(fig.axis_template, b + 1, eig[b], tau[b]))
    dashes = (None, "4 2", "1 2", "6 2 1 2")
    for i, lab in enumerate(model.row_labels):
        cx, cy = fr.x(model.F[i, a]), fr.y(model.F[i, b])
        col = _color(colors[i])
        for k in range(model.partial.shape[0]):
            px, py = fr.x(model.partial[k, i, a]), fr.y(model.partial[k, i, b])
            svg.add("line", x1=cx, y1=cy, x2=px, y2=py, stroke=col, stroke_dasharray=dashes[k % len(dashes)],
                    class_="partial-segment")
            svg.add("circle", cx=px, cy=py, r=2.5, fill=col, fill_opacity=0.6,
                    class_=f"partial-point block-{k}")
        _diamond(svg, cx, cy, 5.0, col, "compromise-point")
        if fig.show_labels:
            svg.add("text", str(lab), x=cx + 7, y=cy - 5, class_="point-label")
    for k, bid in enumerate(model.block_ids):
        y = float(MARGIN["top"] + 14 + 14 * k)
        svg.add("line", x1=float(WIDTH - 150), y1=y - 4, x2=float(WIDTH - 125), y2=y - 4, stroke="#000000",
                stroke_dasharray=dashes[k % len(dashes)], class_="legend")
        svg.add("text", str(bid), x=float(WIDTH - 120), y=y, class_="legend")
    return svg.render()


def _mds_ellipse_map(fig, model):
    if not isinstance(model, MDSModel):
        raise TypeError("mds-ellipse-map needs an MDSModel")
    _require_dims(model.n_dims, fig.dims)
    a, b = fig.dims[0] - 1, fig.dims[1] - 1
    eig, tau = _eigen_tau(model)
    groups = list(fig.colors) if fig.colors is not None else list(model.groups) or ["all"] * len(model.labels)
    colors = _color_indices(groups, len(model.labels))
    gindex = {g: c for g, c in zip(groups, colors)}
    means = group_means(model.scores[:, [a, b]], groups)
    svg = _Svg()
    _title(svg, fig.title)
    fr = _Frame(_limits(model.scores[:, a]), _limits(model.scores[:, b]), equal=True)
    _axes(svg, fr, _axis_label(fig.axis_template, a + 1, eig[a], tau[a]),
          _axis_label(fig.axis_template, b + 1, eig[b], tau[b]))
    for i in range(len(model.labels)):
        svg.add("circle", cx=fr.x(model.scores[i, a]), cy=fr.y(model.scores[i, b]), r=2.5,
                fill=_color(colors[i]), fill_opacity=0.5, class_="point")
    for g, m in means.items():
        col = _color(gindex[g])
        e = fig.ellipses.get(g)
        if isinstance(e, ConfidenceEllipse):
            cx, cy = fr.x(e.center[0]), fr.y(e.center[1])
            deg = -np.degrees(e.angle)
            svg.add("ellipse", cx=cx, cy=cy, rx=float(e.semi_axes[0] * fr.sx), ry=float(e.semi_axes[1] * fr.sy),
                    transform=f"rotate({_n(deg)} {_n(cx)} {_n(cy)})", fill=col, fill_opacity=0.25,
                    stroke=col, class_="confidence-ellipse")
        svg.add("circle", cx=fr.x(m[0]), cy=fr.y(m[1]), r=5.0, fill=col, stroke="#000000", class_="group-mean")
        svg.add("text", str(g), x=fr.x(m[0]) + 8, y=fr.y(m[1]) - 6, font_weight="bold", class_="group-label")
    return svg.render()


def _latent_pair_map(fig, model):
    if not isinstance(model, LatentPair):
        raise TypeError("latent-pair-map needs a LatentPair")
    _require_dims(model.n_dims, fig.dims[:1])
    d = fig.dims[0] - 1
    eig, tau = _eigen_tau(model)
    x, y = model.Lx[:, d], model.Ly[:, d]
    colors = _color_indices(fig.colors, len(model.rows))
    svg = _Svg()
    _title(svg, fig.title)
    fr = _Frame(_limits(x), _limits(y))
    lab = f"LV {d + 1}, λ = {eig[d]:.4g}, τ = {100 * tau[d]:.2f}%"
    _axes(svg, fr, f"{lab} (X)", f"{lab} (Y)")
    for c in sorted(set(colors)):
        members = [i for i, ci in enumerate(colors) if ci == c]
        hull = convex_hull(np.column_stack([x[members], y[members]]))
        if len(hull) >= 3:
            svg.add("polygon", points=" ".join(f"{_n(fr.x(p))},{_n(fr.y(q))}" for p, q in hull),
                    fill=_color(c), fill_opacity=0.15, stroke=_color(c), class_="tolerance-hull")
    for i, name in enumerate(model.rows):
        px, py = fr.x(x[i]), fr.y(y[i])
        svg.add("circle", cx=px, cy=py, r=4.0, fill=_color(colors[i]), class_="point")
        if fig.show_labels:
            svg.add("text", str(name), x=px + 6, y=py - 4, class_="point-label")
    return svg.render()


_RENDERERS = {
    "scree": _scree,
    "factor-map": _factor_map,
    "contribution-bars": _contribution_bars,
    "mfa-partial-map": _mfa_partial_map,
    "mds-ellipse-map": _mds_ellipse_map,
    "latent-pair-map": _latent_pair_map,
}


def render(fig: FigureSpec, model) -> str:
    """Render ``model`` as an SVG document according to ``fig``."""
    return _RENDERERS[fig.kind](fig, model)
