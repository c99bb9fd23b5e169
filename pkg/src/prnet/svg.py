"""Minimal, byte-stable SVG charts (no plotting library, no timestamps)."""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60


def _f(v):
    return f"{v:.2f}"


def _frame(title, body, width=W, height=H):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>\n'
        + "".join(body)
        + "</svg>\n"
    )


def _y_axis(lo, hi, label, ticks=5):
    plot_h = H - TOP - BOTTOM
    out = [f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>\n']
    for i in range(ticks + 1):
        v = lo + (hi - lo) * i / ticks
        y = H - BOTTOM - plot_h * i / ticks
        out.append(f'<line x1="{LEFT - 4}" y1="{_f(y)}" x2="{LEFT}" y2="{_f(y)}" stroke="black"/>'
                   f'<text x="{LEFT - 8}" y="{_f(y + 4)}" text-anchor="end">{v:.2f}</text>\n')
    out.append(f'<text x="18" y="{(TOP + H - BOTTOM) / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(TOP + H - BOTTOM) / 2:.0f})">{escape(label)}</text>\n')
    return out


def line_chart(xs, ys, title, xlabel, ylabel, errors=None, mark_max=True) -> str:
    """Points placed at evenly spaced categorical x positions, one tick per x value."""
    n = len(xs)
    if n == 0:
        raise ValueError("line chart needs at least one point")
    errors = errors or [0.0] * n
    lo = min(0.0, min(y - e for y, e in zip(ys, errors)))
    hi = max(1.0, max(y + e for y, e in zip(ys, errors)))
    plot_w = W - LEFT - RIGHT
    plot_h = H - TOP - BOTTOM

    def px(i):
        return LEFT + plot_w * (i + 0.5) / n

    def py(v):
        return H - BOTTOM - plot_h * (v - lo) / (hi - lo)

    body = _y_axis(lo, hi, ylabel)
    body.append(f'<line class="axis" x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>\n')
    for i, x in enumerate(xs):
        body.append(f'<g class="xtick"><line x1="{_f(px(i))}" y1="{H - BOTTOM}" x2="{_f(px(i))}" '
                    f'y2="{H - BOTTOM + 4}" stroke="black"/><text x="{_f(px(i))}" y="{H - BOTTOM + 18}" '
                    f'text-anchor="middle">{escape(str(x))}</text></g>\n')
    body.append(f'<text x="{(LEFT + W - RIGHT) / 2:.0f}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>\n')
    points = " ".join(f"{_f(px(i))},{_f(py(y))}" for i, y in enumerate(ys))
    body.append(f'<polyline points="{points}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>\n')
    for i, (y, e) in enumerate(zip(ys, errors)):
        if e > 0:
            body.append(f'<line x1="{_f(px(i))}" y1="{_f(py(y - e))}" x2="{_f(px(i))}" y2="{_f(py(y + e))}" '
                        f'stroke="{PALETTE[0]}"/>\n')
        body.append(f'<circle cx="{_f(px(i))}" cy="{_f(py(y))}" r="3.5" fill="{PALETTE[0]}"/>\n')
    if mark_max:
        best = max(range(n), key=lambda i: (ys[i], -i))
        body.append(f'<circle class="maximum" cx="{_f(px(best))}" cy="{_f(py(ys[best]))}" r="8" fill="none" '
                    f'stroke="{PALETTE[3]}" stroke-width="2"/>\n'
                    f'<text x="{_f(px(best))}" y="{_f(py(ys[best]) - 12)}" text-anchor="middle" '
                    f'fill="{PALETTE[3]}">max {ys[best]:.3f} at {escape(str(xs[best]))}</text>\n')
    return _frame(title, body)


def grouped_bar_chart(groups, series, values, title, ylabel) -> str:
    """``values[g][s]`` drawn as bars; groups along x, one colour per series. None is skipped."""
    if not groups or not series:
        raise ValueError("bar chart needs at least one group and one series")
    plot_w = W - LEFT - RIGHT
    plot_h = H - TOP - BOTTOM
    finite = [v for row in values for v in row if v is not None]
    lo, hi = 0.0, max([1.0] + finite)
    slot = plot_w / len(groups)
    bar = slot * 0.8 / len(series)
    body = _y_axis(lo, hi, ylabel)
    body.append(f'<line class="axis" x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>\n')
    for g, name in enumerate(groups):
        x0 = LEFT + slot * g + slot * 0.1
        for s in range(len(series)):
            v = values[g][s]
            if v is None:
                continue
            h = plot_h * (v - lo) / (hi - lo)
            body.append(f'<rect x="{_f(x0 + bar * s)}" y="{_f(H - BOTTOM - h)}" width="{_f(bar)}" '
                        f'height="{_f(h)}" fill="{PALETTE[s % len(PALETTE)]}"/>\n')
        body.append(f'<text x="{_f(LEFT + slot * (g + 0.5))}" y="{H - BOTTOM + 18}" text-anchor="middle">'
                    f'{escape(str(name))}</text>\n')
    for s, name in enumerate(series):
        y = TOP + 14 * s
        body.append(f'<rect x="{W - RIGHT - 110}" y="{y}" width="10" height="10" fill="{PALETTE[s % len(PALETTE)]}"/>'
                    f'<text x="{W - RIGHT - 95}" y="{y + 9}">{escape(str(name))}</text>\n')
    return _frame(title, body)
