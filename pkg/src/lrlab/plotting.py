"""Minimal deterministic SVG line plots (no plotting dependency)."""


import numpy as np

WIDTH, HEIGHT, PAD = 640, 420, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def write_svg_lineplot(path, series, xlabel, ylabel, title=""):
    """Write ``series = [(label, x, y), ...]`` as an SVG polyline chart; non-finite points are skipped."""
    pts = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    xs = np.concatenate([x[np.isfinite(x) & np.isfinite(y)] for _, x, y in pts] or [np.zeros(0)])
    ys = np.concatenate([y[np.isfinite(x) & np.isfinite(y)] for _, x, y in pts] or [np.zeros(0)])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return PAD + (v - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def sy(v):
        return HEIGHT - PAD - (v - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
           f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" '
           'stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
           f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
           f'font-size="13">{xlabel}</text>',
           f'<text x="18" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 18 {HEIGHT / 2:.1f})">{ylabel}</text>']
    for v in _ticks(x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{HEIGHT - PAD + 16}" text-anchor="middle" '
                   f'font-size="11">{v:.3g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{PAD - 6}" y="{sy(v) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{v:.3g}</text>')
    for i, (lab, x, y) in enumerate(pts):
        ok = np.isfinite(x) & np.isfinite(y)
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{WIDTH - PAD}" y="{PAD + 16 * i}" text-anchor="end" '
                   f'font-size="12" fill="{color}">{lab}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def emit_plot_data(result, path, fmt="csv"):
    """Write a scan result as CSV (canonical) or as an SVG line plot."""
    from .cli import write_csv
    from .errors import InvalidArgument
    from . import lab

    if fmt not in ("csv", "svg-lineplot"):
        raise InvalidArgument(f"unknown plot format {fmt!r}")
    if isinstance(result, lab.ConeScanResult):
        header, series = ["t", "r", "value"], [("r*(t)", result.times, result.r_star)]
        labels = ("t", "r*")
    elif isinstance(result, lab.CauchyScanResult):
        pos = result.differences > 0
        header = ["t", "k", "value"]
        series = [("ln diff", np.log1p(result.k_list[pos]), np.log(result.differences[pos]))]
        labels = ("ln(1+k)", "ln ||difference||")
    elif isinstance(result, lab.GrowthScanResult):
        header, series = ["t", "nu", "value"], [("ln N(t)", result.times, result.log_norms)]
        labels = ("t", "ln ||alpha_t A||_nu")
    elif isinstance(result, lab.RadiusScanResult):
        header, series = ["t", "delta", "value"], [("r(t)", result.times, result.radii)]
        labels = ("t", "r")
    else:
        raise InvalidArgument("unsupported result type")
    if fmt == "csv":
        return write_csv(path, header, result.rows())
    return write_svg_lineplot(path, series, *labels)



