"""Two-column CSV series and minimal SVG line charts."""

import os


class Series:
    """Named (x, y) series; rows are written in the order given."""

    def __init__(self, name, xlabel, ylabel, x, y):
        if len(x) != len(y):
            raise ValueError("x and y lengths differ")
        self.name = name
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.x = list(x)
        self.y = list(y)


def _svg(series, width=480, height=320, pad=40):
    if series.x:
        xmin, xmax = min(series.x), max(series.x)
        ymin, ymax = min(series.y), max(series.y)
        xspan = (xmax - xmin) or 1.0
        yspan = (ymax - ymin) or 1.0
        pts = " ".join(
            f"{pad + (x - xmin) / xspan * (width - 2 * pad):.2f},"
            f"{height - pad - (y - ymin) / yspan * (height - 2 * pad):.2f}"
            for x, y in zip(series.x, series.y))
        poly = (f'<polyline fill="none" stroke="#1f6fb2" stroke-width="1.5" '
                f'points="{pts}"/>')
    else:
        poly = ""
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}">'
            f'<rect width="{width}" height="{height}" fill="white"/>'
            f'<text x="{width // 2}" y="16" text-anchor="middle" '
            f'font-size="12">{series.name}: {series.ylabel} vs '
            f'{series.xlabel}</text>{poly}</svg>\n')


def emit_plotdata(series_list, outdir):
    """Write <name>.csv and <name>.svg per series; returns the file paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for s in series_list:
        csv_path = os.path.join(outdir, f"{s.name}.csv")
        with open(csv_path, "w") as fh:
            fh.write(f"{s.xlabel},{s.ylabel}\n")
            for x, y in zip(s.x, s.y):
                fh.write(f"{x!r},{y!r}\n")
        svg_path = os.path.join(outdir, f"{s.name}.svg")
        with open(svg_path, "w") as fh:
            fh.write(_svg(s))
        paths.extend([csv_path, svg_path])
    return paths
