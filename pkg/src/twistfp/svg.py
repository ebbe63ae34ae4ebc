"""Deterministic SVG emission for curve scenes.

A scene is an ordered list of layers (polylines and point markers) drawn in
a fixed viewport; emission is a pure function of the scene with 6-decimal
coordinates, so identical scenes produce identical bytes.
"""

from dataclasses import dataclass, field

_STYLE = """\
    .curve { fill: none; stroke: #1f5fbf; stroke-width: 1.2; }
    .image { fill: none; stroke: #c23b22; stroke-width: 1.2; }
    .path { fill: none; stroke: #e8b800; stroke-width: 1.8; }
    .path-image { fill: none; stroke: #7d3bc2; stroke-width: 1.4; }
    .aux { fill: none; stroke: #999999; stroke-width: 0.8; stroke-dasharray: 3 2; }
    .point { fill: #000000; stroke: none; }
    .marker { fill: #c23b22; stroke: none; }
"""


@dataclass
class SvgScene:
    """Layered polylines and points in data coordinates.

    window = (xmin, xmax, ymin, ymax); defaults to the unit square used for
    annulus figures. Layers render in insertion order.
    """

    window: tuple = (0.0, 1.0, 0.0, 1.0)
    width: int = 720
    height: int = 480
    layers: list = field(default_factory=list)

    def add_polyline(self, pts, css_class="curve", closed=False):
        self.layers.append(("polyline", css_class, [tuple(p) for p in pts], closed))

    def add_points(self, pts, css_class="point", radius=2.0):
        self.layers.append(("points", css_class, [tuple(p) for p in pts], radius))


def _tx(scene):
    x0, x1, y0, y1 = scene.window
    sx = scene.width / (x1 - x0)
    sy = scene.height / (y1 - y0)

    def f(p):
        return ((p[0] - x0) * sx, (y1 - p[1]) * sy)

    return f


def render_svg(scene):
    """Render a scene to an SVG string (byte-deterministic)."""
    f = _tx(scene)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{scene.width}" '
        f'height="{scene.height}" viewBox="0 0 {scene.width} {scene.height}">',
        "  <style>",
        _STYLE.rstrip(),
        "  </style>",
    ]
    for layer in scene.layers:
        if layer[0] == "polyline":
            _, cls, pts, closed = layer
            if not pts:
                continue
            coords = " L ".join(f"{x:.6f},{y:.6f}" for x, y in map(f, pts))
            z = " Z" if closed else ""
            out.append(f'  <path class="{cls}" d="M {coords}{z}"/>')
        else:
            _, cls, pts, radius = layer
            for p in pts:
                x, y = f(p)
                out.append(f'  <circle class="{cls}" cx="{x:.6f}" cy="{y:.6f}" '
                           f'r="{radius:.6f}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(scene, path):
    """Write a scene to disk; same scene, same bytes."""
    data = render_svg(scene)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
    return path


def scene_invariant_curves(inv, m=None, n_image=512, window=(0.0, 1.0, 0.0, 1.0)):
    """Curves (blue), their images (red), and fixed-point markers (black)."""
    scene = SvgScene(window=window)
    for comp in inv.components:
        scene.add_polyline(comp.vertices, "curve", closed=False)
    if m is not None:
        for comp in inv.components:
            pts = comp.vertices[:: max(1, comp.n // n_image)]
            img = [m.eval(p[0], p[1]) for p in pts]
            scene.add_polyline(img, "image", closed=False)
    return scene
