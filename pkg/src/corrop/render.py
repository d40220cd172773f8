"""SVG heatmaps of nodal fields, for eyeballing states and minimizers."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

# anchor colors interpolated into the fixed 256-step ramp
_ANCHORS = np.array(
    [
        (68, 1, 84),
        (71, 44, 122),
        (59, 81, 139),
        (44, 113, 142),
        (33, 144, 141),
        (39, 173, 129),
        (92, 200, 99),
        (170, 220, 50),
        (253, 231, 37),
    ],
    dtype=float,
)


def color_ramp() -> np.ndarray:
    """(256, 3) integer RGB table."""
    t = np.linspace(0.0, 1.0, 256)
    src = np.linspace(0.0, 1.0, len(_ANCHORS))
    ramp = np.stack([np.interp(t, src, _ANCHORS[:, k]) for k in range(3)], axis=1)
    return np.clip(np.round(ramp), 0, 255).astype(int)


def field_to_svg(mesh: Mesh, values: np.ndarray, size: int = 640) -> str:
    """Per-element fill from the element-average value; extrema annotated."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.num_nodes,):
        raise ValueError("value count does not match the mesh")
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin
    ramp = color_ramp()

    elem_vals = values[mesh.elements].mean(axis=1)
    if span > 0.0:
        idx = np.clip(((elem_vals - vmin) / span * 255).astype(int), 0, 255)
    else:
        idx = np.zeros(len(elem_vals), dtype=int)

    margin = 10
    scale = size - 2 * margin

    def to_px(pt):
        # flip y so the drawing matches the usual orientation
        return margin + pt[0] * scale, margin + (1.0 - pt[1]) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 28}" '
        f'viewBox="0 0 {size} {size + 28}">'
    ]
    for elem, ci in zip(mesh.elements, idx):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (to_px(mesh.nodes[i]) for i in elem))
        r, g, b = ramp[ci]
        parts.append(f'<polygon points="{pts}" fill="rgb({r},{g},{b})" stroke="none"/>')
    parts.append(
        f'<text x="{margin}" y="{size + 18}" font-family="monospace" font-size="14">'
        f"min={vmin!r} max={vmax!r}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_field(mesh: Mesh, values: np.ndarray, svg_path, csv_path=None, size: int = 640) -> None:
    Path(svg_path).write_text(field_to_svg(mesh, values, size))
    if csv_path is not None:
        lines = ["x,y,value"]
        lines += [f"{float(x)!r},{float(y)!r},{float(v)!r}" for (x, y), v in zip(mesh.nodes, values)]
        Path(csv_path).write_text("\n".join(lines) + "\n")
