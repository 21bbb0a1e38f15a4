"""Writers for run artifacts: YAML reports, CSV tables and ternary SVG plots."""

from __future__ import annotations

import dataclasses
import io
from pathlib import Path

import numpy as np
import yaml

from .dynamics import ControlSchedule, Trajectory
from .reachability import PointCloud

FLOAT_FMT = "%.17g"


def coord_names(sizes, prefix: str = "x") -> list[str]:
    return [f"{prefix}{i + 1}_{a + 1}" for i, n in enumerate(sizes) for a in range(n)]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


def csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    rows = zip(*columns) if columns else []
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _cols(arr: np.ndarray) -> list[np.ndarray]:
    return [arr[:, j] for j in range(arr.shape[1])]


def trajectory_csv(traj: Trajectory, dual: bool = False) -> str:
    header = ["t"] + coord_names(traj.sizes)
    cols = [traj.times] + _cols(traj.primal)
    if dual:
        if traj.dual is None:
            raise ValueError("trajectory carries no dual states")
        header += coord_names(traj.sizes, "z")
        cols += _cols(traj.dual)
    return csv_text(header, cols)


def cloud_csv(cloud: PointCloud) -> str:
    header = ["start_idx", "u_idx", "t_idx", "t"] + coord_names(cloud.sizes)
    cols = [cloud.start_idx, cloud.u_idx, cloud.t_idx, cloud.times] + _cols(cloud.points)
    return csv_text(header, cols)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]]).reshape(-1, len(header))
    return header, data


# -- ternary SVG -------------------------------------------------------------------------

SVG_SIZE = 400.0
SVG_PAD = 20.0


def ternary_xy(points: np.ndarray, size: float = SVG_SIZE, pad: float = SVG_PAD) -> np.ndarray:
    """Barycentric ``(a, b, c)`` to SVG coordinates of an equilateral triangle.

    Vertex 1 sits bottom left, vertex 2 bottom right and vertex 3 on top.
    """
    side = size - 2 * pad
    height = side * np.sqrt(3.0) / 2.0
    verts = np.array([[pad, pad + height], [pad + side, pad + height], [pad + side / 2.0, pad]])
    return np.asarray(points, dtype=float) @ verts


def ternary_svg(points: np.ndarray, starts: np.ndarray | None = None, title: str = "") -> str:
    """Scatter of simplex points as 1.5px circles; duplicates at 0.1px are dropped."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("ternary plots need 3-action strategies")
    xy = np.unique(np.round(ternary_xy(pts), 1), axis=0)
    tri = ternary_xy(np.eye(3))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE:g}" height="{SVG_SIZE:g}" '
        f'viewBox="0 0 {SVG_SIZE:g} {SVG_SIZE:g}">',
        f"<title>{title}</title>",
        '<polygon points="{}" fill="none" stroke="black" stroke-width="1"/>'.format(
            " ".join(f"{x:.2f},{y:.2f}" for x, y in tri)
        ),
        '<g fill="steelblue" fill-opacity="0.6">',
    ]
    out += [f'<circle cx="{x:.1f}" cy="{y:.1f}" r="1.5"/>' for x, y in xy]
    out.append("</g>")
    if starts is not None:
        out.append('<g fill="crimson">')
        out += [f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3"/>' for x, y in ternary_xy(starts)]
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- reports ------------------------------------------------------------------------------


def plain(obj):
    """Recursively convert dataclasses and numpy values to YAML-safe builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, ControlSchedule):
        return [{"u": plain(u), "duration": float(t)} for u, t in obj.segments]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dump_report(doc: dict) -> str:
    return yaml.safe_dump(plain(doc), sort_keys=False, default_flow_style=None, width=100)


def write_text(path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p
