import logging
from pathlib import Path

import numpy as np
from matplotlib.collections import PolyCollection

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.clinker_output_files_utils import (
    dump_json_text, read_json, svg_figure, write_svg_atomic, write_text_atomic)
from clinker.mesh.mesh_boundary_nodes_conforming_delaunay import TriMesh
from clinker.raster.raster_pixel_grid_types import PhaseLabel

logger = logging.getLogger(__name__)

MESH_FORMATS = ("node-ele", "json", "both")
LABEL_RULES = ("centroid", "majority")
MESH_JSON_FORMAT = "clinker-mesh"
MESH_JSON_VERSION = 1
# matrix drawn blue between the particles
MESH_SVG_COLOURS = {PhaseLabel.OTHER: "#3a6fd8", PhaseLabel.ALITE: "#d8453a", PhaseLabel.BELITE: "#f2c230"}


def _centroid_pixels(mesh, width, height):
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    xs = np.clip(np.floor(centroids[:, 0]).astype(np.int64), 0, width - 1)
    ys = np.clip(np.floor(centroids[:, 1]).astype(np.int64), 0, height - 1)
    return xs, ys


def _majority_phase(corners, labels):
    """Most frequent phase over the pixel centres inside a triangle, ties to the lower code."""
    lo = np.clip(np.floor(corners.min(axis=0)).astype(int), 0, [labels.width - 1, labels.height - 1])
    hi = np.clip(np.ceil(corners.max(axis=0)).astype(int), 0, [labels.width, labels.height])
    ys, xs = np.mgrid[lo[1]:hi[1], lo[0]:hi[0]]
    px, py = xs.ravel() + 0.5, ys.ravel() + 0.5
    (ax, ay), (bx, by), (cx, cy) = corners
    det = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy)
    if det == 0 or px.size == 0:
        return None
    l1 = ((by - cy) * (px - cx) + (cx - bx) * (py - cy)) / det
    l2 = ((cy - ay) * (px - cx) + (ax - cx) * (py - cy)) / det
    inside = (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
    if not inside.any():
        return None
    votes = np.bincount(labels.labels[ys.ravel()[inside], xs.ravel()[inside]], minlength=len(PhaseLabel))
    return int(np.argmax(votes))


def label_triangles(mesh, labels, rule="centroid"):
    """
    Phase of every triangle read from a label map.

    ``centroid`` takes the label of the pixel holding the triangle centroid,
    clamped to the image. ``majority`` votes over the pixel centres inside the
    triangle and falls back to the centroid pixel for triangles covering none.
    """
    if rule not in LABEL_RULES:
        raise ParameterError(f"Unknown labelling rule '{rule}', expected one of {LABEL_RULES}")
    xs, ys = _centroid_pixels(mesh, labels.width, labels.height)
    phases = labels.labels[ys, xs].astype(np.uint8)
    if rule == "majority":
        for t, triangle in enumerate(mesh.triangles):
            voted = _majority_phase(mesh.nodes[triangle], labels)
            if voted is not None:
                phases[t] = voted
    logger.info(f"Labelled {len(phases)} triangle(s) by {rule}")
    return mesh.with_phases(phases)


def phase_area_fractions(mesh):
    areas = mesh.triangle_areas()
    total = areas.sum()
    return {phase: float(areas[mesh.phases == phase].sum() / total) if total else 0.0 for phase in PhaseLabel}


def _check_exportable(mesh):
    if len(mesh.triangles) == 0:
        raise DataError("Refusing to export an empty mesh")


def _node_text(mesh):
    # marker 1 flags nodes on a constraint segment
    on_boundary = np.zeros(len(mesh.nodes), dtype=bool)
    on_boundary[mesh.constraints.ravel()] = True
    lines = [f"{len(mesh.nodes)} 2 0 1"]
    lines += [f"{i} {x!r} {y!r} {int(marker)}"
              for i, ((x, y), marker) in enumerate(zip(mesh.nodes.tolist(), on_boundary), start=1)]
    return "\n".join(lines) + "\n"


def _ele_text(mesh):
    lines = [f"{len(mesh.triangles)} 3 1"]
    lines += [f"{i} {a + 1} {b + 1} {c + 1} {int(phase)}"
              for i, ((a, b, c), phase) in enumerate(zip(mesh.triangles.tolist(), mesh.phases), start=1)]
    return "\n".join(lines) + "\n"


def _poly_text(mesh):
    lines = ["0 2 0 1", f"{len(mesh.constraints)} 0"]
    lines += [f"{i} {a + 1} {b + 1}" for i, (a, b) in enumerate(mesh.constraints.tolist(), start=1)]
    lines.append("0")
    return "\n".join(lines) + "\n"


def mesh_document(mesh):
    return {
        "format": MESH_JSON_FORMAT,
        "version": MESH_JSON_VERSION,
        "nodes": mesh.nodes.tolist(),
        "triangles": mesh.triangles.tolist(),
        "phases": [PhaseLabel(int(p)).display_name for p in mesh.phases],
        "constraints": mesh.constraints.tolist(),
    }


def export_mesh(mesh, fmt, path_stem):
    """
    Writes a labelled mesh next to ``path_stem``.

    ``node-ele`` writes ``<stem>.node``, ``<stem>.ele`` and the constraint
    segments as ``<stem>.poly``, all with 1-based indices and the phase code as
    the triangle attribute. ``json`` writes ``<stem>.json``. Coordinates are
    written with full float precision so both re-import exactly.

    :return: list of written paths.
    """
    if fmt not in MESH_FORMATS:
        raise ParameterError(f"Unknown mesh format '{fmt}', expected one of {MESH_FORMATS}")
    _check_exportable(mesh)
    stem = Path(path_stem)
    written = []
    if fmt in ("node-ele", "both"):
        written.append(write_text_atomic(stem.with_suffix(".node"), _node_text(mesh)))
        written.append(write_text_atomic(stem.with_suffix(".ele"), _ele_text(mesh)))
        written.append(write_text_atomic(stem.with_suffix(".poly"), _poly_text(mesh)))
    if fmt in ("json", "both"):
        written.append(write_text_atomic(stem.with_suffix(".json"), dump_json_text(mesh_document(mesh))))
    logger.info(f"Successfully exported a mesh of {len(mesh.triangles)} triangle(s) to {len(written)} file(s)")
    return written


def import_mesh_json(path):
    doc = read_json(path)
    if doc.get("format") != MESH_JSON_FORMAT or doc.get("version") != MESH_JSON_VERSION:
        raise DataError(f"{path} is not a {MESH_JSON_FORMAT} version {MESH_JSON_VERSION} document")
    try:
        phases = [PhaseLabel.from_name(name) for name in doc["phases"]]
        return TriMesh(doc["nodes"], doc["triangles"], phases, doc["constraints"])
    except (KeyError, ValueError) as e:
        raise DataError(f"Malformed mesh document {path}: {e}") from e


def _table_rows(path):
    """Whitespace-split rows of a Triangle-style file without blank and '#' comment lines."""
    try:
        return [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}") from e


def _take_table(rows, columns, path):
    """Splits the count-headed block at the front of ``rows`` into (body, remaining rows)."""
    count = int(rows[0][0]) if rows else 0
    body = rows[1:count + 1]
    if len(body) != count or any(len(row) < columns for row in body):
        raise DataError(f"{path} is truncated or malformed")
    return body, rows[count + 1:]


def _read_table(path, columns):
    return _take_table(_table_rows(path), columns, path)[0]


def _read_poly_segments(path):
    # node block first, normally empty since nodes live in the .node file
    _, rest = _take_table(_table_rows(path), 3, path)
    segments, _ = _take_table(rest, 3, path)
    return [(int(row[1]) - 1, int(row[2]) - 1) for row in segments]


def read_node_ele(path_stem):
    """Reads a ``.node``/``.ele`` pair (and ``.poly`` segments when present) back into a TriMesh."""
    stem = Path(path_stem)
    try:
        nodes = [(float(row[1]), float(row[2])) for row in _read_table(stem.with_suffix(".node"), 3)]
        ele = _read_table(stem.with_suffix(".ele"), 5)
        triangles = [(int(row[1]) - 1, int(row[2]) - 1, int(row[3]) - 1) for row in ele]
        phases = [int(row[4]) for row in ele]
        constraints = []
        if stem.with_suffix(".poly").exists():
            constraints = _read_poly_segments(stem.with_suffix(".poly"))
    except ValueError as e:
        raise DataError(f"Malformed mesh files at {stem}: {e}") from e
    return TriMesh(nodes, triangles, phases, constraints)


def render_mesh_svg(mesh, path, width=None, height=None):
    """Draws the triangles filled by phase with their edges outlined."""
    _check_exportable(mesh)
    width = width or float(mesh.nodes[:, 0].max())
    height = height or float(mesh.nodes[:, 1].max())
    colours = [MESH_SVG_COLOURS[PhaseLabel(int(p))] for p in mesh.phases]
    with svg_figure(figsize=(6, 6 * height / width)) as (figure, axes):
        axes.add_collection(PolyCollection(mesh.nodes[mesh.triangles], facecolors=colours,
                                           edgecolors="black", linewidths=0.2))
        axes.set_xlim(0, width)
        axes.set_ylim(height, 0)
        axes.set_aspect("equal")
        axes.set_axis_off()
        figure.tight_layout()
        return write_svg_atomic(path, figure)
