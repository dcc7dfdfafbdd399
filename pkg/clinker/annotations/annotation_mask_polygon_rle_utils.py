"""
Conversions between binary masks, boundary polygons and COCO run lengths.

Polygons live on pixel corners: pixel (x, y) is the unit square
[x, x + 1] x [y, y + 1]. Rasterization samples pixel centres with the
even-odd rule, so traced polygons rasterize back to their mask exactly.
"""
import logging

import numpy as np
from scipy import ndimage

from clinker.annotations.annotation_instance_types import Polygon, RleCounts
from clinker.clinker_job_errors import AnnotationError
from clinker.raster.raster_pixel_grid_types import BBox, BinaryMask

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Pixel-corner edges of a foreground pixel whose neighbour across the edge is
# background, oriented so the pixel lies on the right-hand side when y points down.
_TOP, _RIGHT, _BOTTOM, _LEFT = (1, 0), (0, 1), (-1, 0), (0, -1)


def connected_components(bits):
    """8-connected labelling; labels follow the raster order of each component's first pixel."""
    labeled, count = ndimage.label(np.asarray(bits, dtype=bool), structure=EIGHT_CONNECTED)
    return labeled, int(count)


def mask_bbox(mask):
    bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(bits.any(axis=1))
    cols = np.flatnonzero(bits.any(axis=0))
    if rows.size == 0:
        raise AnnotationError("Cannot take the bounding box of an empty mask")
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def rle_encode(mask):
    flat = mask.bits.ravel(order="F").astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return RleCounts(width=mask.width, height=mask.height, counts=tuple(runs))


def rle_decode(rle):
    counts = np.asarray(rle.counts, dtype=np.int64)
    total = rle.width * rle.height
    if counts.size == 0 or (counts < 0).any():
        raise AnnotationError("RLE counts must be a non-empty list of non-negative integers")
    if (counts[1:] == 0).any():
        raise AnnotationError("Only the first RLE count may be zero")
    if int(counts.sum()) != total:
        raise AnnotationError(f"RLE counts sum to {int(counts.sum())}, expected {rle.width}x{rle.height}={total}")
    values = np.repeat(np.arange(counts.size) % 2, counts).astype(bool)
    return BinaryMask(values.reshape((rle.height, rle.width), order="F"))


def _boundary_edges(component):
    """Outgoing boundary edge directions keyed by their start corner."""
    padded = np.pad(component, 1)
    fg = padded[1:-1, 1:-1]
    outgoing = {}
    sides = (
        (_TOP, fg & ~padded[:-2, 1:-1], (0, 0)),
        (_RIGHT, fg & ~padded[1:-1, 2:], (1, 0)),
        (_BOTTOM, fg & ~padded[2:, 1:-1], (1, 1)),
        (_LEFT, fg & ~padded[1:-1, :-2], (0, 1)),
    )
    for direction, exposed, (ox, oy) in sides:
        ys, xs = np.nonzero(exposed)
        for x, y in zip((xs + ox).tolist(), (ys + oy).tolist()):
            outgoing.setdefault((x, y), []).append(direction)
    return outgoing


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _next_direction(options, incoming):
    if len(options) == 1:
        return options[0]
    # Pinch corner shared by two diagonal pixels: turn so the diagonal pixels stay on one loop.
    for direction in options:
        if _cross(incoming, direction) == -1:
            return direction
    return options[0]


def _trace_loops(component):
    outgoing = _boundary_edges(component)
    loops = []
    for start in sorted(outgoing, key=lambda v: (v[1], v[0])):
        while outgoing.get(start):
            first = outgoing[start].pop(0)
            vertices = [start]
            directions = [first]
            x, y = start[0] + first[0], start[1] + first[1]
            incoming = first
            while True:
                options = outgoing.get((x, y), [])
                if (x, y) == start:
                    chosen = _next_direction(options + [first], incoming)
                    if chosen == first:
                        break
                else:
                    chosen = _next_direction(options, incoming)
                options.remove(chosen)
                vertices.append((x, y))
                directions.append(chosen)
                x, y = x + chosen[0], y + chosen[1]
                incoming = chosen
            loops.append(_merge_collinear(vertices, directions))
    return loops


def _merge_collinear(vertices, directions):
    """Keeps only the corners where the boundary turns."""
    corners = [vertices[i] for i in range(len(vertices)) if directions[i] != directions[i - 1]]
    lowest = min(range(len(corners)), key=lambda i: (corners[i][1], corners[i][0]))
    return corners[lowest:] + corners[:lowest]


def mask_to_polygons(mask):
    """
    Traces the pixel-corner boundary of every 8-connected foreground component.

    Components are visited in raster order of their first pixel. Each yields its
    outer boundary (positive area) followed by its holes (negative area).
    """
    labeled, count = connected_components(mask.bits)
    polygons = []
    for index, window in enumerate(ndimage.find_objects(labeled), start=1):
        if window is None:
            continue
        component = labeled[window] == index
        oy, ox = window[0].start, window[1].start
        loops = [Polygon(tuple((x + ox, y + oy) for x, y in loop)) for loop in _trace_loops(component)]
        polygons.extend(sorted(loops, key=lambda polygon: polygon.signed_area() < 0))
    logger.debug(f"Traced {len(polygons)} polygon(s) from {count} component(s)")
    return polygons


def polygon_to_mask(polys, width, height):
    """
    Even-odd rasterization of a polygon set at pixel centres.

    Rows are scanned at y + 0.5; a centre is inside when an odd number of edge
    crossings lies strictly to its left.
    """
    bits = np.zeros((height, width), dtype=bool)
    starts, ends = [], []
    for polygon in polys:
        if abs(polygon.signed_area()) == 0.0:
            raise AnnotationError(f"Degenerate polygon with zero area: {list(polygon.vertices)}")
        xy = np.asarray(polygon.vertices)
        starts.append(xy)
        ends.append(np.roll(xy, -1, axis=0))
    if not starts:
        return BinaryMask(bits)
    start = np.concatenate(starts)
    end = np.concatenate(ends)
    x0, y0, x1, y1 = start[:, 0], start[:, 1], end[:, 0], end[:, 1]
    centres = np.arange(width) + 0.5
    first_row = max(int(np.floor(min(y0.min(), y1.min()))), 0)
    last_row = min(int(np.ceil(max(y0.max(), y1.max()))), height)
    for row in range(first_row, last_row):
        yc = row + 0.5
        crossing = (y0 <= yc) != (y1 <= yc)
        if not crossing.any():
            continue
        t = (yc - y0[crossing]) / (y1[crossing] - y0[crossing])
        xs = np.sort(x0[crossing] + t * (x1[crossing] - x0[crossing]))
        bits[row] = np.searchsorted(xs, centres, side="left") % 2 == 1
    return BinaryMask(bits)
