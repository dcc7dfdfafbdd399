"""
Boundary node placement and conforming Delaunay refinement.

The refinement keeps a Delaunay triangulation of a growing point set
(rebuilt with scipy.spatial.Delaunay on every pass) and adds Steiner points
until every constraint segment is a chain of mesh edges that no mesh node
encroaches, and no triangle has an angle below the requested bound.
Coordinates are snapped to a 2**-20 pixel grid so reruns are bit-identical.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from clinker.clinker_job_errors import CrossingConstraintsError, MeshRefinementError, ParameterError

logger = logging.getLogger(__name__)

SNAP = 2.0 ** 20
EPSILON = 1e-9
MIN_EDGE_LENGTH = 2.0 ** -12
MAX_MIN_ANGLE = 34.0
SHELL_INPUT_ANGLE = 60.0
DEFAULT_MAX_INSERTIONS = 10 ** 6


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Phase-labelled triangle mesh.

    ``nodes`` is (N, 2) float x/y in pixel units, ``triangles`` (T, 3) node
    indices in counter-clockwise order, ``phases`` (T,) PhaseLabel codes and
    ``constraints`` (S, 2) node indices of the constraint segments.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    phases: np.ndarray
    constraints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=np.uint8).reshape(-1))
        object.__setattr__(self, "constraints", np.asarray(self.constraints, dtype=np.int64).reshape(-1, 2))
        if self.phases.shape[0] != self.triangles.shape[0]:
            raise ParameterError("A mesh needs exactly one phase per triangle")

    def with_phases(self, phases):
        return TriMesh(self.nodes, self.triangles, phases, self.constraints)

    def triangle_areas(self):
        a, b, c = (self.nodes[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def triangle_angles(self):
        return _triangle_angles(self.nodes, self.triangles)

    def edge_set(self):
        return _edge_keys(self.triangles)

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return all(np.array_equal(getattr(self, name), getattr(other, name))
                   for name in ("nodes", "triangles", "phases", "constraints"))


def snap(points):
    return np.round(np.asarray(points, dtype=np.float64) * SNAP) / SNAP


class _NodeBuilder:
    def __init__(self):
        self.points = []
        self.index = {}

    def add(self, x, y):
        key = (float(x), float(y))
        if key not in self.index:
            self.index[key] = len(self.points)
            self.points.append(key)
        return self.index[key]


def _region_map(instances, width, height):
    """Particle index per pixel, 0 for the matrix; later instances win overlaps."""
    regions = np.zeros((height, width), dtype=np.int64)
    for index, instance in enumerate(instances, start=1):
        bits = instance.region.bits
        if bits.shape != (height, width):
            raise ParameterError(f"Particle {instance.id} mask is {bits.shape[1]}x{bits.shape[0]}, "
                                 f"expected {width}x{height}")
        regions[bits] = index
    return regions


def _boundary_graph(regions):
    """Pixel-corner adjacency of every pixel edge separating two regions, the image outside included."""
    height, width = regions.shape
    padded = np.pad(regions, 1, constant_values=-1)
    horizontal = padded[0:height + 1, 1:width + 1] != padded[1:height + 2, 1:width + 1]
    vertical = padded[1:height + 1, 0:width + 1] != padded[1:height + 1, 1:width + 2]
    adjacency = {}
    hy, hx = np.nonzero(horizontal)
    vy, vx = np.nonzero(vertical)
    edges = [((x, y), (x + 1, y)) for x, y in zip(hx.tolist(), hy.tolist())]
    edges += [((x, y), (x, y + 1)) for x, y in zip(vx.tolist(), vy.tolist())]
    for u, v in edges:
        adjacency.setdefault(u, []).append(v)
        adjacency.setdefault(v, []).append(u)
    for neighbours in adjacency.values():
        neighbours.sort(key=_raster_key)
    return adjacency


def _raster_key(vertex):
    return vertex[1], vertex[0]


@dataclass
class _BoundaryChain:
    """Pixel-corner path between two junctions, or a closed loop, resampled into ``pieces`` segments."""

    vertices: np.ndarray
    closed: bool
    pieces: int = 1

    @property
    def max_pieces(self):
        return len(self.vertices) if self.closed else len(self.vertices) - 1

    def min_pieces(self):
        # a chain leaving and re-entering one junction is a loop too
        if self.closed or np.array_equal(self.vertices[0], self.vertices[-1]):
            return 3
        straight = np.all(self.vertices[:, 0] == self.vertices[0, 0]) or np.all(self.vertices[:, 1] == self.vertices[0, 1])
        return 1 if straight else 2

    def resample(self):
        path = np.vstack([self.vertices, self.vertices[:1]]) if self.closed else self.vertices
        arc = np.arange(len(path), dtype=np.float64)
        length = arc[-1]
        count = self.pieces if self.closed else self.pieces + 1
        positions = np.arange(count) * length / self.pieces
        points = np.column_stack([np.interp(positions, arc, path[:, 0]), np.interp(positions, arc, path[:, 1])])
        if not self.closed:
            points[-1] = path[-1]
        return points


def _trace_chains(adjacency, corners):
    junctions = {v for v, neighbours in adjacency.items() if len(neighbours) != 2} | set(corners)
    used = set()
    chains = []

    def walk(start, first):
        path = [start, first]
        used.add(frozenset((start, first)))
        previous, current = start, first
        while current not in junctions and current != start:
            following = next(v for v in adjacency[current] if v != previous)
            used.add(frozenset((current, following)))
            previous, current = current, following
            path.append(current)
        return path

    for junction in sorted(junctions, key=_raster_key):
        for neighbour in adjacency.get(junction, ()):
            if frozenset((junction, neighbour)) not in used:
                chains.append(_BoundaryChain(np.asarray(walk(junction, neighbour), dtype=np.float64), closed=False))
    for vertex in sorted(adjacency, key=_raster_key):
        for neighbour in adjacency[vertex]:
            if frozenset((vertex, neighbour)) not in used:
                loop = walk(vertex, neighbour)
                chains.append(_BoundaryChain(np.asarray(loop[:-1], dtype=np.float64), closed=True))
    return chains


def _assemble(chains):
    builder = _NodeBuilder()
    segments, owners = [], []
    for owner, chain in enumerate(chains):
        ids = [builder.add(x, y) for x, y in snap(chain.resample())]
        pairs = zip(ids, ids[1:] + ids[:1]) if chain.closed else zip(ids, ids[1:])
        for a, b in pairs:
            if a != b:
                segments.append((a, b))
                owners.append(owner)
    nodes = np.asarray(builder.points, dtype=np.float64).reshape(-1, 2)
    return nodes, np.asarray(segments, dtype=np.int64).reshape(-1, 2), owners


def boundary_nodes(instances, spacing, width, height):
    """
    Constraint nodes and segments for meshing a labelled image.

    The pixel-corner boundaries between particles, the matrix and the image
    outside form a graph; it is cut into chains at junctions (vertices where
    three or more boundary edges meet, and the image corners) and closed loops.
    Each chain is resampled at equal arc-length steps of about ``spacing``
    pixels, so a boundary shared by two touching particles is placed once.
    Loops keep at least 3 nodes and bent chains at least one interior node.
    Chains whose chords cross are resampled at twice the density until no
    crossing is left; at full density a chain keeps every traced vertex.

    :return: (nodes (N, 2) array, constraints (S, 2) array)
    """
    if spacing < 1:
        raise ParameterError(f"Boundary spacing must be at least 1 pixel, got {spacing}")
    regions = _region_map(instances, width, height)
    corners = ((0, 0), (width, 0), (width, height), (0, height))
    chains = _trace_chains(_boundary_graph(regions), corners)
    for chain in chains:
        wanted = int(round(chain.max_pieces / spacing))
        chain.pieces = min(chain.max_pieces, max(chain.min_pieces(), wanted))

    rounds = 0
    while True:
        nodes, segments, owners = _assemble(chains)
        crossing = {owners[k] for pair in _crossing_pairs(nodes, segments) for k in pair}
        crossing = sorted(c for c in crossing if chains[c].pieces < chains[c].max_pieces)
        if not crossing:
            break
        rounds += 1
        for c in crossing:
            chains[c].pieces = min(chains[c].max_pieces, 2 * chains[c].pieces)
    if rounds:
        logger.info(f"Densified crossing boundary chains over {rounds} round(s)")

    constraints = np.asarray(sorted({tuple(sorted(s)) for s in segments.tolist()}), dtype=np.int64).reshape(-1, 2)
    logger.info(f"Placed {len(nodes)} boundary node(s) and {len(constraints)} constraint segment(s) "
                f"on {len(chains)} boundary chain(s) of {len(instances)} particle(s)")
    return nodes, constraints


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _split_at_nodes(nodes, constraints):
    """Splits constraint segments at nodes lying on their interior and drops duplicates."""
    result = set()
    for a, b in constraints:
        pa, pb = nodes[a], nodes[b]
        direction = pb - pa
        length2 = float(direction @ direction)
        offsets = nodes - pa
        t = offsets @ direction / length2
        cross = direction[0] * offsets[:, 1] - direction[1] * offsets[:, 0]
        on_segment = np.flatnonzero((np.abs(cross) <= EPSILON * math.sqrt(length2)) & (t > EPSILON) & (t < 1 - EPSILON))
        chain = [a] + [int(i) for i in on_segment[np.argsort(t[on_segment], kind="stable")]] + [b]
        for u, v in zip(chain, chain[1:]):
            if u != v:
                result.add((min(u, v), max(u, v)))
    return np.asarray(sorted(result), dtype=np.int64).reshape(-1, 2)


def _crossing_pairs(nodes, constraints):
    """Index pairs of constraint segments that cross at a point interior to both."""
    if len(constraints) < 2:
        return
    p, q = nodes[constraints[:, 0]], nodes[constraints[:, 1]]
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    for i in range(len(constraints)):
        candidates = np.flatnonzero(
            (lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0]) & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1])
        )
        for j in candidates[candidates > i]:
            if set(constraints[i].tolist()) & set(constraints[j].tolist()):
                continue
            d1 = _orient(p[i], q[i], p[j])
            d2 = _orient(p[i], q[i], q[j])
            d3 = _orient(p[j], q[j], p[i])
            d4 = _orient(p[j], q[j], q[i])
            if ((d1 > EPSILON and d2 < -EPSILON) or (d1 < -EPSILON and d2 > EPSILON)) and \
                    ((d3 > EPSILON and d4 < -EPSILON) or (d3 < -EPSILON and d4 > EPSILON)):
                yield i, int(j)


def _check_crossings(nodes, constraints):
    for i, j in _crossing_pairs(nodes, constraints):
        p, q = nodes[constraints[i]], nodes[constraints[j]]
        raise CrossingConstraintsError(
            f"Constraint segments {p[0].tolist()}-{p[1].tolist()} and {q[0].tolist()}-{q[1].tolist()} cross"
        )


def _edge_keys(triangles):
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return set(map(tuple, np.sort(edges, axis=1).tolist()))


def _triangle_angles(points, triangles):
    """Interior angles in degrees, column k at vertex k."""
    a, b, c = (points[triangles[:, k]] for k in range(3))
    la = np.hypot(*(b - c).T)
    lb = np.hypot(*(c - a).T)
    lc = np.hypot(*(a - b).T)

    def angle(opposite, s1, s2):
        cosine = (s1 * s1 + s2 * s2 - opposite * opposite) / np.maximum(2 * s1 * s2, 1e-300)
        return np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))

    return np.column_stack([angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)])


def _circumcentres(points, triangles):
    a, b, c = (points[triangles[:, k]] for k in range(3))
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    centres = np.column_stack([a[:, 0] + ux, a[:, 1] + uy])
    return centres, np.hypot(ux, uy)


def delaunay_triangles(points):
    """Delaunay triangles of a point set, counter-clockwise, without zero-area slivers."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        return np.zeros((0, 3), dtype=np.int64)
    centre = points.mean(axis=0)
    try:
        simplices = Delaunay(points - centre).simplices.astype(np.int64)
    except Exception as e:  # qhull raises its own error type for flat inputs
        logger.warning(f"Delaunay triangulation failed for {len(points)} point(s): {e}")
        return np.zeros((0, 3), dtype=np.int64)
    a, b, c = (points[simplices[:, k]] for k in range(3))
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    clockwise = signed < 0
    simplices[clockwise] = simplices[clockwise][:, [0, 2, 1]]
    return simplices[np.abs(signed) > EPSILON * EPSILON]


class _Refiner:
    def __init__(self, nodes, constraints, min_angle, max_insertions):
        self.points = [tuple(p) for p in snap(nodes).tolist()]
        self.occupied = {point: index for index, point in enumerate(self.points)}
        self.input_count = len(self.points)
        self.segments = [(int(a), int(b), index) for index, (a, b) in enumerate(constraints)]
        self.parent_ends = [(int(a), int(b)) for a, b in constraints]
        self.node_parent = [-1] * len(self.points)
        self.min_angle = min_angle
        self.max_insertions = max_insertions
        self.insertions = 0
        pts = np.asarray(self.points).reshape(-1, 2)
        self.lower = pts.min(axis=0) if len(pts) else np.zeros(2)
        self.upper = pts.max(axis=0) if len(pts) else np.zeros(2)
        input_angles = self._smallest_input_angles(pts, constraints)
        self.shell_vertex = {v for v, angle in input_angles.items() if angle < SHELL_INPUT_ANGLE}
        self.exempt_vertex = {v for v, angle in input_angles.items() if angle < min_angle}

    @staticmethod
    def _smallest_input_angles(pts, constraints):
        """Smallest angle in degrees between constraint segments at every vertex holding two or more."""
        incident = {}
        for a, b in constraints:
            incident.setdefault(int(a), []).append(int(b))
            incident.setdefault(int(b), []).append(int(a))
        smallest = {}
        for vertex, others in incident.items():
            if len(others) < 2:
                continue
            directions = np.arctan2(pts[others, 1] - pts[vertex, 1], pts[others, 0] - pts[vertex, 0])
            directions = np.sort(directions)
            gaps = np.diff(np.concatenate([directions, directions[:1] + 2 * np.pi]))
            smallest[vertex] = float(np.degrees(gaps.min()))
        return smallest

    def _new_point(self, x, y, parent=-1):
        point = tuple(snap([[x, y]])[0].tolist())
        if point in self.occupied:
            return None
        self.insertions += 1
        if self.insertions > self.max_insertions:
            raise MeshRefinementError(
                f"Mesh refinement exceeded {self.max_insertions} insertions near ({point[0]:.3f}, {point[1]:.3f})"
            )
        self.occupied[point] = len(self.points)
        self.points.append(point)
        self.node_parent.append(parent)
        return len(self.points) - 1

    def _shell_apex(self, a, b):
        """Input vertex with a small angle that exactly one end of a piece sits on, or None."""
        ends = [v for v in (a, b) if v < self.input_count and v in self.shell_vertex]
        return ends[0] if len(ends) == 1 else None

    def _split_point(self, a, b):
        pa, pb = np.asarray(self.points[a]), np.asarray(self.points[b])
        length = math.dist(pa, pb)
        apex = self._shell_apex(a, b)
        if apex is None:
            return (pa + pb) / 2.0
        # concentric shells: pieces next to a small input angle get power-of-two lengths
        origin, other = (pa, pb) if apex == a else (pb, pa)
        distance = 2.0 ** round(math.log2(length / 2.0))
        return origin + (other - origin) * (distance / length)

    def _split_segments(self, indices):
        keep = [s for i, s in enumerate(self.segments) if i not in indices]
        for i in sorted(indices):
            a, b, parent = self.segments[i]
            pa, pb = self.points[a], self.points[b]
            if math.dist(pa, pb) < MIN_EDGE_LENGTH:
                raise MeshRefinementError(
                    f"Constraint piece near ({pa[0]:.3f}, {pa[1]:.3f}) became too short to split"
                )
            x, y = self._split_point(a, b)
            middle = self._new_point(x, y, parent)
            if middle is None:
                middle = self.occupied[tuple(snap([[x, y]])[0].tolist())]
            keep += [(a, middle, parent), (middle, b, parent)]
        self.segments = keep

    def _encroached_segments(self, pts, triangles):
        """Segments missing from the mesh or with a neighbouring apex inside their diametral circle."""
        if not self.segments:
            return set()
        count = len(pts)
        seg = np.asarray([(a, b) for a, b, _ in self.segments], dtype=np.int64)
        seg_keys = seg.min(axis=1) * count + seg.max(axis=1)
        edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
        apex = np.concatenate([triangles[:, 2], triangles[:, 0], triangles[:, 1]])
        keys = edges.min(axis=1) * count + edges.max(axis=1)
        order = np.argsort(keys, kind="stable")
        # an edge borders at most two triangles; two sentinels keep position + 1 in range
        keys = np.concatenate([keys[order], [-1, -1]])
        apex = np.concatenate([apex[order], [0, 0]])
        position = np.searchsorted(keys[:-2], seg_keys)

        middle = (pts[seg[:, 0]] + pts[seg[:, 1]]) / 2.0
        radius2 = np.sum((pts[seg[:, 0]] - pts[seg[:, 1]]) ** 2, axis=1) / 4.0
        present = keys[position] == seg_keys
        encroached = ~present
        for slot in (position, position + 1):
            borders = keys[slot] == seg_keys
            distance2 = np.sum((pts[apex[slot]] - middle) ** 2, axis=1)
            encroached |= borders & (distance2 < radius2 - EPSILON)
        return set(np.flatnonzero(encroached).tolist())

    def _exempt(self, triangle, angles, pts):
        corner = int(np.argmin(angles))
        if int(triangle[corner]) in self.exempt_vertex:
            return True
        u, v = int(triangle[(corner + 1) % 3]), int(triangle[(corner + 2) % 3])
        if math.dist(pts[u], pts[v]) < MIN_EDGE_LENGTH:
            return True
        ends_u, ends_v = self._segment_ends(u), self._segment_ends(v)
        shared = {z for z in ends_u & ends_v if z in self.exempt_vertex}
        return bool(shared) and self.node_parent[u] != self.node_parent[v]

    def _segment_ends(self, node):
        parent = self.node_parent[node]
        if parent >= 0:
            return set(self.parent_ends[parent])
        return {node}

    def _segment_circles(self, pts):
        seg = np.asarray([(a, b) for a, b, _ in self.segments], dtype=np.int64).reshape(-1, 2)
        middle = (pts[seg[:, 0]] + pts[seg[:, 1]]) / 2.0
        radius2 = np.sum((pts[seg[:, 0]] - pts[seg[:, 1]]) ** 2, axis=1) / 4.0
        return middle, radius2

    def _inside_domain(self, point):
        return bool(np.all(point >= self.lower - EPSILON) and np.all(point <= self.upper + EPSILON))

    def _open_triangles(self, triangles):
        """Triangles with a convex hull edge that no constraint covers."""
        edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
        keys, counts = np.unique(edges, axis=0, return_counts=True)
        constrained = {(min(a, b), max(a, b)) for a, b, _ in self.segments}
        open_edges = {tuple(edge) for edge, count in zip(keys.tolist(), counts) if count == 1} - constrained
        owner = np.tile(np.arange(len(triangles)), 3)
        return {int(t) for t, edge in zip(owner, edges.tolist()) if tuple(edge) in open_edges}

    def _check_stranded(self, pts, triangles, stranded):
        """Raises when a skinny triangle away from any open hull edge could not be refined."""
        closed = [t for t in stranded if t not in self._open_triangles(triangles)]
        if closed:
            corners = pts[triangles[closed[0]]]
            (x0, y0), (x1, y1) = corners.min(axis=0), corners.max(axis=0)
            raise MeshRefinementError(
                f"Cannot refine {len(closed)} triangle(s) below {self.min_angle} degrees, "
                f"first in box ({x0:.3f}, {y0:.3f})-({x1:.3f}, {y1:.3f})"
            )

    def run(self):
        passes = 0
        while True:
            passes += 1
            pts = np.asarray(self.points, dtype=np.float64)
            triangles = delaunay_triangles(pts)
            if len(triangles) == 0:
                return pts, triangles
            encroached = self._encroached_segments(pts, triangles)
            if encroached:
                self._split_segments(encroached)
                continue
            if self.min_angle <= 0:
                return pts, triangles
            angles = _triangle_angles(pts, triangles)
            smallest = angles.min(axis=1)
            skinny = np.flatnonzero(smallest < self.min_angle - EPSILON)
            if skinny.size == 0:
                return pts, triangles
            centres, radii = _circumcentres(pts, triangles[skinny])
            seg_middle, seg_radius2 = self._segment_circles(pts)
            accepted, accepted_radii, split, stranded = [], [], set(), []
            for k in np.argsort(smallest[skinny], kind="stable"):
                if self._exempt(triangles[skinny[k]], angles[skinny[k]], pts):
                    continue
                stranded.append(skinny[k])
                centre, radius = centres[k], radii[k]
                if not np.all(np.isfinite(centre)):
                    continue
                hit = np.flatnonzero(np.sum((seg_middle - centre) ** 2, axis=1) < seg_radius2 - EPSILON)
                if hit.size:
                    split.update(hit.tolist())
                    continue
                if not self._inside_domain(centre):
                    continue
                if any(math.dist(centre, other) < radius + other_radius
                       for other, other_radius in zip(accepted, accepted_radii)):
                    continue
                accepted.append(centre)
                accepted_radii.append(radius)
            inserted = sum(1 for centre in accepted if self._new_point(centre[0], centre[1]) is not None)
            if split:
                self._split_segments(split)
            elif not inserted:
                self._check_stranded(pts, triangles, stranded)
                logger.info(f"Refinement left {skinny.size} triangle(s) below {self.min_angle} degrees "
                            f"next to small input angles or open hull edges")
                return pts, triangles
            if passes % 25 == 0:
                logger.debug(f"Refinement pass {passes}: {len(self.points)} node(s)")


def conforming_delaunay(nodes, constraints, min_angle=20.0, max_insertions=DEFAULT_MAX_INSERTIONS):
    """
    Conforming Delaunay triangulation of constrained nodes with Steiner points.

    Constraint segments are first split at nodes lying on them. Encroached or
    missing segment pieces are split at their midpoints, or on power-of-two
    shells around small input angles, and triangles with an angle below
    ``min_angle`` get their circumcentre inserted, unless the small angle is
    forced by a small angle between input segments.

    :param nodes: (N, 2) node coordinates.
    :param constraints: (S, 2) node index pairs; segments may touch but not cross.
    :param min_angle: Quality bound in degrees, at most 34.
    :param max_insertions: Steiner point budget before MeshRefinementError.
    :return: TriMesh with every phase set to OTHER.
    """
    if not 0.0 <= min_angle <= MAX_MIN_ANGLE:
        raise ParameterError(f"min_angle must lie in [0, {MAX_MIN_ANGLE}] degrees, got {min_angle}")
    nodes = snap(np.asarray(nodes, dtype=np.float64).reshape(-1, 2))
    constraints = np.asarray(constraints, dtype=np.int64).reshape(-1, 2)
    if len(constraints) and (constraints.min() < 0 or constraints.max() >= len(nodes)):
        raise ParameterError("Constraint endpoints must index existing nodes")
    if (constraints[:, 0] == constraints[:, 1]).any():
        raise ParameterError("Constraint segments need two distinct endpoints")
    constraints = _split_at_nodes(nodes, constraints) if len(constraints) else constraints
    _check_crossings(nodes, constraints)

    logger.info(f"Starting to refine {len(nodes)} node(s) and {len(constraints)} segment(s), min angle {min_angle}")
    refiner = _Refiner(nodes, constraints, min_angle, max_insertions)
    points, triangles = refiner.run()
    logger.info(f"Successfully built a mesh of {len(points)} node(s) and {len(triangles)} triangle(s) "
                f"with {refiner.insertions} Steiner point(s)")
    pieces = sorted((min(a, b), max(a, b)) for a, b, _ in refiner.segments)
    return TriMesh(points, triangles, np.zeros(len(triangles), dtype=np.uint8), pieces)
