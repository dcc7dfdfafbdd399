import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull, cKDTree

from clinker.clinker_job_errors import CrossingConstraintsError, MeshRefinementError, ParameterError
from clinker.mesh import mesh_boundary_nodes_conforming_delaunay as refinement
from clinker.mesh.mesh_boundary_nodes_conforming_delaunay import (
    MIN_EDGE_LENGTH, TriMesh, boundary_nodes, conforming_delaunay, delaunay_triangles)
from clinker.mesh.mesh_label_export_triangles import label_triangles, phase_area_fractions
from clinker.particles.particle_extract_instances_stats import extract_instances
from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel
from clinker.raster.raster_synthetic_microstructure import generate_synthetic_microstructure

from conftest import make_instance, rectangle_mask


def circumcircle(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
    uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
    centre = np.array([ux, uy])
    return centre, math.dist(centre, a)


def test_three_points_give_one_triangle():
    mesh = conforming_delaunay([(0, 0), (1, 0), (0, 1)], [])
    assert mesh.triangles.shape == (1, 3)
    assert mesh.triangle_areas()[0] == pytest.approx(0.5)


def test_unit_square_gives_two_triangles():
    mesh = conforming_delaunay([(0, 0), (1, 0), (1, 1), (0, 1)], [])
    assert len(mesh.triangles) == 2
    assert mesh.triangle_areas().sum() == pytest.approx(1.0)


def test_fewer_than_three_points_give_no_triangles():
    assert delaunay_triangles([(0, 0), (1, 1)]).shape == (0, 3)


@pytest.mark.parametrize("seed", range(20))
def test_unrefined_mesh_is_delaunay(seed):
    rng = np.random.default_rng(seed)
    points = rng.uniform(0, 100, size=(int(rng.integers(5, 51)), 2))
    mesh = conforming_delaunay(points, [], min_angle=0)
    assert (mesh.triangle_areas() > 0).all()
    assert mesh.triangle_areas().sum() == pytest.approx(ConvexHull(mesh.nodes).volume)
    for triangle in mesh.triangles:
        centre, radius = circumcircle(*mesh.nodes[triangle])
        others = np.delete(mesh.nodes, triangle, axis=0)
        assert (np.hypot(*(others - centre).T) >= radius - 1e-7).all()


def test_frame_nodes_follow_the_spacing():
    nodes, constraints = boundary_nodes([], 1, 4, 4)
    assert len(nodes) == 16
    assert len(constraints) == 16
    assert {tuple(p) for p in nodes.tolist()} >= {(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)}
    with pytest.raises(ParameterError):
        boundary_nodes([], 0.5, 4, 4)


def square_particle(size=10, x=3, y=2, side=4):
    return make_instance(1, PhaseLabel.ALITE, rectangle_mask(size, size, x, y, side, side))


def test_unit_spacing_keeps_every_traced_vertex():
    nodes, constraints = boundary_nodes([square_particle()], 1, 10, 10)
    assert len(nodes) == 16 + 40
    assert len(constraints) == 16 + 40
    square = {(float(x), float(y)) for x in range(3, 8) for y in range(2, 7) if x in (3, 7) or y in (2, 6)}
    assert len(square) == 16
    assert square <= {tuple(p) for p in nodes.tolist()}


def test_coarse_spacing_keeps_three_nodes_per_loop():
    nodes, constraints = boundary_nodes([square_particle()], 100, 10, 10)
    assert len(nodes) == 3 + 4
    assert len(constraints) == 3 + 4


def test_touching_particles_share_one_boundary():
    codes = np.zeros((12, 12), dtype=np.uint8)
    codes[2:6, 2:6] = PhaseLabel.ALITE
    codes[2:6, 6:10] = PhaseLabel.BELITE
    instances = extract_instances(LabelMap(codes))
    nodes, constraints = boundary_nodes(instances, 3, 12, 12)
    index = {tuple(p): i for i, p in enumerate(nodes.tolist())}
    shared = tuple(sorted((index[(6.0, 2.0)], index[(6.0, 6.0)])))
    assert [tuple(s) for s in constraints.tolist()].count(shared) == 1
    mesh = conforming_delaunay(nodes, constraints, min_angle=20)
    assert {tuple(s) for s in mesh.constraints.tolist()} <= mesh.edge_set()
    assert mesh.triangle_areas().sum() == pytest.approx(144.0)


def test_particles_on_the_frame_are_meshed():
    codes = np.zeros((10, 10), dtype=np.uint8)
    codes[0:4, 0:5] = PhaseLabel.BELITE
    codes[6:10, 3:10] = PhaseLabel.ALITE
    nodes, constraints = boundary_nodes(extract_instances(LabelMap(codes)), 2, 10, 10)
    mesh = conforming_delaunay(nodes, constraints, min_angle=20)
    assert mesh.triangle_areas().sum() == pytest.approx(100.0)
    assert {tuple(s) for s in mesh.constraints.tolist()} <= mesh.edge_set()


def test_crossing_segments_are_rejected():
    nodes = [(0, 0), (2, 2), (0, 2), (2, 0)]
    with pytest.raises(CrossingConstraintsError):
        conforming_delaunay(nodes, [(0, 1), (2, 3)])


def test_invalid_arguments():
    with pytest.raises(ParameterError):
        conforming_delaunay([(0, 0), (1, 0), (0, 1)], [], min_angle=40)
    with pytest.raises(ParameterError):
        conforming_delaunay([(0, 0), (1, 0), (0, 1)], [(0, 5)])
    with pytest.raises(ParameterError):
        TriMesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [], [])


def test_segment_through_a_node_is_split_there():
    mesh = conforming_delaunay([(0, 0), (2, 0), (4, 0), (2, 3)], [(0, 2)], min_angle=0)
    assert {tuple(s) for s in mesh.constraints.tolist()} == {(0, 1), (1, 2)}


def test_small_input_angle_settles_on_equal_shells():
    angle = math.radians(10)
    nodes = [(0.0, 0.0), (10.0, 0.0), (6 * math.cos(angle), 6 * math.sin(angle))]
    mesh = conforming_delaunay(nodes, [(0, 1), (0, 2)], min_angle=20)
    assert {tuple(s) for s in mesh.constraints.tolist()} <= mesh.edge_set()
    lengths = [math.dist(mesh.nodes[a], mesh.nodes[b]) for a, b in mesh.constraints if 0 in (a, b)]
    assert len(lengths) == 2
    assert lengths[0] == pytest.approx(lengths[1], abs=1e-5)
    assert math.log2(lengths[0]) == pytest.approx(round(math.log2(lengths[0])), abs=1e-5)


def test_moderate_input_angle_is_refined_to_the_bound():
    corner = math.radians(30)
    nodes = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0 * math.tan(corner)), (3.0, 0.3)]
    mesh = conforming_delaunay(nodes, [(0, 1), (1, 2), (2, 0)], min_angle=20)
    assert {tuple(s) for s in mesh.constraints.tolist()} <= mesh.edge_set()
    assert mesh.triangle_areas().sum() == pytest.approx(50.0 * math.tan(corner))
    assert mesh.triangle_angles().min() >= 20 - 1e-6


def test_unrefinable_triangle_in_a_closed_domain_is_reported(monkeypatch):
    def no_centres(points, triangles):
        return np.full((len(triangles), 2), np.nan), np.full(len(triangles), np.nan)

    monkeypatch.setattr(refinement, "_circumcentres", no_centres)
    nodes = [(0.0, 0.0), (8.0, 0.0), (8.0, 1.0), (0.0, 1.0)]
    with pytest.raises(MeshRefinementError, match=r"box \(0\.000, 0\.000\)-\(8\.000, 1\.000\)"):
        conforming_delaunay(nodes, [(0, 1), (1, 2), (2, 3), (3, 0)], min_angle=20)


def test_open_hull_triangles_are_left_without_error(monkeypatch):
    def no_centres(points, triangles):
        return np.full((len(triangles), 2), np.nan), np.full(len(triangles), np.nan)

    monkeypatch.setattr(refinement, "_circumcentres", no_centres)
    mesh = conforming_delaunay([(0.0, 0.0), (8.0, 0.0), (8.0, 1.0), (0.0, 1.0)], [], min_angle=20)
    assert len(mesh.triangles) == 2


@pytest.fixture
def particle_mesh(two_particle_labels):
    instances = extract_instances(two_particle_labels)
    nodes, constraints = boundary_nodes(instances, 2, two_particle_labels.width, two_particle_labels.height)
    return nodes, constraints, conforming_delaunay(nodes, constraints, min_angle=20)


def test_refined_mesh_conforms_to_the_boundaries(particle_mesh):
    nodes, constraints, mesh = particle_mesh
    edges = mesh.edge_set()
    assert {tuple(s) for s in mesh.constraints.tolist()} <= edges
    original = sum(math.dist(nodes[a], nodes[b]) for a, b in constraints)
    pieces = sum(math.dist(mesh.nodes[a], mesh.nodes[b]) for a, b in mesh.constraints)
    assert pieces == pytest.approx(original)
    assert np.array_equal(mesh.nodes[:len(nodes)], nodes)


def test_refined_mesh_meets_the_angle_bound(particle_mesh):
    _, _, mesh = particle_mesh
    assert mesh.triangle_angles().min() >= 20 - 1e-6
    assert mesh.triangle_areas().sum() == pytest.approx(40 * 30)
    assert (mesh.triangle_areas() > 0).all()


def test_refinement_is_reproducible(particle_mesh):
    nodes, constraints, mesh = particle_mesh
    assert conforming_delaunay(nodes, constraints, min_angle=20) == mesh


def small_corner_segments(nodes, constraints, min_angle):
    """Constraint segments that leave an input vertex whose smallest angle between segments is below min_angle."""
    incident = {}
    for a, b in constraints:
        incident.setdefault(a, []).append(b)
        incident.setdefault(b, []).append(a)
    segments = []
    for vertex, others in incident.items():
        if len(others) < 2:
            continue
        directions = np.sort([math.atan2(*(nodes[o] - nodes[vertex])[::-1]) for o in others])
        gaps = np.diff(np.concatenate([directions, directions[:1] + 2 * math.pi]))
        if math.degrees(gaps.min()) < min_angle:
            segments += [(nodes[vertex], nodes[o]) for o in others]
    return segments


def on_segment(point, start, end):
    direction = end - start
    t = np.clip((point - start) @ direction / (direction @ direction), 0.0, 1.0)
    return math.dist(point, start + t * direction) < 1e-6


def exempt_triangles(mesh, segments):
    near = [any(on_segment(p, a, b) for a, b in segments) for p in mesh.nodes]
    corners = mesh.nodes[mesh.triangles]
    shortest = np.min(np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2), axis=1)
    return np.array([any(near[v] for v in t) for t in mesh.triangles]) | (shortest < MIN_EDGE_LENGTH)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_synthetic_maps_mesh_into_labelled_triangles(seed):
    _, labels = generate_synthetic_microstructure(width=100, height=100, seed=seed)
    nodes, constraints = boundary_nodes(extract_instances(labels), 2, 100, 100)
    mesh = label_triangles(conforming_delaunay(nodes, constraints, min_angle=20), labels)
    assert {tuple(s) for s in mesh.constraints.tolist()} <= mesh.edge_set()
    assert (mesh.triangle_areas() > 0).all()
    assert mesh.triangle_areas().sum() == pytest.approx(100 * 100, rel=1e-6)

    exempt = exempt_triangles(mesh, small_corner_segments(nodes, constraints.tolist(), 20))
    assert mesh.triangle_angles().min(axis=1)[~exempt].min() >= 20 - 1e-6

    a, b, c = (mesh.nodes[mesh.triangles[:, k]] for k in range(3))
    circles = [circumcircle(*corners) for corners in zip(a, b, c)]
    centres = np.array([centre for centre, _ in circles])
    radii = np.array([radius for _, radius in circles])
    inside = cKDTree(mesh.nodes).query_ball_point(centres, radii - 1e-7, return_length=True)
    assert (inside == 0).all()

    exact = labels.phase_fractions()
    for phase, fraction in phase_area_fractions(mesh).items():
        assert fraction == pytest.approx(exact[phase], abs=0.05)
