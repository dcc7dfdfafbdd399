import numpy as np
import pytest

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.mesh.mesh_boundary_nodes_conforming_delaunay import TriMesh, boundary_nodes, conforming_delaunay
from clinker.mesh.mesh_label_export_triangles import (
    export_mesh, import_mesh_json, label_triangles, phase_area_fractions, read_node_ele, render_mesh_svg)
from clinker.particles.particle_extract_instances_stats import extract_instances
from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel


@pytest.fixture
def square_mesh():
    nodes = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
    return TriMesh(nodes, [(0, 1, 3), (1, 2, 3)], [0, 0], [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def labelled_mesh(two_particle_labels):
    instances = extract_instances(two_particle_labels)
    nodes, constraints = boundary_nodes(instances, 2, two_particle_labels.width, two_particle_labels.height)
    return label_triangles(conforming_delaunay(nodes, constraints, min_angle=20), two_particle_labels)


def test_centroid_and_majority_rules_differ(square_mesh):
    codes = np.full((4, 4), PhaseLabel.ALITE, dtype=np.uint8)
    codes[1, 1] = PhaseLabel.BELITE
    labels = LabelMap(codes)
    assert label_triangles(square_mesh, labels).phases.tolist() == [PhaseLabel.BELITE, PhaseLabel.ALITE]
    majority = label_triangles(square_mesh, labels, rule="majority")
    assert majority.phases.tolist() == [PhaseLabel.ALITE, PhaseLabel.ALITE]
    assert phase_area_fractions(majority)[PhaseLabel.ALITE] == 1.0
    with pytest.raises(ParameterError):
        label_triangles(square_mesh, labels, rule="vertex")


def test_mesh_phase_areas_follow_the_label_map(labelled_mesh, two_particle_labels):
    exact = two_particle_labels.phase_fractions()
    fractions = phase_area_fractions(labelled_mesh)
    assert fractions[PhaseLabel.ALITE] == pytest.approx(exact[PhaseLabel.ALITE], rel=0.05)
    assert fractions[PhaseLabel.BELITE] == pytest.approx(exact[PhaseLabel.BELITE], abs=0.01)
    assert sum(fractions.values()) == pytest.approx(1.0)


def test_json_export_reimports_exactly(tmp_path, labelled_mesh):
    written = export_mesh(labelled_mesh, "json", tmp_path / "mesh")
    assert written == [tmp_path / "mesh.json"]
    assert import_mesh_json(tmp_path / "mesh.json") == labelled_mesh


def test_node_ele_export_reimports_exactly(tmp_path, labelled_mesh):
    written = export_mesh(labelled_mesh, "both", tmp_path / "mesh")
    assert [p.suffix for p in written] == [".node", ".ele", ".poly", ".json"]
    assert read_node_ele(tmp_path / "mesh") == labelled_mesh
    node_lines = (tmp_path / "mesh.node").read_text().splitlines()
    assert node_lines[0] == f"{len(labelled_mesh.nodes)} 2 0 1"
    assert node_lines[1].split()[0] == "1"
    ele_header = (tmp_path / "mesh.ele").read_text().splitlines()[0]
    assert ele_header == f"{len(labelled_mesh.triangles)} 3 1"


def test_export_is_byte_stable(tmp_path, labelled_mesh):
    export_mesh(labelled_mesh, "both", tmp_path / "a" / "mesh")
    export_mesh(labelled_mesh, "both", tmp_path / "b" / "mesh")
    for suffix in (".node", ".ele", ".poly", ".json"):
        assert (tmp_path / "a" / f"mesh{suffix}").read_bytes() == (tmp_path / "b" / f"mesh{suffix}").read_bytes()
    first = render_mesh_svg(labelled_mesh, tmp_path / "a" / "mesh.svg", 40, 30).read_bytes()
    second = render_mesh_svg(labelled_mesh, tmp_path / "b" / "mesh.svg", 40, 30).read_bytes()
    assert first == second


def test_export_refuses_bad_input(tmp_path, square_mesh):
    empty = TriMesh(np.zeros((0, 2)), [], [], [])
    with pytest.raises(DataError, match="empty mesh"):
        export_mesh(empty, "json", tmp_path / "mesh")
    with pytest.raises(ParameterError):
        export_mesh(square_mesh, "vtk", tmp_path / "mesh")
    (tmp_path / "foreign.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        import_mesh_json(tmp_path / "foreign.json")


def test_poly_comments_and_blank_lines_are_skipped(tmp_path, square_mesh):
    export_mesh(square_mesh, "node-ele", tmp_path / "mesh")
    (tmp_path / "mesh.poly").write_text(
        "# segments of the square\n0 2 0 1\n\n4 0\n# frame\n1 1 2\n2 2 3\n\n3 3 4\n4 1 4\n0\n", encoding="utf-8")
    assert read_node_ele(tmp_path / "mesh") == square_mesh


def test_truncated_poly_is_a_data_error(tmp_path, square_mesh):
    export_mesh(square_mesh, "node-ele", tmp_path / "mesh")
    (tmp_path / "mesh.poly").write_text("0 2 0 1\n4 0\n1 1 2\n2 2 3\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_node_ele(tmp_path / "mesh")
