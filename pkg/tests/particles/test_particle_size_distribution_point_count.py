import numpy as np
import pytest

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.particles.particle_extract_instances_stats import ParticleStats, extract_instances, particle_stats
from clinker.particles.particle_size_distribution_point_count import (
    normalize_sizes, point_count, psd_curve, psd_frame, render_centroids_svg, render_psd_svg)
from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel
from clinker.raster.raster_synthetic_microstructure import generate_synthetic_microstructure


def stats_with_areas(areas):
    return [ParticleStats(i, PhaseLabel.ALITE, 0.0, 0.0, area, float(area)) for i, area in enumerate(areas, start=1)]


@pytest.mark.parametrize("mode", ["linear", "log"])
def test_normalized_extremes_and_ranks(mode):
    values = [40, 3, 250, 3, 17, 96]
    normalized = normalize_sizes(values, mode=mode)
    assert normalized.min() == 0.1
    assert normalized.max() == 16.0
    assert list(np.argsort(normalized, kind="stable")) == list(np.argsort(values, kind="stable"))


def test_linear_normalization_is_affine():
    assert normalize_sizes([1, 2, 3]).tolist() == pytest.approx([0.1, 8.05, 16.0])


def test_normalization_needs_spread():
    with pytest.raises(DataError):
        normalize_sizes([5])
    with pytest.raises(DataError):
        normalize_sizes([4, 4, 4])
    with pytest.raises(DataError):
        normalize_sizes([0, 4])
    with pytest.raises(ParameterError):
        normalize_sizes([1, 4], mode="sqrt")


def test_psd_is_monotone_and_ends_at_100():
    curve = psd_curve(stats_with_areas([12, 5, 5, 80, 33, 12, 7]))
    sizes, percents = curve.sizes, curve.percents
    assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)
    assert percents == sorted(percents)
    assert percents[-1] == 100.0
    assert percents[0] == pytest.approx(200 / 7)
    frame = psd_frame(curve)
    assert list(frame.columns) == ["normalized_size", "percent_finer"]
    with pytest.raises(DataError):
        psd_curve(stats_with_areas([3]))


def test_diagonal_metric_uses_diagonals():
    stats = [ParticleStats(1, PhaseLabel.ALITE, 0, 0, 10, 2.0), ParticleStats(2, PhaseLabel.BELITE, 0, 0, 1, 9.0)]
    assert psd_curve(stats, metric="diagonal").points == ((0.1, 50.0), (16.0, 100.0))
    with pytest.raises(ParameterError):
        psd_curve(stats, metric="perimeter")


def test_grid_over_every_pixel_is_exact():
    rng = np.random.default_rng(4)
    labels = LabelMap(rng.integers(0, 3, size=(20, 20)))
    result = point_count(labels, 400)
    assert result.fractions == labels.phase_fractions()
    assert sum(result.counts.values()) == 400


@pytest.mark.parametrize("n_points", [4, 16, 64, 3600])
def test_grid_uses_the_requested_number_of_points(n_points, two_particle_labels):
    result = point_count(two_particle_labels, n_points)
    assert result.total == n_points
    assert sum(result.counts.values()) == n_points
    assert sum(result.fractions.values()) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(50))
def test_grid_estimate_approaches_pixel_fractions(seed):
    _, labels = generate_synthetic_microstructure(width=200, height=200, seed=seed)
    exact = labels.phase_fractions()
    grid = point_count(labels, 4000)
    for phase in PhaseLabel:
        assert grid.fractions[phase] == pytest.approx(exact[phase], abs=0.02)


def test_random_estimate_approaches_pixel_fractions(synthetic_micrograph):
    _, labels = synthetic_micrograph
    exact = labels.phase_fractions()
    sampled = point_count(labels, 40000, mode="random", seed=5)
    for phase in PhaseLabel:
        assert sampled.fractions[phase] == pytest.approx(exact[phase], abs=0.02)
    assert point_count(labels, 500, mode="random", seed=1) == point_count(labels, 500, mode="random", seed=1)
    with pytest.raises(ParameterError):
        point_count(labels, 0)
    with pytest.raises(ParameterError):
        point_count(labels, 10, mode="hexagonal")


def test_point_count_document(two_particle_labels):
    doc = point_count(two_particle_labels, 16).to_dict()
    assert list(doc) == ["total_points", "counts", "fractions"]
    assert set(doc["counts"]) == {"other", "alite", "belite"}


def test_svgs_are_reproducible(tmp_path, two_particle_labels):
    stats = [particle_stats(inst) for inst in extract_instances(two_particle_labels)]
    sized = stats_with_areas([4, 9, 9, 30])
    curves = [psd_curve(sized, "area"), psd_curve(sized, "diagonal")]
    first = render_psd_svg(curves, tmp_path / "a" / "psd.svg").read_bytes()
    second = render_psd_svg(curves, tmp_path / "b" / "psd.svg").read_bytes()
    assert first == second
    assert first.lstrip().startswith(b"<?xml")
    one = render_centroids_svg(two_particle_labels, stats, tmp_path / "c1.svg").read_bytes()
    two = render_centroids_svg(two_particle_labels, stats, tmp_path / "c2.svg").read_bytes()
    assert one == two
