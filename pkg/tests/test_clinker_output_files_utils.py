import matplotlib.pyplot as plt
import pytest

from clinker.clinker_job_errors import DataError
from clinker.clinker_output_files_utils import read_json, svg_figure, write_json_atomic, write_svg_atomic


def draw(path):
    with svg_figure(figsize=(3, 2)) as (figure, axes):
        axes.plot([0, 1, 2], [2, 0, 1], label="trace")
        axes.legend()
        return write_svg_atomic(path, figure)


def test_svg_output_is_byte_reproducible(tmp_path):
    open_figures = plt.get_fignums()
    first = draw(tmp_path / "a" / "plot.svg").read_bytes()
    second = draw(tmp_path / "b" / "plot.svg").read_bytes()
    assert first == second
    assert b"<dc:date>" not in first
    assert plt.get_fignums() == open_figures


def test_json_output_round_trips_and_leaves_no_temporaries(tmp_path):
    path = write_json_atomic(tmp_path / "doc.json", {"b": 1, "a": [1.5, "x"]})
    assert read_json(path) == {"b": 1, "a": [1.5, "x"]}
    assert path.read_text(encoding="utf-8").endswith("}\n")
    assert [p.name for p in tmp_path.iterdir()] == ["doc.json"]


def test_unreadable_json_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        read_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{", encoding="utf-8")
    with pytest.raises(DataError):
        read_json(tmp_path / "bad.json")
