import io
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from clinker.clinker_job_errors import DataError  # noqa: E402

logger = logging.getLogger(__name__)

# fixed id salt, no date: identical bytes on every render
SVG_RC = {"svg.hashsalt": "clinker", "svg.fonttype": "none"}


def write_bytes_atomic(path, payload):
    """
    Writes a file through a temporary sibling and an atomic rename.

    :param path: Destination file path. Parent directories are created.
    :param payload: Bytes to write.
    :return: The destination as a Path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    logger.debug(f"Wrote {len(payload)} bytes to {path}")
    return path


def write_text_atomic(path, text):
    return write_bytes_atomic(path, text.encode("utf-8"))


def dump_json_text(doc):
    """Canonical JSON text used for every JSON output: insertion order, indent 2, trailing newline."""
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_json_atomic(path, doc):
    return write_text_atomic(path, dump_json_text(doc))


def read_json(path):
    """Reads a UTF-8 JSON document, turning I/O and syntax failures into DataError."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as e:
        raise DataError(f"Input file not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Cannot read JSON document {path}: {e}") from e


@contextmanager
def svg_figure(**subplot_kwargs):
    """Figure and axes for an SVG output, closed on exit. Save it with write_svg_atomic inside the block."""
    with plt.rc_context(SVG_RC):
        figure, axes = plt.subplots(**subplot_kwargs)
        try:
            yield figure, axes
        finally:
            plt.close(figure)


def write_svg_atomic(path, figure):
    buffer = io.BytesIO()
    figure.savefig(buffer, format="svg", metadata={"Date": None})
    return write_bytes_atomic(path, buffer.getvalue())
