import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from clinker import __version__
from clinker.annotations.annotation_import_export_coco import export_coco, image_stem, import_coco, import_labelme
from clinker.annotations.annotation_instance_types import SplitSide
from clinker.annotations.annotation_plan_dataset_split import plan_split, split_manifest, subset_images
from clinker.cli.cli_run_config import COMMANDS, CONFIG_KEYS, keys_for, load_run_config
from clinker.clinker_job_errors import ClinkerError, DataError
from clinker.clinker_logging_utils import configure_logging
from clinker.clinker_output_files_utils import read_json, write_json_atomic, write_text_atomic
from clinker.evaluation.evaluation_match_instances_threshold import (
    MACRO, DetectionSet, best_f1_threshold, evaluate_instances)
from clinker.evaluation.evaluation_precision_recall_metrics import average_scores
from clinker.evaluation.evaluation_report_tables import ReportRow, build_report, format_report_table
from clinker.mesh.mesh_boundary_nodes_conforming_delaunay import boundary_nodes, conforming_delaunay
from clinker.mesh.mesh_label_export_triangles import export_mesh, label_triangles, phase_area_fractions, render_mesh_svg
from clinker.mow.mow_sample_windows_dataset import build_dataset, sample_windows, split_samples, write_dataset_csv
from clinker.mow.mow_train_predict_pixels import pixel_report, predict_pixels, split_report, train_gbdt
from clinker.particles.particle_extract_instances_stats import (
    assign_normalized_sizes, extract_instances, particle_stats, phase_summary, stats_frame)
from clinker.particles.particle_size_distribution_point_count import (
    point_count, psd_curve, psd_frame, render_centroids_svg, render_psd_svg)
from clinker.raster.raster_load_images_features import load_image, load_label_map, save_label_map_png, to_grayscale
from clinker.raster.raster_pixel_grid_types import PARTICLE_PHASES, LabelMap, PhaseLabel

logger = logging.getLogger(__name__)

COMMON_KEYS = ("input", "out_dir", "seed", "log_dir", "quiet", "workers")
BOOLEAN_KEYS = tuple(key for key, spec in CONFIG_KEYS.items() if spec.default in ("true", "false"))


def _csv_text(frame):
    return frame.to_csv(index=False, lineterminator="\n")


def _load_annotations(path):
    """AnnotatedImages from a COCO document, a labelme document or a directory of labelme documents."""
    path = Path(path)
    if path.is_dir():
        documents = sorted(path.glob("*.json"))
        if not documents:
            raise DataError(f"No labelme JSON documents in {path}")
        return [import_labelme(read_json(doc), image_id=i) for i, doc in enumerate(documents, start=1)]
    doc = read_json(path)
    if isinstance(doc, dict) and "images" in doc and "annotations" in doc:
        return import_coco(doc)
    if isinstance(doc, dict) and "shapes" in doc:
        return [import_labelme(doc)]
    raise DataError(f"{path} is neither a COCO nor a labelme document")


def _image_label_map(image):
    codes = np.zeros((image.height, image.width), dtype=np.uint8)
    for instance in image.instances:
        codes[instance.region.bits] = instance.phase
    return LabelMap(codes)


def cmd_convert(config):
    """labelme to COCO, COCO polygons to RLE and back, or COCO to phase label map PNGs."""
    images = _load_annotations(config.require("input"))
    out_dir = Path(config.out_dir)
    if config.convert_to == "masks":
        written = [save_label_map_png(_image_label_map(image), out_dir / "masks" / f"{image_stem(image)}.png")
                   for image in images]
    else:
        written = [write_json_atomic(out_dir / "coco.json", export_coco(images, use_rle=config.convert_to == "coco-rle"))]
    logger.info(f"Successfully converted {len(images)} image(s) to {config.convert_to}")
    return written


def cmd_split(config):
    """Whole-image train/test split of a COCO corpus with cross-validation folds."""
    images = _load_annotations(config.require("input"))
    plan = plan_split(images, train_fraction=config.train_fraction, folds=config.folds, seed=config.seed)
    out_dir = Path(config.out_dir)
    written = [write_json_atomic(out_dir / "split_manifest.json", split_manifest(plan, images, config.folds))]
    for side in SplitSide:
        written.append(write_json_atomic(out_dir / f"{side.value}.json", export_coco(subset_images(images, plan, side))))
    return written


def _scores_doc(scores, macro):
    doc = {PhaseLabel(phase).display_name: s.to_dict() for phase, s in scores.items()}
    doc[MACRO] = macro.to_dict()
    return doc


def cmd_mow(config):
    """Model on Windows: sample windows, build features, split, train, predict the whole image."""
    img = load_image(config.require("input"))
    labels = load_label_map(config.require("labels"))
    if config.mow_grayscale:
        img = to_grayscale(img)
    mow = config.mow_config()
    windows = sample_windows(img, labels, mow)
    dataset = split_samples(build_dataset(img, labels, windows, mow.p), mow.ratios, mow.seed, mow.split_by_window)
    model = train_gbdt(dataset, config.mow_grid(), seed=config.seed,
                       class_weighting=config.mow_class_weights, workers=config.workers)
    predicted = predict_pixels(model, img, mow.p)
    test_scores, test_macro = split_report(model, dataset)
    image_scores, image_macro = pixel_report(predicted, labels, model.classes)

    out_dir = Path(config.out_dir)
    written = [
        write_json_atomic(out_dir / "model.json", model.to_dict()),
        save_label_map_png(predicted, out_dir / "labels_pred.png"),
    ]
    report = {
        "samples": len(dataset),
        "features": dataset.feature_width,
        "p": mow.p,
        "channels": img.channels,
        "windows": [{"x": w.x, "y": w.y, "n": w.n} for w in windows],
        "split_sizes": dataset.split_sizes(),
        "selection": model.selection,
        "test": _scores_doc(test_scores, test_macro),
        "image": _scores_doc(image_scores, image_macro),
    }
    written.append(write_json_atomic(out_dir / "pixel_report.json", report))
    phases = tuple(PhaseLabel(phase) for phase in model.classes)
    text = (f"MoW dataset: {len(dataset)} samples x {dataset.feature_width} features "
            f"from {len(windows)} window(s), p={mow.p}\n"
            f"Split: {dataset.split_sizes()}\n\n"
            + format_report_table([ReportRow("MoW", "test split", test_scores),
                                   ReportRow("MoW", "whole image", image_scores)], phases))
    written.append(write_text_atomic(out_dir / "pixel_report.txt", text))
    if config.mow_dump_dataset:
        written.append(write_dataset_csv(dataset, out_dir / "dataset.csv"))
    logger.info(f"Successfully ran MoW with test macro-F1 {test_macro.f1:.4f}")
    return written


def cmd_analyze(config):
    """Particle statistics, normalized size distributions and point-count phase fractions of a label map."""
    labels = load_label_map(config.require("input"))
    instances = extract_instances(labels, min_area=config.min_area)
    stats = [particle_stats(instance) for instance in instances]
    curves = [psd_curve(stats, metric, config.normalization) for metric in ("area", "diagonal")]
    stats = assign_normalized_sizes(stats, "area", config.normalization)
    counted = point_count(labels, config.point_count_points, config.point_count_mode, config.seed)

    out_dir = Path(config.out_dir)
    written = [
        write_text_atomic(out_dir / "particle_stats.csv", _csv_text(stats_frame(stats, config.pixel_size))),
        write_text_atomic(out_dir / "psd_area.csv", _csv_text(psd_frame(curves[0]))),
        write_text_atomic(out_dir / "psd_diagonal.csv", _csv_text(psd_frame(curves[1]))),
        render_psd_svg(curves, out_dir / "psd.svg"),
        render_centroids_svg(labels, stats, out_dir / "centroids.svg"),
    ]
    point_doc = counted.to_dict()
    point_doc["mode"] = config.point_count_mode
    point_doc["pixel_fractions"] = {phase.display_name: fraction for phase, fraction in labels.phase_fractions().items()}
    written.append(write_json_atomic(out_dir / "point_count.json", point_doc))
    written.append(write_json_atomic(out_dir / "phase_summary.json", phase_summary(stats, labels.width, labels.height)))
    return written


def _eval_pixels(config):
    predicted = load_label_map(config.require("predictions"))
    truth = load_label_map(config.require("ground_truth"))
    phases = tuple(PhaseLabel)
    scores, _ = pixel_report(predicted, truth, phases)
    scores[MACRO] = average_scores([scores[phase] for phase in phases], config.average)
    return [ReportRow("segmentation", "pixel", scores)], phases, {}


def _eval_instances(config):
    predictions = _load_annotations(config.require("predictions"))
    truth = {image.image_id: image.instances for image in _load_annotations(config.require("ground_truth"))}
    detections = DetectionSet.from_images(predictions)
    sweep = best_f1_threshold(detections, truth, iou_threshold=config.iou_threshold, step=config.sweep_step,
                              average=config.average, workers=config.workers)
    unfiltered = evaluate_instances(detections, truth, iou_threshold=config.iou_threshold, cutoff=0.0,
                                    phases=[key for key in sweep.scores if key != MACRO], average=config.average)
    rows = [
        ReportRow("detections", "instance", unfiltered, 0.0),
        ReportRow("detections", "instance best F1", sweep.scores, sweep.threshold),
    ]
    extra = {
        "detections": detections.count(),
        "best_threshold": sweep.threshold,
        "threshold_curve": [{"threshold": t, "f1": f1} for t, f1 in sweep.curve],
    }
    return rows, PARTICLE_PHASES, extra


def cmd_eval(config):
    """Pixel or instance precision, recall and F1, with the confidence sweep in instance mode."""
    if config.eval_mode == "pixel":
        rows, phases, extra = _eval_pixels(config)
    else:
        rows, phases, extra = _eval_instances(config)
    report = build_report(rows, config.iou_threshold if config.eval_mode == "instance" else None, config.average)
    report.update(extra)
    out_dir = Path(config.out_dir)
    return [
        write_json_atomic(out_dir / "eval_report.json", report),
        write_text_atomic(out_dir / "eval_report.txt", format_report_table(rows, phases)),
    ]


def cmd_mesh(config):
    """Phase-labelled conforming Delaunay mesh of a label map."""
    labels = load_label_map(config.require("input"))
    instances = extract_instances(labels, min_area=config.min_area)
    nodes, constraints = boundary_nodes(instances, config.mesh_spacing, labels.width, labels.height)
    mesh = conforming_delaunay(nodes, constraints, min_angle=config.mesh_min_angle)
    mesh = label_triangles(mesh, labels, rule=config.mesh_label_rule)
    out_dir = Path(config.out_dir)
    written = export_mesh(mesh, config.mesh_format, out_dir / "mesh")
    if config.mesh_svg:
        written.append(render_mesh_svg(mesh, out_dir / "mesh.svg", labels.width, labels.height))
    fractions = phase_area_fractions(mesh)
    logger.info("Mesh phase area fractions: " +
                ", ".join(f"{phase.display_name} {fraction:.3f}" for phase, fraction in fractions.items()))
    return written


COMMAND_HANDLERS = {
    "convert": cmd_convert,
    "split": cmd_split,
    "mow": cmd_mow,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
    "mesh": cmd_mesh,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="clinker", description="Alite and belite phase analysis of clinker micrographs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        handler = COMMAND_HANDLERS[command]
        sub = subparsers.add_parser(command, help=handler.__doc__, description=handler.__doc__)
        sub.add_argument("--config", default=None, help="dotenv-style key=value config file.")
        for key in dict.fromkeys(COMMON_KEYS + tuple(keys_for(command))):
            spec = CONFIG_KEYS[key]
            flag = f"--{key.replace('_', '-')}"
            if key in BOOLEAN_KEYS:
                sub.add_argument(flag, dest=key, nargs="?", const="true", default=argparse.SUPPRESS,
                                 metavar="BOOL", help=f"{spec.help} (default: {spec.default})")
            else:
                sub.add_argument(flag, dest=key, default=argparse.SUPPRESS,
                                 help=f"{spec.help} (default: {spec.default or 'none'})")
    return parser


def error_line(error):
    return f"error code={error.exit_code} kind={type(error).__name__} message={json.dumps(str(error))}"


def main(argv=None):
    load_dotenv(dotenv_path=os.path.join(os.getcwd(), ".env"))
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        config = load_run_config(command, args, config_path)
        configure_logging(f"clinker_{command}", log_dir=config.log_dir, quiet=config.quiet)
        logger.info(f"Starting to run '{command}' with seed {config.seed}")
        written = COMMAND_HANDLERS[command](config)
        logger.info(f"Successfully ran '{command}', wrote {len(written)} file(s) to {config.out_dir}")
    except ClinkerError as e:
        logging.error(f"'{command}' failed: {e}")
        print(error_line(e), file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
