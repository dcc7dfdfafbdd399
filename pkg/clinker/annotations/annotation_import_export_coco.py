import logging
from pathlib import Path

from clinker.annotations.annotation_instance_types import AnnotatedImage, ParticleInstance, Polygon, RleCounts
from clinker.annotations.annotation_mask_polygon_rle_utils import (
    mask_to_polygons,
    polygon_to_mask,
    rle_decode,
    rle_encode,
)
from clinker.clinker_job_errors import AnnotationError
from clinker.raster.raster_pixel_grid_types import PhaseLabel

logger = logging.getLogger(__name__)

COCO_CATEGORIES = (
    {"id": 1, "name": "alite", "supercategory": "clinker"},
    {"id": 2, "name": "belite", "supercategory": "clinker"},
)
CATEGORY_BY_PHASE = {PhaseLabel.ALITE: 1, PhaseLabel.BELITE: 2}
PHASE_BY_NAME = {"alite": PhaseLabel.ALITE, "belite": PhaseLabel.BELITE}


def _require(doc, keys, what):
    missing = [key for key in keys if key not in doc]
    if missing:
        raise AnnotationError(f"{what} is missing field(s): {', '.join(missing)}")


def _labelme_polygon(shape, index):
    points = shape.get("points") or []
    shape_type = shape.get("shape_type") or "polygon"
    if shape_type == "rectangle":
        if len(points) != 2:
            raise AnnotationError(f"Rectangle shape {index} needs 2 corner points, got {len(points)}")
        (xa, ya), (xb, yb) = points
        x0, x1 = sorted((xa, xb))
        y0, y1 = sorted((ya, yb))
        return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
    if shape_type != "polygon":
        raise AnnotationError(f"Shape {index} has unsupported shape_type '{shape_type}'")
    if len(points) < 3:
        raise AnnotationError(f"Polygon shape {index} has {len(points)} point(s), at least 3 are needed")
    return Polygon(tuple((x, y) for x, y in points))


def import_labelme(doc, image_id=1):
    """
    Converts one labelme document into an AnnotatedImage.

    :param doc: Parsed labelme JSON with imagePath, imageWidth, imageHeight and shapes.
    :param image_id: Identifier given to the image.
    """
    _require(doc, ("imagePath", "imageWidth", "imageHeight", "shapes"), "labelme document")
    width, height = int(doc["imageWidth"]), int(doc["imageHeight"])
    instances = []
    for index, shape in enumerate(doc["shapes"], start=1):
        label = str(shape.get("label", ""))
        phase = PHASE_BY_NAME.get(label.strip().lower())
        if phase is None:
            raise AnnotationError(f"Shape {index} has label '{label}', expected 'alite' or 'belite'")
        polygon = _labelme_polygon(shape, index)
        region = polygon_to_mask([polygon], width, height)
        if region.count() == 0:
            logger.warning(f"Skipping shape {index} of {doc['imagePath']}: it covers no pixel centre")
            continue
        instances.append(ParticleInstance.from_mask(index, phase, region, polygons=(polygon,)))
    logger.info(f"Imported {len(instances)} particle(s) from labelme document {doc['imagePath']}")
    return AnnotatedImage(image_id=image_id, source_path=str(doc["imagePath"]), width=width, height=height,
                          instances=tuple(instances))


def _coord(value):
    value = float(value)
    return int(value) if value.is_integer() else value


def _segmentation(instance, use_rle):
    if use_rle:
        rle = rle_encode(instance.region)
        return {"size": [rle.height, rle.width], "counts": list(rle.counts)}
    return [[_coord(v) for v in polygon.flat()] for polygon in instance.polygons]


def export_coco(images, use_rle=False):
    """
    Builds a COCO instance-segmentation document.

    Areas are pixel counts of the masks, segmentations are polygons or
    uncompressed column-major RLE, and detections keep their confidence as ``score``.
    """
    doc = {"images": [], "annotations": [], "categories": [dict(c) for c in COCO_CATEGORIES]}
    annotation_id = 0
    for image in images:
        doc["images"].append({
            "id": image.image_id,
            "file_name": image.source_path,
            "width": image.width,
            "height": image.height,
        })
        for instance in image.instances:
            annotation_id += 1
            annotation = {
                "id": annotation_id,
                "image_id": image.image_id,
                "category_id": CATEGORY_BY_PHASE[instance.phase],
                "segmentation": _segmentation(instance, use_rle),
                "area": instance.area,
                "bbox": instance.bbox.to_coco(),
                "iscrowd": 0,
            }
            if instance.confidence is not None:
                annotation["score"] = instance.confidence
            doc["annotations"].append(annotation)
    logger.info(f"Exported {len(doc['images'])} image(s) and {annotation_id} annotation(s) to COCO")
    return doc


def _category_phases(doc):
    phases = {}
    for category in doc.get("categories", []):
        phase = PHASE_BY_NAME.get(str(category.get("name", "")).strip().lower())
        if phase is not None:
            phases[category["id"]] = phase
    return phases


def _decode_segmentation(segmentation, width, height, annotation_id):
    if isinstance(segmentation, dict):
        counts = segmentation.get("counts")
        if isinstance(counts, str):
            raise AnnotationError(f"Annotation {annotation_id} uses compressed RLE, only uncompressed counts are supported")
        size = segmentation.get("size") or [height, width]
        if list(size) != [height, width]:
            raise AnnotationError(f"Annotation {annotation_id} RLE size {size} does not match image {height}x{width}")
        region = rle_decode(RleCounts(width=width, height=height, counts=tuple(counts or ())))
        return region, None
    if not isinstance(segmentation, list) or not segmentation:
        raise AnnotationError(f"Annotation {annotation_id} has no usable segmentation")
    polygons = tuple(Polygon.from_flat(coords) for coords in segmentation)
    return polygon_to_mask(polygons, width, height), polygons


def import_coco(doc):
    """Inverse of export_coco. Annotations of categories other than alite and belite are rejected."""
    _require(doc, ("images", "annotations"), "COCO document")
    phases = _category_phases(doc)
    sizes = {}
    grouped = {}
    for image in doc["images"]:
        _require(image, ("id", "width", "height"), "COCO image")
        sizes[image["id"]] = image
        grouped[image["id"]] = []

    for annotation in doc["annotations"]:
        _require(annotation, ("id", "image_id", "category_id", "segmentation"), "COCO annotation")
        if annotation["category_id"] not in phases:
            raise AnnotationError(f"Annotation {annotation['id']} has unknown category id {annotation['category_id']}")
        if annotation["image_id"] not in sizes:
            raise AnnotationError(f"Annotation {annotation['id']} references unknown image id {annotation['image_id']}")
        grouped[annotation["image_id"]].append(annotation)

    images = []
    for image_id, image in sizes.items():
        width, height = int(image["width"]), int(image["height"])
        instances = []
        for annotation in grouped[image_id]:
            region, polygons = _decode_segmentation(annotation["segmentation"], width, height, annotation["id"])
            if region.count() == 0:
                logger.warning(f"Skipping annotation {annotation['id']}: empty segmentation")
                continue
            instances.append(ParticleInstance.from_mask(
                annotation["id"],
                phases[annotation["category_id"]],
                region,
                confidence=annotation.get("score"),
                polygons=polygons if polygons is not None else mask_to_polygons(region),
            ))
        images.append(AnnotatedImage(image_id=image_id, source_path=str(image.get("file_name", "")),
                                     width=width, height=height, instances=tuple(instances)))
    logger.info(f"Imported {len(images)} image(s) from COCO document")
    return images


def image_stem(image):
    """File stem used for per-image outputs."""
    stem = Path(image.source_path).stem
    return stem or f"image_{image.image_id}"
