"""Confusion-matrix segmentation metrics and ROI-restricted Dice similarity."""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import NUM_CLASSES, check_class_index, check_label_map, check_same_shape
from .core import CLASS_NAMES, SNOW, class_mask, parse_class

# Reference values reported for the real-data segmenter; documentation only.
REFERENCE_MEAN_IOU = 0.7718
REFERENCE_MEAN_ACCURACY = 0.8572
REFERENCE_MEAN_F1 = 0.6886
REFERENCE_DICE_BAND = (0.75, 0.95)


class ConfusionMatrix:
    """6 x 6 pixel counts; ``counts[g, p]`` = ground truth ``g`` predicted as ``p``."""

    def __init__(self, counts=None):
        if counts is None:
            counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
        counts = np.asarray(counts)
        if counts.shape != (NUM_CLASSES, NUM_CLASSES) or (counts < 0).any():
            raise ValueError("counts must be a nonnegative 6x6 array")
        self.counts = counts.astype(np.int64)

    @property
    def total(self):
        return int(self.counts.sum())

    def accumulate(self, pred, gt):
        return confusion_accumulate(self, pred, gt)

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix(total={self.total})"


def confusion_accumulate(cm, pred, gt):
    pred = check_label_map(pred, "pred")
    gt = check_label_map(gt, "gt")
    check_same_shape(pred, gt, "pred/gt")
    flat = gt.astype(np.int64).ravel() * NUM_CLASSES + pred.astype(np.int64).ravel()
    add = np.bincount(flat, minlength=NUM_CLASSES * NUM_CLASSES).reshape(NUM_CLASSES, NUM_CLASSES)
    return ConfusionMatrix(cm.counts + add)


def confusion_matrix(preds, gts):
    cm = ConfusionMatrix()
    for p, g in zip(preds, gts):
        cm = confusion_accumulate(cm, p, g)
    return cm


def per_class_iou(cm):
    """IoU per class; ``nan`` where the class is absent from both pred and gt."""
    c = cm.counts
    tp = np.diag(c).astype(np.float64)
    union = c.sum(axis=1) + c.sum(axis=0) - np.diag(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, tp / union, np.nan)


@dataclass
class SegmentationReport:
    per_class_iou: list
    per_class_accuracy: list
    per_class_f1: list
    mean_iou: float
    mean_accuracy: float
    mean_f1: float
    excluded_classes: list
    average: str = "macro"

    def to_dict(self):
        def clean(values):
            return [None if np.isnan(v) else float(v) for v in values]

        return {
            "classes": list(CLASS_NAMES),
            "per_class_iou": clean(self.per_class_iou),
            "per_class_accuracy": clean(self.per_class_accuracy),
            "per_class_f1": clean(self.per_class_f1),
            "mean_iou": self.mean_iou,
            "mean_accuracy": self.mean_accuracy,
            "mean_f1": self.mean_f1,
            "excluded_classes": list(self.excluded_classes),
            "average": self.average,
        }


def summarize(cm, average="macro"):
    """Mean IoU, mean accuracy (recall) and mean F1 over defined classes.

    A class is defined for IoU/F1 when it occurs in pred or gt, and for
    accuracy when it occurs in gt. ``average="micro"`` replaces mean F1 with
    the pooled (micro) F1, which for single-label pixels is overall accuracy.
    """
    if average not in ("macro", "micro"):
        raise ValueError(f"average must be 'macro' or 'micro', got {average!r}")
    c = cm.counts
    if c.sum() == 0:
        raise ValueError("cannot summarize an empty confusion matrix")
    tp = np.diag(c).astype(np.float64)
    rows = c.sum(axis=1).astype(np.float64)
    cols = c.sum(axis=0).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(rows + cols - tp > 0, tp / (rows + cols - tp), np.nan)
        acc = np.where(rows > 0, tp / rows, np.nan)
        f1 = np.where(rows + cols > 0, 2 * tp / (rows + cols), np.nan)
    defined = ~np.isnan(iou)
    mean_f1 = float(np.nanmean(f1)) if average == "macro" else float(tp.sum() / c.sum())
    return SegmentationReport(
        per_class_iou=iou.tolist(),
        per_class_accuracy=acc.tolist(),
        per_class_f1=f1.tolist(),
        mean_iou=float(np.nanmean(iou)),
        mean_accuracy=float(np.nanmean(acc)),
        mean_f1=mean_f1,
        excluded_classes=[CLASS_NAMES[i] for i in np.flatnonzero(~defined)],
        average=average,
    )


def dice_class(a, b, cls):
    """Dice of the ``cls`` masks of two label maps.

    Returns ``(value, empty)``. Both masks empty gives 1.0, exactly one empty
    gives 0.0; ``empty`` is True in both cases.
    """
    a = check_label_map(a, "a")
    b = check_label_map(b, "b")
    check_same_shape(a, b, "label")
    cls = check_class_index(cls)
    ma, mb = class_mask(a, cls), class_mask(b, cls)
    na, nb = int(ma.sum()), int(mb.sum())
    if na == 0 and nb == 0:
        return 1.0, True
    if na == 0 or nb == 0:
        return 0.0, True
    return 2.0 * int((ma & mb).sum()) / (na + nb), False


def parse_roi(roi):
    if roi is None:
        return (SNOW,)
    if isinstance(roi, str):
        roi = [r for r in roi.split(",") if r.strip()]
    classes = tuple(dict.fromkeys(parse_class(r) for r in roi))
    if not classes:
        raise ValueError("ROI class set must not be empty")
    return classes


@dataclass
class DiceReport:
    image_id: str
    roi: tuple
    dice: dict
    empty: dict

    def to_dict(self):
        return {
            "image_id": self.image_id,
            "roi": [CLASS_NAMES[c] for c in self.roi],
            "dice": {CLASS_NAMES[c]: self.dice[c] for c in self.roi},
            "empty": {CLASS_NAMES[c]: self.empty[c] for c in self.roi},
        }


def dice_report(drl, dfl, roi=None, image_id=""):
    roi = parse_roi(roi)
    dice, empty = {}, {}
    for c in roi:
        dice[c], empty[c] = dice_class(drl, dfl, c)
    return DiceReport(image_id, roi, dice, empty)


@dataclass
class DiceBatch:
    reports: list = field(default_factory=list)

    def __len__(self):
        return len(self.reports)

    def values(self, cls=SNOW):
        return np.array([r.dice[cls] for r in self.reports], dtype=np.float64)

    def summary(self):
        if not self.reports:
            raise ValueError("empty Dice batch")
        out = {}
        for c in self.reports[0].roi:
            v = self.values(c)
            out[CLASS_NAMES[c]] = {
                "mean": float(v.mean()),
                "median": float(np.median(v)),
                "min": float(v.min()),
                "max": float(v.max()),
                "flagged": int(sum(r.empty[c] for r in self.reports)),
            }
        return out

    def to_dict(self):
        return {"images": [r.to_dict() for r in self.reports], "summary": self.summary()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["image_id", "class", "dice", "empty"])
        for r in self.reports:
            for c in r.roi:
                writer.writerow([r.image_id, CLASS_NAMES[c], repr(float(r.dice[c])), int(r.empty[c])])
        return buf.getvalue()


def dice_batch(real_labels, fake_labels, roi=None, ids=None):
    real_labels, fake_labels = list(real_labels), list(fake_labels)
    if len(real_labels) != len(fake_labels):
        raise ValueError("real and fake label lists differ in length")
    ids = ids or [str(i) for i in range(len(real_labels))]
    return DiceBatch([dice_report(r, f, roi, i) for r, f, i in zip(real_labels, fake_labels, ids)])
