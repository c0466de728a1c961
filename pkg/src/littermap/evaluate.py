"""Match predictions to ground truth and compute precision/recall.

Matching is greedy, score-descending, one-to-one, and category-blind: a
prediction that lands on any truth box counts, whatever it was labeled.
True negatives are deliberately never tallied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .annotations import CocoDocument, consolidate, filter_by_confidence
from .config import PipelineConfig
from .errors import ImageSetMismatch, UndefinedMetric


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MatchedPair:
    prediction_id: object
    truth_id: object
    iou: float


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple
    unmatched_predictions: tuple  # prediction ids
    unmatched_truths: tuple  # truth ids


def iou(box_a: Sequence[float], box_b: Sequence[float]) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise ValueError("boxes must have positive extent")
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    return inter / (aw * ah + bw * bh - inter)


def match_detections(predictions, truths, iou_threshold: float) -> MatchResult:
    """Greedy one-to-one matching within a single image's coordinate frame.

    Predictions are visited in descending score (ties by ascending
    annotation id); each claims the unclaimed truth with the highest IoU at
    or above the threshold (IoU ties by ascending truth id).  Deterministic
    and independent of input ordering.
    """
    ordered_preds = sorted(predictions, key=lambda d: (-d.score, d.annotation_id))
    ordered_truths = sorted(truths, key=lambda d: d.annotation_id)

    claimed = set()
    pairs = []
    unmatched_preds = []
    for pred in ordered_preds:
        best = None
        best_iou = 0.0
        for truth in ordered_truths:
            if truth.annotation_id in claimed:
                continue
            overlap = iou(pred.bbox, truth.bbox)
            if overlap >= iou_threshold and overlap > best_iou:
                best = truth
                best_iou = overlap
        if best is None:
            unmatched_preds.append(pred.annotation_id)
        else:
            claimed.add(best.annotation_id)
            pairs.append(MatchedPair(pred.annotation_id, best.annotation_id, best_iou))
    unmatched_truths = [t.annotation_id for t in ordered_truths if t.annotation_id not in claimed]
    return MatchResult(tuple(pairs), tuple(unmatched_preds), tuple(unmatched_truths))


def confusion(match: MatchResult) -> ConfusionCounts:
    return ConfusionCounts(
        tp=len(match.pairs),
        fp=len(match.unmatched_predictions),
        fn=len(match.unmatched_truths),
    )


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise UndefinedMetric("no predictions: precision undefined")
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetric("no ground truth: recall undefined")
    return c.tp / (c.tp + c.fn)


@dataclass(frozen=True)
class ClassCounts:
    target_class: str
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvaluationReport:
    dataset: str
    threshold: float
    iou_threshold: float
    counts: ConfusionCounts
    precision: Optional[float]  # None when undefined (no predictions)
    recall: Optional[float]  # None when undefined (no ground truth)
    per_class: tuple

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "threshold": self.threshold,
            "iou_threshold": self.iou_threshold,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "precision": self.precision,
            "recall": self.recall,
            "per_class": [
                {"class": c.target_class, "tp": c.tp, "fp": c.fp, "fn": c.fn}
                for c in self.per_class
            ],
        }


def evaluate_report(pred_doc: CocoDocument, truth_doc: CocoDocument,
                    cfg: PipelineConfig, dataset: str = "") -> EvaluationReport:
    """Threshold, match per image, aggregate counts, compute the metrics.

    Per-class rows are informational only (matching itself ignores
    categories): matched and unmatched predictions are tallied under the
    prediction's consolidated class, missed truths under the truth's.
    """
    truth_ids = truth_doc.image_ids()
    missing = sorted((str(i) for i in pred_doc.image_ids() - truth_ids))
    if missing:
        raise ImageSetMismatch(f"prediction images absent from truth document: {missing[:5]}")

    preds = filter_by_confidence(pred_doc.detections, cfg.confidence_threshold)
    preds_by_image = _group_by_image(preds)
    truths_by_image = _group_by_image(truth_doc.detections)

    mapping = consolidate(truth_doc.taxonomy)
    pred_class = {d.annotation_id: mapping.target_for_supercategory(
        pred_doc.taxonomy.supercategory_of(d.category_id)) for d in preds}
    truth_class = {d.annotation_id: mapping.target_for_supercategory(
        truth_doc.taxonomy.supercategory_of(d.category_id)) for d in truth_doc.detections}

    total = ConfusionCounts(0, 0, 0)
    class_rows = {name: [0, 0, 0] for name in mapping.target_classes}
    for image_id in sorted(truth_ids, key=str):
        match = match_detections(preds_by_image.get(image_id, ()),
                                 truths_by_image.get(image_id, ()),
                                 cfg.iou_threshold)
        total = total + confusion(match)
        for pair in match.pairs:
            class_rows.setdefault(pred_class[pair.prediction_id], [0, 0, 0])[0] += 1
        for pid in match.unmatched_predictions:
            class_rows.setdefault(pred_class[pid], [0, 0, 0])[1] += 1
        for tid in match.unmatched_truths:
            class_rows.setdefault(truth_class[tid], [0, 0, 0])[2] += 1

    try:
        p = precision(total)
    except UndefinedMetric:
        p = None
    try:
        r = recall(total)
    except UndefinedMetric:
        r = None
    order = list(mapping.target_classes) + sorted(set(class_rows) - set(mapping.target_classes))
    per_class = tuple(ClassCounts(name, *class_rows[name]) for name in order)
    return EvaluationReport(
        dataset=dataset,
        threshold=cfg.confidence_threshold,
        iou_threshold=cfg.iou_threshold,
        counts=total,
        precision=p,
        recall=r,
        per_class=per_class,
    )


def _group_by_image(detections):
    groups = {}
    for det in detections:
        groups.setdefault(det.image_id, []).append(det)
    return groups
