#!/usr/bin/env python3
"""Reproduce the published precision/recall numbers from engineered count
fixtures (no detector involved): 145/35/52 for the smartphone survey and
1/98/30 for the street-imagery survey, evaluated at the 30% confidence
threshold and IoU 0.5.

Usage: python scripts/reproduce_metrics.py
"""

import json
import sys
import tempfile
from pathlib import Path

from littermap.cli import main


def grid_positions(n_images, x_range, box=20):
    for image_id in range(1, n_images + 1):
        for y in range(10, 450 - box, box + 10):
            for x in range(x_range[0], x_range[1] - box, box + 10):
                yield image_id, x, y


def build_fixture(n_images, tp, fp, fn, box=20):
    images = [{"id": i + 1, "file_name": f"img_{i:04d}.jpg", "width": 640, "height": 480}
              for i in range(n_images)]
    categories = [{"id": c + 1, "name": f"cat{c + 1}", "supercategory": f"Super{c + 1}"}
                  for c in range(3)]

    truth, preds = [], []
    left = grid_positions(n_images, (10, 300), box)
    for k in range(tp + fn):
        image_id, x, y = next(left)
        truth.append({"id": k + 1, "image_id": image_id, "category_id": (k % 3) + 1,
                      "bbox": [x, y, box, box], "score": 1.0})
    for k in range(tp):  # exact copies of the first tp truth boxes
        t = truth[k]
        preds.append({**t, "score": 0.9})
    right = grid_positions(n_images, (400, 630), box)
    for k in range(fp):  # disjoint region: guaranteed false positives
        image_id, x, y = next(right)
        preds.append({"id": tp + k + 1, "image_id": image_id, "category_id": (k % 3) + 1,
                      "bbox": [x, y, box, box], "score": 0.8})

    pred_doc = {"images": images, "annotations": preds, "categories": categories}
    truth_doc = {"images": images, "annotations": truth, "categories": categories}
    return pred_doc, truth_doc


def evaluate(name, n_images, tp, fp, fn):
    pred_doc, truth_doc = build_fixture(n_images, tp, fp, fn)
    with tempfile.TemporaryDirectory() as tmp:
        pred_path = Path(tmp) / "pred.json"
        truth_path = Path(tmp) / "truth.json"
        pred_path.write_text(json.dumps(pred_doc))
        truth_path.write_text(json.dumps(truth_doc))
        print(f"--- {name}: {n_images} images, counts ({tp}, {fp}, {fn}) ---")
        code = main(["evaluate", "--pred", str(pred_path), "--truth", str(truth_path),
                     "--dataset", name])
        if code != 0:
            sys.exit(f"evaluation failed with exit code {code}")


if __name__ == "__main__":
    evaluate("smartphone", n_images=150, tp=145, fp=35, fn=52)
    evaluate("street-imagery", n_images=200, tp=1, fp=98, fn=30)
