#!/usr/bin/env python3
"""End-to-end demo on synthetic data: generate a scene with known litter
positions, run the real pipeline over it, take two survey snapshots, and
render the map artifacts.

Usage: python scripts/demo_pipeline.py [output_dir]
"""

import json
import os
import sys
from pathlib import Path

from littermap.cli import main


def run(argv):
    print(f"$ littermap {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        sys.exit(f"command failed with exit code {code}")


def demo(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    scene_dir = out_dir / "scene"

    run(["synth", "--seed", "42", "--points", "120", "--out", str(scene_dir)])
    run(["roundtrip", "--scene", str(scene_dir / "scene.json")])

    store = out_dir / "survey.ndjson"
    points = out_dir / "points.geojson"
    for day in ("2026-08-01T09:00:00+00:00", "2026-08-08T09:00:00+00:00"):
        os.environ["LITTERMAP_NOW"] = day
        run(["locate",
             "--detections", str(scene_dir / "detections.json"),
             "--sidecar", str(scene_dir / "sidecar.json"),
             "--out", str(points),
             "--store", str(store)])
    os.environ.pop("LITTERMAP_NOW", None)

    run(["map", "--geo", str(points), "--out", str(out_dir / "detections.html")])
    run(["map", "--store", str(store), "--grid", "50",
         "--out", str(out_dir / "density_grid.geojson")])
    run(["map", "--store", str(store), "--from", "2026-08-08", "--to", "2026-08-08",
         "--out", str(out_dir / "latest_snapshot.html")])

    from littermap.store import query
    by_class = query(store, group_by="class")
    by_run = query(store, group_by="run")
    print("\nsurvey totals by class:", json.dumps(by_class, indent=2, sort_keys=True))
    print("survey totals by run:", json.dumps(by_run, indent=2, sort_keys=True))
    print(f"\nartifacts written under {out_dir}/")


if __name__ == "__main__":
    demo(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out"))
