"""Map artifacts: GeoJSON feature collections, grid binning, and a
self-contained HTML viewer.

Everything here is deterministic: features are sorted by
(image_id, annotation_id), JSON is emitted with fixed separators, and the
HTML embeds its data inline so the page needs no network access.
"""

from __future__ import annotations

import html as _html
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .exif import GeoPoint
from .geolocate import GeoDetection


def to_geojson(points: Iterable[GeoDetection]) -> dict:
    """RFC 7946 FeatureCollection of Point features, [lon, lat] ordered."""
    features = []
    for geo in sorted(points, key=lambda g: (str(g.image_id), str(g.annotation_id))):
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [geo.position.lon_deg, geo.position.lat_deg],
            },
            "properties": {
                "class": geo.target_class,
                "score": geo.score,
                "image_id": geo.image_id,
                "annotation_id": geo.annotation_id,
                "bearing_deg": geo.bearing_deg,
                "distance_m": geo.distance_m,
                "method": geo.method,
            },
        })
    return {"type": "FeatureCollection", "features": features}


def from_geojson(doc: dict) -> list:
    """Rebuild GeoDetections from a point FeatureCollection written by to_geojson."""
    if doc.get("type") != "FeatureCollection":
        raise ValueError("not a FeatureCollection")
    points = []
    for feature in doc.get("features", []):
        geometry = feature.get("geometry") or {}
        if geometry.get("type") != "Point":
            continue
        lon, lat = geometry["coordinates"][:2]
        props = feature.get("properties") or {}
        points.append(GeoDetection(
            image_id=props.get("image_id", ""),
            annotation_id=props.get("annotation_id", ""),
            target_class=props.get("class", ""),
            score=float(props.get("score", 1.0)),
            bearing_deg=float(props.get("bearing_deg", 0.0)),
            distance_m=float(props.get("distance_m", 0.0)),
            method=props.get("method", ""),
            position=GeoPoint(lat, lon),
        ))
    return points


def geojson_dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class GridCell:
    row: int
    col: int
    bounds: tuple  # (SW, SE, NE, NW) GeoPoints
    counts: dict  # target class -> count
    total: int


def cell_index(lat: float, lon: float, origin, cell_m: float, radius_m: float) -> tuple:
    """(row, col) of the grid cell containing the point.

    Local equirectangular projection about the origin; a point exactly on a
    cell boundary belongs to the higher-index cell.
    """
    lat0, lon0 = origin
    x = radius_m * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = radius_m * math.radians(lat - lat0)
    return (math.floor(y / cell_m), math.floor(x / cell_m))


def grid_bin(points: Sequence[GeoDetection], cell_m: float, origin: GeoPoint,
             radius_m: float = 6371008.8) -> list:
    """Bin points into cell_m x cell_m cells around origin; cells sorted by index."""
    if cell_m <= 0:
        raise ValueError("cell_m must be positive")
    origin_pair = (origin.lat_deg, origin.lon_deg)
    cells: dict = {}
    for geo in points:
        index = cell_index(geo.position.lat_deg, geo.position.lon_deg, origin_pair, cell_m, radius_m)
        cells.setdefault(index, {})
        cells[index][geo.target_class] = cells[index].get(geo.target_class, 0) + 1

    out = []
    for (row, col) in sorted(cells):
        counts = cells[(row, col)]
        out.append(GridCell(
            row=row,
            col=col,
            bounds=_cell_bounds(row, col, origin_pair, cell_m, radius_m),
            counts=dict(sorted(counts.items())),
            total=sum(counts.values()),
        ))
    return out


def _cell_bounds(row, col, origin, cell_m, radius_m):
    lat0, lon0 = origin

    def _invert(x, y):
        lon = lon0 + math.degrees(x / (radius_m * math.cos(math.radians(lat0))))
        lat = lat0 + math.degrees(y / radius_m)
        return GeoPoint(lat, lon)

    x0, y0 = col * cell_m, row * cell_m
    x1, y1 = x0 + cell_m, y0 + cell_m
    return (_invert(x0, y0), _invert(x1, y0), _invert(x1, y1), _invert(x0, y1))


def grid_to_geojson(cells: Sequence[GridCell]) -> dict:
    """Grid cells as Polygon features with count properties."""
    features = []
    for cell in cells:
        ring = [[p.lon_deg, p.lat_deg] for p in cell.bounds]
        ring.append(ring[0])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {
                "row": cell.row,
                "col": cell.col,
                "total": cell.total,
                "counts": cell.counts,
            },
        })
    return {"type": "FeatureCollection", "features": features}


_PALETTE = ("#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
            "#a65628", "#f781bf", "#17becf", "#bcbd22", "#999999")


def render_html(geojson_doc: dict, title: str = "Litter map") -> str:
    """One self-contained HTML page: embedded data, pannable/zoomable canvas.

    No external fetches; identical input yields byte-identical output.
    """
    classes = sorted({
        (f.get("properties") or {}).get("class", "")
        for f in geojson_doc.get("features", [])
        if (f.get("geometry") or {}).get("type") == "Point"
    })
    colors = {name: _PALETTE[i % len(_PALETTE)] for i, name in enumerate(classes)}
    data = json.dumps(geojson_doc, separators=(",", ":"), sort_keys=True).replace("</", "<\\/")
    color_json = json.dumps(colors, separators=(",", ":"), sort_keys=True)
    n_features = len(geojson_doc.get("features", []))
    legend = "".join(
        f'<span class="key"><i style="background:{colors[name]}"></i>{_html.escape(name or "(unlabeled)")}</span>'
        for name in classes
    )
    return _HTML_TEMPLATE.format(
        title=_html.escape(title),
        count=n_features,
        legend=legend,
        data=data,
        colors=color_json,
    )


_HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ margin: 0; font: 14px/1.4 sans-serif; background: #fafafa; }}
header {{ padding: 8px 12px; background: #235; color: #fff; }}
header h1 {{ font-size: 16px; margin: 0; display: inline; }}
header .meta {{ margin-left: 12px; opacity: 0.8; }}
#legend {{ padding: 6px 12px; background: #fff; border-bottom: 1px solid #ddd; }}
#legend .key {{ margin-right: 14px; white-space: nowrap; }}
#legend i {{ display: inline-block; width: 10px; height: 10px; border-radius: 5px;
             margin-right: 4px; }}
#map {{ display: block; width: 100vw; height: calc(100vh - 70px); cursor: grab; }}
</style>
</head>
<body>
<header><h1>{title}</h1><span class="meta">{count} features &middot; drag to pan, wheel to zoom</span></header>
<div id="legend">{legend}</div>
<canvas id="map"></canvas>
<script id="data" type="application/json">{data}</script>
<script>
"use strict";
var DATA = JSON.parse(document.getElementById("data").textContent);
var COLORS = {colors};
var canvas = document.getElementById("map");
var ctx = canvas.getContext("2d");

function collect() {{
  var pts = [], polys = [];
  (DATA.features || []).forEach(function (f) {{
    var g = f.geometry || {{}};
    if (g.type === "Point") pts.push({{ lon: g.coordinates[0], lat: g.coordinates[1],
                                        cls: (f.properties || {{}}).class || "" }});
    if (g.type === "Polygon") polys.push({{ ring: g.coordinates[0],
                                            total: (f.properties || {{}}).total || 0 }});
  }});
  return {{ pts: pts, polys: polys }};
}}
var SHAPES = collect();

function bbox() {{
  var b = {{ minx: Infinity, miny: Infinity, maxx: -Infinity, maxy: -Infinity }};
  function eat(lon, lat) {{
    if (lon < b.minx) b.minx = lon; if (lon > b.maxx) b.maxx = lon;
    if (lat < b.miny) b.miny = lat; if (lat > b.maxy) b.maxy = lat;
  }}
  SHAPES.pts.forEach(function (p) {{ eat(p.lon, p.lat); }});
  SHAPES.polys.forEach(function (p) {{ p.ring.forEach(function (c) {{ eat(c[0], c[1]); }}); }});
  if (!isFinite(b.minx)) {{ b.minx = -1; b.maxx = 1; b.miny = -1; b.maxy = 1; }}
  if (b.maxx === b.minx) {{ b.minx -= 0.0005; b.maxx += 0.0005; }}
  if (b.maxy === b.miny) {{ b.miny -= 0.0005; b.maxy += 0.0005; }}
  return b;
}}

var view = {{ scale: 1, ox: 0, oy: 0 }};
function resetView() {{
  var b = bbox();
  var kx = (canvas.width * 0.9) / (b.maxx - b.minx);
  var ky = (canvas.height * 0.9) / (b.maxy - b.miny);
  view.scale = Math.min(kx, ky);
  view.ox = canvas.width / 2 - view.scale * (b.minx + b.maxx) / 2;
  view.oy = canvas.height / 2 + view.scale * (b.miny + b.maxy) / 2;
}}
function sx(lon) {{ return view.ox + view.scale * lon; }}
function sy(lat) {{ return view.oy - view.scale * lat; }}

function draw() {{
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  SHAPES.polys.forEach(function (p) {{
    ctx.beginPath();
    p.ring.forEach(function (c, i) {{
      if (i === 0) ctx.moveTo(sx(c[0]), sy(c[1])); else ctx.lineTo(sx(c[0]), sy(c[1]));
    }});
    ctx.closePath();
    ctx.fillStyle = "rgba(228,26,28," + Math.min(0.75, 0.08 + p.total * 0.03) + ")";
    ctx.fill();
    ctx.strokeStyle = "#88a";
    ctx.stroke();
  }});
  SHAPES.pts.forEach(function (p) {{
    ctx.beginPath();
    ctx.arc(sx(p.lon), sy(p.lat), 4, 0, 2 * Math.PI);
    ctx.fillStyle = COLORS[p.cls] || "#333";
    ctx.fill();
    ctx.strokeStyle = "#fff";
    ctx.stroke();
  }});
}}

function resize() {{
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  resetView();
  draw();
}}
window.addEventListener("resize", resize);

var drag = null;
canvas.addEventListener("mousedown", function (e) {{ drag = {{ x: e.clientX, y: e.clientY }}; }});
window.addEventListener("mouseup", function () {{ drag = null; }});
window.addEventListener("mousemove", function (e) {{
  if (!drag) return;
  view.ox += e.clientX - drag.x;
  view.oy += e.clientY - drag.y;
  drag = {{ x: e.clientX, y: e.clientY }};
  draw();
}});
canvas.addEventListener("wheel", function (e) {{
  e.preventDefault();
  var k = e.deltaY < 0 ? 1.25 : 0.8;
  view.ox = e.offsetX + k * (view.ox - e.offsetX);
  view.oy = e.offsetY + k * (view.oy - e.offsetY);
  view.scale *= k;
  draw();
}});
resize();
</script>
</body>
</html>
"""
