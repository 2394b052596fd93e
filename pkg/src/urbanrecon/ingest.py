"""Point-cloud and footprint I/O plus scene partitioning.

Supported point formats: whitespace ``.xyz`` text and ``.ply`` (ascii or
binary little-endian, with optional ``nx ny nz`` normals and an optional
``instance`` integer label per vertex). Footprints come from GeoJSON or
from ``id;WKT`` line files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidGeometry, ParseError, UnsupportedFormat
from .geom import Polygon2, points_in_polygon, seg_points_distance


@dataclass
class PointCloud:
    """Positions with optional per-point normals and instance labels."""

    xyz: np.ndarray
    normals: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != len(self.xyz):
                raise InvalidGeometry("normals length mismatch")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int32).reshape(-1)
            if len(self.labels) != len(self.xyz):
                raise InvalidGeometry("labels length mismatch")

    def __len__(self):
        return len(self.xyz)


@dataclass(frozen=True)
class Footprint:
    id: str
    polygon: Polygon2


# ---------------------------------------------------------------------------
# point readers


def read_points(path) -> PointCloud:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        return PointCloud(read_xyz(path))
    if suffix == ".ply":
        return read_ply(path)
    raise UnsupportedFormat(f"unknown point format: {path.name}")


def read_xyz(path) -> np.ndarray:
    """Strict whitespace text: exactly three floats per non-empty line."""
    path = Path(path)
    rows = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 values, got {len(parts)}", path=str(path), line=lineno
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ParseError("non-numeric value", path=str(path), line=lineno)
    if not rows:
        return np.zeros((0, 3), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def read_ply(path) -> PointCloud:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise ParseError("missing ply magic", path=str(path), line=1)
        fmt = None
        elements = []  # (name, count, [(prop_name, np_type)]) ; list props flagged
        lineno = 1
        while True:
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise ParseError("unterminated header", path=str(path), line=lineno)
            tokens = raw.decode("ascii", errors="replace").strip().split()
            if not tokens or tokens[0] == "comment":
                continue
            if tokens[0] == "format":
                if tokens[1] == "ascii":
                    fmt = "ascii"
                elif tokens[1] == "binary_little_endian":
                    fmt = "binary"
                else:
                    raise UnsupportedFormat(f"ply format {tokens[1]} not supported")
            elif tokens[0] == "element":
                elements.append([tokens[1], int(tokens[2]), []])
            elif tokens[0] == "property":
                if not elements:
                    raise ParseError("property before element", path=str(path), line=lineno)
                if tokens[1] == "list":
                    elements[-1][2].append((tokens[-1], "list"))
                else:
                    tname = tokens[1]
                    if tname not in _PLY_TYPES:
                        raise UnsupportedFormat(f"ply property type {tname}")
                    elements[-1][2].append((tokens[-1], _PLY_TYPES[tname]))
            elif tokens[0] == "end_header":
                break
            else:
                raise ParseError(f"unknown header line: {tokens[0]}", path=str(path), line=lineno)
        if fmt is None:
            raise ParseError("ply header missing format line", path=str(path))

        cloud = None
        for name, count, props in elements:
            if name == "vertex":
                if any(t == "list" for _, t in props):
                    raise UnsupportedFormat("list property on vertex element")
                cloud = _read_ply_vertices(fh, fmt, count, props, path)
            else:
                _skip_ply_element(fh, fmt, count, props, path)
        if cloud is None:
            raise ParseError("no vertex element", path=str(path))
        return cloud


def _read_ply_vertices(fh, fmt, count, props, path) -> PointCloud:
    names = [n for n, _ in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise ParseError(f"vertex element missing {axis}", path=str(path))
    if fmt == "binary":
        dtype = np.dtype([(n, "<" + t) for n, t in props])
        raw = fh.read(dtype.itemsize * count)
        if len(raw) != dtype.itemsize * count:
            raise ParseError("truncated vertex data", path=str(path))
        data = np.frombuffer(raw, dtype=dtype)
    else:
        rows = []
        got = 0
        while got < count:
            line = fh.readline()
            if not line:
                raise ParseError("truncated vertex data", path=str(path))
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != len(props):
                raise ParseError("vertex row width mismatch", path=str(path))
            rows.append(tokens)
            got += 1
        data = {n: np.array([r[i] for r in rows], dtype=t) for i, (n, t) in enumerate(props)}
    xyz = np.column_stack(
        [np.asarray(data["x"], dtype=np.float64),
         np.asarray(data["y"], dtype=np.float64),
         np.asarray(data["z"], dtype=np.float64)]
    )
    normals = None
    if all(k in names for k in ("nx", "ny", "nz")):
        normals = np.column_stack(
            [np.asarray(data["nx"], dtype=np.float64),
             np.asarray(data["ny"], dtype=np.float64),
             np.asarray(data["nz"], dtype=np.float64)]
        )
    labels = None
    if "instance" in names:
        labels = np.asarray(data["instance"], dtype=np.int32)
    return PointCloud(xyz, normals, labels)


def _skip_ply_element(fh, fmt, count, props, path):
    if fmt == "ascii":
        for _ in range(count):
            if not fh.readline():
                raise ParseError("truncated element data", path=str(path))
        return
    if any(t == "list" for _, t in props):
        raise UnsupportedFormat("cannot skip binary element with list properties")
    itemsize = int(np.dtype([(n, "<" + t) for n, t in props]).itemsize)
    fh.seek(itemsize * count, 1)


def write_ply(path, cloud: PointCloud, binary=True):
    """Round-trip safe writer: float64 coordinates, int32 labels."""
    path = Path(path)
    props = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if cloud.normals is not None:
        props += [("nx", "f8"), ("ny", "f8"), ("nz", "f8")]
    if cloud.labels is not None:
        props.append(("instance", "i4"))
    names = {"f8": "double", "i4": "int"}
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0"]
    header.append(f"element vertex {len(cloud)}")
    header += [f"property {names[t]} {n}" for n, t in props]
    header.append("end_header")
    rec = np.zeros(len(cloud), dtype=np.dtype([(n, "<" + t) for n, t in props]))
    rec["x"], rec["y"], rec["z"] = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    if cloud.normals is not None:
        rec["nx"], rec["ny"], rec["nz"] = (cloud.normals[:, i] for i in range(3))
    if cloud.labels is not None:
        rec["instance"] = cloud.labels
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(rec.tobytes())
        else:
            cols = [rec[n] for n, _ in props]
            for i in range(len(cloud)):
                fh.write(
                    (" ".join(_fmt_ascii(c[i]) for c in cols) + "\n").encode("ascii")
                )


def _fmt_ascii(v):
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# footprint readers


def read_footprints(path) -> list:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".geojson", ".json"):
        feats = _read_geojson(path)
    elif suffix in (".wkt", ".txt", ".csv"):
        feats = _read_wkt_lines(path)
    else:
        raise UnsupportedFormat(f"unknown footprint format: {path.name}")
    seen = set()
    for fp in feats:
        if fp.id in seen:
            raise ParseError(f"duplicate footprint id {fp.id!r}", path=str(path))
        seen.add(fp.id)
    return feats


def _polygon_from_rings(rings, fid):
    try:
        return Polygon2.create(rings[0], holes=rings[1:])
    except InvalidGeometry as exc:
        raise InvalidGeometry(str(exc), feature_id=fid)


def _read_geojson(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid json: {exc.msg}", path=str(path), line=exc.lineno)
    if doc.get("type") != "FeatureCollection":
        raise ParseError("expected a FeatureCollection", path=str(path))
    out = []
    for idx, feat in enumerate(doc.get("features", [])):
        fid = feat.get("id")
        if fid is None:
            fid = (feat.get("properties") or {}).get("id")
        fid = str(fid) if fid is not None else str(idx)
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            out.append(Footprint(fid, _polygon_from_rings(coords, fid)))
        elif gtype == "MultiPolygon":
            for k, rings in enumerate(coords):
                sub = f"{fid}_{k}"
                out.append(Footprint(sub, _polygon_from_rings(rings, sub)))
        else:
            raise ParseError(
                f"feature {fid!r}: unsupported geometry type {gtype}", path=str(path)
            )
    return out


def _read_wkt_lines(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if ";" not in stripped:
                raise ParseError("expected 'id;WKT'", path=str(path), line=lineno)
            fid, wkt = stripped.split(";", 1)
            fid = fid.strip()
            try:
                polys = parse_wkt_polygons(wkt.strip())
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno)
            if len(polys) == 1:
                out.append(Footprint(fid, _polygon_from_rings(polys[0], fid)))
            else:
                for k, rings in enumerate(polys):
                    sub = f"{fid}_{k}"
                    out.append(Footprint(sub, _polygon_from_rings(rings, sub)))
    return out


def parse_wkt_polygons(text) -> list:
    """Parse WKT POLYGON / MULTIPOLYGON into lists of coordinate rings."""
    s = text.strip()
    upper = s.upper()
    if upper.startswith("MULTIPOLYGON"):
        body = s[len("MULTIPOLYGON"):].strip()
        groups = _split_paren_groups(_strip_outer_parens(body))
        return [_parse_rings(g) for g in groups]
    if upper.startswith("POLYGON"):
        body = s[len("POLYGON"):].strip()
        return [_parse_rings(body)]
    raise ValueError("expected POLYGON or MULTIPOLYGON")


def _strip_outer_parens(s):
    s = s.strip()
    if not (s.startswith("(") and s.endswith(")")):
        raise ValueError("malformed WKT parentheses")
    return s[1:-1]


def _split_paren_groups(s):
    """Split 'a),(b' style bodies into balanced top-level groups."""
    groups, depth, start = [], 0, None
    for i, ch in enumerate(s):
        if ch == "(":
            if depth == 0:
                start = i
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                groups.append(s[start : i + 1])
    if depth != 0:
        raise ValueError("unbalanced WKT parentheses")
    return groups


def _parse_rings(body):
    rings = []
    for grp in _split_paren_groups(_strip_outer_parens(body)):
        coords = []
        for pair in _strip_outer_parens(grp).split(","):
            vals = pair.split()
            if len(vals) < 2:
                raise ValueError("coordinate needs x and y")
            coords.append([float(vals[0]), float(vals[1])])
        rings.append(coords)
    if not rings:
        raise ValueError("empty polygon body")
    return rings


# ---------------------------------------------------------------------------
# scene partitioning


def split_by_footprints(xyz, footprints, min_points=30):
    """Assign points to footprints (inside or on boundary).

    Earlier footprints win contested points. Returns ``(assignments,
    skipped)`` where assignments maps footprint id to point indices and
    skipped maps ids with fewer than ``min_points`` to their counts.
    """
    pts = np.asarray(xyz, dtype=float)
    xy = pts[:, :2]
    unassigned = np.ones(len(pts), dtype=bool)
    assignments = {}
    skipped = {}
    for fp in footprints:
        x0, y0, x1, y1 = fp.polygon.bounds()
        cand = np.flatnonzero(
            unassigned
            & (xy[:, 0] >= x0 - 1e-9) & (xy[:, 0] <= x1 + 1e-9)
            & (xy[:, 1] >= y0 - 1e-9) & (xy[:, 1] <= y1 + 1e-9)
        )
        if len(cand) == 0:
            skipped[fp.id] = 0
            continue
        inside = points_in_polygon(xy[cand], fp.polygon) != 0
        chosen = cand[inside]
        if len(chosen) < min_points:
            skipped[fp.id] = int(len(chosen))
            continue
        assignments[fp.id] = chosen
        unassigned[chosen] = False
    return assignments, skipped


def split_by_instance_labels(labels, min_points=30):
    """Group point indices by non-negative instance label."""
    lab = np.asarray(labels)
    assignments = {}
    skipped = {}
    for value in np.unique(lab):
        if value < 0:
            continue
        idx = np.flatnonzero(lab == value)
        if len(idx) < min_points:
            skipped[str(int(value))] = int(len(idx))
        else:
            assignments[str(int(value))] = idx
    return assignments, skipped


def estimate_ground_z(scene_xyz, polygon: Polygon2, collar=2.0, percentile=5.0):
    """Ground height near a footprint: low percentile of z in a collar
    just outside the boundary; falls back to the footprint's own points."""
    pts = np.asarray(scene_xyz, dtype=float)
    xy = pts[:, :2]
    x0, y0, x1, y1 = polygon.bounds()
    box = (
        (xy[:, 0] >= x0 - collar) & (xy[:, 0] <= x1 + collar)
        & (xy[:, 1] >= y0 - collar) & (xy[:, 1] <= y1 + collar)
    )
    cand = np.flatnonzero(box)
    if len(cand) == 0:
        return float(np.percentile(pts[:, 2], percentile)) if len(pts) else 0.0
    membership = points_in_polygon(xy[cand], polygon)
    outside = cand[membership == 0]
    if len(outside):
        near = np.zeros(len(outside), dtype=bool)
        sub = xy[outside]
        for a, b in polygon.edges():
            near |= seg_points_distance(sub, a, b) <= collar
        ring_pts = pts[outside[near]]
        if len(ring_pts) >= 20:
            return float(np.percentile(ring_pts[:, 2], percentile))
    inside = cand[membership != 0]
    if len(inside):
        return float(np.percentile(pts[inside, 2], percentile))
    return float(np.percentile(pts[:, 2], percentile)) if len(pts) else 0.0
