"""Output writers: OBJ surface meshes, NDJSON result records, PGM
heightmaps and WKT polylines.

All writers are deterministic byte-for-byte for the same inputs so that
runs with different thread counts can be diffed directly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geom import SurfaceMesh, face_frame, triangulate_ring


def _fmt(v: float) -> str:
    # -0.0 prints as 0.0 so output does not depend on rounding direction
    return f"{v + 0.0:.6f}"


def write_obj(path, meshes, triangulate: bool = False) -> None:
    """Write named meshes to one OBJ file.

    ``meshes`` is an iterable of ``(name, SurfaceMesh)``; each becomes an
    ``o`` group.  Faces are emitted as polygons unless ``triangulate``.
    """
    lines = []
    offset = 0
    for name, mesh in meshes:
        lines.append(f"o {name}")
        for v in mesh.vertices:
            lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
        for fi, face in enumerate(mesh.faces):
            if triangulate and len(face) > 3:
                pts = mesh.vertices[list(face)]
                origin, u, w, _ = face_frame(pts)
                flat = (pts - origin) @ np.stack([u, w], axis=1)
                for ta, tb, tc in triangulate_ring(flat):
                    ids = (face[ta], face[tb], face[tc])
                    lines.append("f " + " ".join(str(i + 1 + offset) for i in ids))
            else:
                lines.append("f " + " ".join(str(i + 1 + offset) for i in face))
        offset += len(mesh.vertices)
    Path(path).write_text("\n".join(lines) + "\n")


def write_ndjson(path, records) -> None:
    """One JSON object per line, keys sorted."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, default=_jsonable))
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_pgm(path, heightmap) -> None:
    """16-bit big-endian P5 image plus a JSON sidecar with the georeference.

    Invalid pixels map to gray value 0; valid heights are scaled into
    [1, 65535].  The sidecar stores origin, resolution and the z range so
    the raster can be mapped back to meters.
    """
    path = Path(path)
    z = heightmap.filled()
    valid = heightmap.valid
    h, w = z.shape
    img = np.zeros((h, w), dtype=np.uint16)
    meta = {
        "origin": [float(heightmap.origin[0]), float(heightmap.origin[1])],
        "resolution": float(heightmap.resolution),
        "z_min": None,
        "z_max": None,
    }
    if valid.any():
        lo = float(z[valid].min())
        hi = float(z[valid].max())
        meta["z_min"] = lo
        meta["z_max"] = hi
        span = hi - lo
        scaled = np.ones(z.shape)
        if span > 0:
            scaled = 1.0 + (z - lo) / span * 65534.0
        img[valid] = np.clip(scaled[valid], 1, 65535).astype(np.uint16)
    # row 0 of the array is the southernmost row; flip so the image
    # reads north-up in ordinary viewers
    img = img[::-1]
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    path.write_bytes(header + img.astype(">u2").tobytes())
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(meta, sort_keys=True) + "\n"
    )


def write_wkt_lines(path, polylines) -> None:
    """One LINESTRING per polyline, coordinates to millimeter precision."""
    lines = []
    for pl in polylines:
        coords = ", ".join(f"{_fmt(p[0])} {_fmt(p[1])}" for p in np.asarray(pl))
        lines.append(f"LINESTRING ({coords})")
    Path(path).write_text("\n".join(lines) + "\n")


def write_candidates_obj(path, cs) -> None:
    """Dump every candidate face for inspection, grouped by kind."""
    lines = []
    for v in cs.vertices:
        lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    order = sorted(range(len(cs.faces)), key=lambda i: (cs.faces[i].kind, i))
    for fi in order:
        ring = cs.rings[fi]
        lines.append(f"o {cs.faces[fi].kind}_{fi}")
        lines.append("f " + " ".join(str(i + 1) for i in ring))
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path):
    """Minimal OBJ reader for round-trip tests; returns one SurfaceMesh."""
    verts = []
    faces = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append(tuple(int(tok.split("/")[0]) - 1 for tok in parts[1:]))
    return SurfaceMesh(np.asarray(verts, dtype=float), faces)
