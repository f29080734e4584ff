"""STL mesh loader and writer.

STL comes in 2 flavors:
    Binary: 80-byte header, little-endian uint32 triangle count, then one
    50-byte record per triangle (normal, three vertices, attribute word).
    ASCII: ``solid`` / ``facet normal`` / ``outer loop`` / ``vertex`` lines.

Real binary files sometimes begin with ``solid`` too, so a file is read as
ASCII only when it starts with ``solid`` and actually parses as ASCII.
One that fails and holds NUL or non-ASCII bytes is read as binary.
Stored normals are ignored. Triangles are not welded: each facet contributes
its own three vertices. Degenerate facets are dropped with a warning.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from geomesh.mesh import TriangleMesh
from utils.errors import DataError

logger = logging.getLogger(__name__)

HEADER_SIZE = 80
RECORD_SIZE = 50
BINARY_RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("vertices", "<f4", (3, 3)),
    ("attribute", "<u2"),
])
assert BINARY_RECORD.itemsize == RECORD_SIZE


class EmptyInput(DataError):
    code = "STL_EMPTY_INPUT"


class TruncatedFile(DataError):
    code = "STL_TRUNCATED"


class StlSyntaxError(DataError):
    code = "STL_SYNTAX"

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}", line=line)
        self.line = line


def parse_stl(data: bytes, name: str = "") -> TriangleMesh:
    """Parse a complete binary or ASCII STL file image."""
    if not data:
        raise EmptyInput("STL input is empty")
    if data[:5].lower() == b"solid":
        try:
            return _parse_ascii(data, name)
        except (StlSyntaxError, UnicodeDecodeError) as ascii_error:
            if _binary_size_consistent(data) or (_not_text(data, ascii_error) and len(data) >= HEADER_SIZE + 4):
                logger.debug(f"'{name}' starts with 'solid' but is binary")
                return _parse_binary(data, name)
            if isinstance(ascii_error, UnicodeDecodeError):
                raise StlSyntaxError("file is neither valid ASCII nor binary STL", line=1) from ascii_error
            raise
    return _parse_binary(data, name)


def _not_text(data: bytes, error: Exception) -> bool:
    return isinstance(error, UnicodeDecodeError) or b"\0" in data


def _binary_size_consistent(data: bytes) -> bool:
    if len(data) < HEADER_SIZE + 4:
        return False
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    return len(data) >= HEADER_SIZE + 4 + RECORD_SIZE * count


def _parse_binary(data: bytes, name: str) -> TriangleMesh:
    if len(data) < HEADER_SIZE + 4:
        raise TruncatedFile(f"binary STL needs at least {HEADER_SIZE + 4} bytes, got {len(data)}")
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    expected = HEADER_SIZE + 4 + RECORD_SIZE * count
    if len(data) < expected:
        raise TruncatedFile(
            f"binary STL declares {count} triangles ({expected} bytes) but has {len(data)} bytes"
        )
    if len(data) > expected:
        logger.warning(f"Ignoring {len(data) - expected} trailing byte(s) after STL '{name}'")
    records = np.frombuffer(data, dtype=BINARY_RECORD, count=count, offset=HEADER_SIZE + 4)
    corners = records["vertices"].astype(np.float64)
    return _mesh_from_corners(corners, name)


def _parse_ascii(data: bytes, name: str) -> TriangleMesh:
    text = data.decode("ascii")
    corners: list[list[float]] = []
    state = "start"
    facet: list[list[float]] = []
    line_no = 0
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        tokens = raw_line.split()
        if not tokens:
            continue
        keyword = tokens[0].lower()
        if state in ("start", "between") and keyword == "solid":
            state = "solid"
        elif state == "solid" and keyword == "facet":
            if len(tokens) != 5 or tokens[1].lower() != "normal":
                raise StlSyntaxError("expected 'facet normal nx ny nz'", line_no)
            _floats(tokens[2:], line_no)
            state = "facet"
        elif state == "solid" and keyword == "endsolid":
            state = "between"
        elif state == "facet" and keyword == "outer":
            if len(tokens) != 2 or tokens[1].lower() != "loop":
                raise StlSyntaxError("expected 'outer loop'", line_no)
            state = "loop"
            facet = []
        elif state == "loop" and keyword == "vertex":
            if len(tokens) != 4:
                raise StlSyntaxError("expected 'vertex x y z'", line_no)
            if len(facet) == 3:
                raise StlSyntaxError("more than three vertices in facet", line_no)
            facet.append(_floats(tokens[1:], line_no))
        elif state == "loop" and keyword == "endloop":
            if len(facet) != 3:
                raise StlSyntaxError(f"facet has {len(facet)} vertices, expected 3", line_no)
            corners.extend(facet)
            state = "endloop"
        elif state == "endloop" and keyword == "endfacet":
            state = "solid"
        else:
            raise StlSyntaxError(f"unexpected '{tokens[0]}'", line_no)
    if state != "between":
        raise StlSyntaxError("missing 'endsolid'", line_no + 1)
    return _mesh_from_corners(np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3), name)


def _floats(tokens: list[str], line_no: int) -> list[float]:
    try:
        return [float(token) for token in tokens]
    except ValueError:
        raise StlSyntaxError(f"bad number in {' '.join(tokens)!r}", line_no) from None


def _mesh_from_corners(corners: np.ndarray, name: str) -> TriangleMesh:
    corners = corners.reshape(-1, 3, 3)
    area2 = np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)
    repeated = (
        np.all(corners[:, 0] == corners[:, 1], axis=1)
        | np.all(corners[:, 1] == corners[:, 2], axis=1)
        | np.all(corners[:, 0] == corners[:, 2], axis=1)
    )
    keep = (area2 > 0) & ~repeated & np.all(np.isfinite(corners), axis=(1, 2))
    dropped = int(len(corners) - keep.sum())
    if dropped:
        logger.warning(f"Dropped {dropped} degenerate triangle(s) from STL '{name}'")
    kept = corners[keep]
    vertices = kept.reshape(-1, 3)
    triangles = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices, triangles, name, dropped_degenerate=dropped)


def serialize_stl(mesh: TriangleMesh, header: bytes = b"roomsynth binary STL") -> bytes:
    """Binary STL image. The header never starts with ``solid``."""
    if header[:5].lower() == b"solid":
        raise ValueError("binary STL header must not start with 'solid'")
    records = np.zeros(mesh.triangle_count, dtype=BINARY_RECORD)
    records["normal"] = mesh.face_normals().astype(np.float32)
    records["vertices"] = mesh.corners().astype(np.float32)
    return header.ljust(HEADER_SIZE, b"\0")[:HEADER_SIZE] + struct.pack("<I", mesh.triangle_count) + records.tobytes()


def serialize_stl_ascii(mesh: TriangleMesh) -> bytes:
    """ASCII STL image using shortest round-trip decimal formatting."""
    solid = mesh.name or "mesh"
    lines = [f"solid {solid}"]
    for normal, tri in zip(mesh.face_normals(), mesh.corners()):
        lines.append(f"  facet normal {float(normal[0])!r} {float(normal[1])!r} {float(normal[2])!r}")
        lines.append("    outer loop")
        for vertex in tri:
            lines.append(f"      vertex {float(vertex[0])!r} {float(vertex[1])!r} {float(vertex[2])!r}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {solid}")
    return ("\n".join(lines) + "\n").encode("ascii")


def load_stl(path: str | Path) -> TriangleMesh:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read STL {path}: {e}") from e
    return parse_stl(data, name=path.stem)
