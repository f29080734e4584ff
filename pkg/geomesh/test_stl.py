import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomesh.mesh import TriangleMesh, box_mesh
from geomesh.stl import (
    EmptyInput,
    StlSyntaxError,
    TruncatedFile,
    load_stl,
    parse_stl,
    serialize_stl,
    serialize_stl_ascii,
)

ONE_FACET_ASCII = b"""solid a
  facet normal 0 0 1
    outer loop
      vertex 0 0 0
      vertex 1 0 0
      vertex 0 1 0
    endloop
  endfacet
endsolid a
"""


def _binary(triangles, declared=None, header=b"test header"):
    triangles = np.asarray(triangles, dtype=np.float32).reshape(-1, 3, 3)
    count = len(triangles) if declared is None else declared
    body = b"".join(struct.pack("<3f", 0, 0, 0) + tri.tobytes() + b"\0\0" for tri in triangles)
    return header.ljust(80, b"\0") + struct.pack("<I", count) + body


def test_binary_single_triangle():
    mesh = parse_stl(_binary([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]]))
    assert mesh.triangle_count == 1
    assert len(mesh.vertices) == 3
    np.testing.assert_array_equal(mesh.corners()[0], [[0, 0, 0], [1, 0, 0], [0, 1, 0]])


def test_ascii_matches_binary():
    ascii_mesh = parse_stl(ONE_FACET_ASCII)
    binary_mesh = parse_stl(_binary([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]]))
    np.testing.assert_array_equal(ascii_mesh.vertices, binary_mesh.vertices)
    np.testing.assert_array_equal(ascii_mesh.triangles, binary_mesh.triangles)


def test_truncated_binary():
    tri = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    data = _binary([tri, tri, tri], declared=10)
    with pytest.raises(TruncatedFile):
        parse_stl(data)


def test_truncated_binary_with_solid_header():
    tri = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    data = _binary([tri, tri, tri], declared=10, header=b"solid exported by a CAD tool")
    with pytest.raises(TruncatedFile):
        parse_stl(data)


def test_empty_input():
    with pytest.raises(EmptyInput):
        parse_stl(b"")


def test_ascii_syntax_error_reports_line():
    broken = ONE_FACET_ASCII.replace(b"outer loop", b"outer hoop")
    with pytest.raises(StlSyntaxError) as excinfo:
        parse_stl(broken)
    assert excinfo.value.line == 3


def test_ascii_missing_endsolid():
    with pytest.raises(StlSyntaxError):
        parse_stl(ONE_FACET_ASCII.replace(b"endsolid a\n", b""))


def test_binary_header_starting_with_solid_is_read_as_binary():
    data = _binary([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], header=b"solid but binary")
    mesh = parse_stl(data)
    assert mesh.triangle_count == 1


def test_degenerate_triangles_dropped():
    good = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    collinear = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
    repeated = [[0, 0, 0], [0, 0, 0], [0, 1, 0]]
    mesh = parse_stl(_binary([good, collinear, repeated]))
    assert mesh.triangle_count == 1
    assert mesh.dropped_degenerate == 2


def test_box_binary_roundtrip_is_bit_exact():
    mesh = box_mesh([0.1, 0.2, 0.3], [1.7, 2.9, 3.3])
    parsed = parse_stl(serialize_stl(mesh))
    np.testing.assert_array_equal(parsed.corners(), mesh.corners().astype(np.float32).astype(np.float64))


def test_ascii_roundtrip():
    mesh = box_mesh([0, 0, 0], [1, 2, 3])
    parsed = parse_stl(serialize_stl_ascii(mesh))
    np.testing.assert_array_equal(parsed.corners(), mesh.corners())


def test_serialize_refuses_solid_header():
    with pytest.raises(ValueError):
        serialize_stl(box_mesh([0, 0, 0], [1, 1, 1]), header=b"solid nope")


def test_load_stl_from_disk(tmp_path):
    path = tmp_path / "cube.stl"
    path.write_bytes(serialize_stl(box_mesh([0, 0, 0], [1, 1, 1])))
    mesh = load_stl(path)
    assert mesh.name == "cube"
    assert mesh.triangle_count == 12


finite = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False, allow_infinity=False, width=32)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(finite, min_size=9, max_size=9), min_size=1, max_size=20))
def test_binary_roundtrip_float32_exact(raw):
    corners = np.asarray(raw, dtype=np.float32).astype(np.float64).reshape(-1, 3, 3)
    first = parse_stl(_binary(corners))
    again = parse_stl(serialize_stl(first))
    np.testing.assert_array_equal(again.vertices, first.vertices)
    assert isinstance(again, TriangleMesh)
