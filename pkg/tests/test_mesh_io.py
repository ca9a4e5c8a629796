"""Tests for the plain-text hexahedral mesh format."""

import numpy as np
import pytest

from goal_tensor_cli.adapters.mesh_io import parse_hex_mesh, read_hex_mesh, write_hex_mesh
from goal_tensor_cli.core.errors import FileSystemError, MeshError
from goal_tensor_cli.core.fem import structured_hex_mesh

ONE_ELEMENT = """\
# unit cube
nodes 8 elems 1
0 0 0 0 0 0
1 0 0 1 0 0
0 1 0 0 1 0
1 1 0 1 1 0
0 0 1 0 0 1
1 0 1 1 0 1
0 1 1 0 1 1
1 1 1 1 1 1

0 1 2 3 4 5 6 7   # x fastest
"""


def test_parse_single_element():
    """Test parsing with comments and blank lines."""
    mesh = parse_hex_mesh(ONE_ELEMENT)

    assert mesh.n_nodes == 8
    assert mesh.n_elements == 1
    np.testing.assert_array_equal(mesh.elements[0], np.arange(8))
    np.testing.assert_array_equal(mesh.tensor_index[3], [1, 1, 0])


def test_write_then_read(tmp_path):
    """Test that a written mesh reads back unchanged."""
    mesh = structured_hex_mesh((3, 2, 2), spacing=(0.1, 0.2, 0.3))
    path = tmp_path / "mesh.txt"

    write_hex_mesh(path, mesh)
    back = read_hex_mesh(path)

    np.testing.assert_array_equal(back.coords, mesh.coords)
    np.testing.assert_array_equal(back.elements, mesh.elements)
    np.testing.assert_array_equal(back.tensor_index, mesh.tensor_index)


def test_bad_header():
    """Test that a malformed header raises MeshError."""
    with pytest.raises(MeshError, match="header"):
        parse_hex_mesh("vertices 8 cells 1\n")


def test_count_mismatch():
    """Test that the announced counts must match the data lines."""
    text = ONE_ELEMENT.replace("nodes 8 elems 1", "nodes 8 elems 2")

    with pytest.raises(MeshError):
        parse_hex_mesh(text)


def test_non_integer_tensor_index():
    """Test that fractional tensor indices are rejected."""
    text = ONE_ELEMENT.replace("1 1 1 1 1 1", "1 1 1 1 1 1.5")

    with pytest.raises(MeshError):
        parse_hex_mesh(text)


def test_empty_file():
    """Test that an empty mesh file is rejected."""
    with pytest.raises(MeshError):
        parse_hex_mesh("# nothing here\n")


def test_read_missing_file(tmp_path):
    """Test that a missing mesh raises FileSystemError."""
    with pytest.raises(FileSystemError):
        read_hex_mesh(tmp_path / "missing.txt")
