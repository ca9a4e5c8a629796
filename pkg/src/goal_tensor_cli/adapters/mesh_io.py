"""Plain-text hexahedral mesh files.

    nodes N elems E
    x y z i1 i2 i3        (N righe: coordinate e indici spaziali nel tensore)
    n0 n1 ... n7          (E righe: nodi dell'elemento, 0-based, x più veloce)

Righe vuote e commenti "#" sono ignorati.
"""

import logging
from pathlib import Path

import numpy as np

from goal_tensor_cli.core.errors import FileSystemError, MeshError
from goal_tensor_cli.core.fem import HexMesh

logger = logging.getLogger(__name__)


def parse_hex_mesh(text: str) -> HexMesh:
    """Costruisce una HexMesh dal contenuto testuale.

    Raises:
        MeshError: Header o righe malformate, conteggi incoerenti.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MeshError("Mesh file is empty")

    head = lines[0].split()
    if len(head) != 4 or head[0] != "nodes" or head[2] != "elems":
        raise MeshError(f"Bad mesh header '{lines[0]}', expected 'nodes N elems E'")
    try:
        n_nodes, n_elems = int(head[1]), int(head[3])
    except ValueError as e:
        raise MeshError(f"Bad mesh header '{lines[0]}': {e}") from e
    if len(lines) != 1 + n_nodes + n_elems:
        raise MeshError(
            f"Header announces {n_nodes} nodes and {n_elems} elements, "
            f"found {len(lines) - 1} data lines"
        )

    node_rows = lines[1 : 1 + n_nodes]
    elem_rows = lines[1 + n_nodes :]
    try:
        nodes = np.array([[float(tok) for tok in row.split()] for row in node_rows])
        elements = np.array([[int(tok) for tok in row.split()] for row in elem_rows], dtype=np.int64)
    except ValueError as e:
        raise MeshError(f"Malformed mesh line: {e}") from e
    if nodes.shape != (n_nodes, 6):
        raise MeshError("Every node line needs 'x y z i1 i2 i3'")
    tensor_index = nodes[:, 3:]
    if np.any(tensor_index != np.round(tensor_index)):
        raise MeshError("Tensor indices must be integers")
    return HexMesh(coords=nodes[:, :3], elements=elements, tensor_index=tensor_index.astype(np.int64))


def read_hex_mesh(path: str | Path) -> HexMesh:
    """Legge una mesh esaedrica da file.

    Raises:
        FileSystemError: File non leggibile.
        MeshError: Contenuto non valido.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileSystemError(f"Cannot read mesh file {path}: {e}") from e
    mesh = parse_hex_mesh(text)
    logger.info(f"Read mesh {path}: {mesh.n_nodes} nodes, {mesh.n_elements} elements")
    return mesh


def write_hex_mesh(path: str | Path, mesh: HexMesh) -> None:
    """Scrive una mesh nel formato letto da ``read_hex_mesh``.

    Raises:
        FileSystemError: File non scrivibile.
    """
    path = Path(path)
    out = [f"nodes {mesh.n_nodes} elems {mesh.n_elements}"]
    for xyz, idx in zip(mesh.coords, mesh.tensor_index, strict=True):
        out.append(" ".join([*(repr(float(c)) for c in xyz), *(str(int(i)) for i in idx)]))
    out.extend(" ".join(str(int(n)) for n in element) for element in mesh.elements)
    try:
        path.write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as e:
        raise FileSystemError(f"Cannot write mesh file {path}: {e}") from e
