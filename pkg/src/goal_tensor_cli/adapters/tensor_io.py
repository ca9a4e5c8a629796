"""Binary tensor files (GOTD format).

Layout, tutto little-endian:
    magic   4 byte  b"GOTD"
    version u32     1
    d       u64     numero di modi (>= 1)
    dims    d x u64 dimensioni (>= 1)
    values  f8      prod(dims) valori, modo 0 più veloce
"""

import logging
import math
import struct
from pathlib import Path

import numpy as np

from goal_tensor_cli.core.errors import (
    BadMagicError,
    FileSystemError,
    TensorFormatError,
    TruncatedFileError,
)
from goal_tensor_cli.core.models import DenseTensor

logger = logging.getLogger(__name__)

MAGIC = b"GOTD"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
_MAX_BYTES = 2**63 - 1


def encode_tensor(X: DenseTensor) -> bytes:
    """Serializza un tensore nel formato GOTD."""
    header = _PREFIX.pack(MAGIC, VERSION, X.ndims) + struct.pack(f"<{X.ndims}Q", *X.dims)
    return header + X.values.astype("<f8").tobytes()


def decode_tensor(data: bytes) -> DenseTensor:
    """Decodifica il contenuto di un file GOTD.

    Raises:
        BadMagicError: I primi 4 byte non sono b"GOTD".
        TruncatedFileError: Header o valori incompleti.
        TensorFormatError: Versione sconosciuta, d = 0, dimensione nulla,
            dimensioni troppo grandi o byte in eccesso.
    """
    if len(data) >= 4 and data[:4] != MAGIC:
        raise BadMagicError(bytes(data[:4]))
    if len(data) < _PREFIX.size:
        raise TruncatedFileError(f"File has {len(data)} bytes, header needs {_PREFIX.size}")
    _, version, ndims = _PREFIX.unpack_from(data)
    if version != VERSION:
        raise TensorFormatError(f"Unsupported format version {version} (expected {VERSION})")
    if ndims == 0:
        raise TensorFormatError("Tensor must have at least one mode (d = 0)")

    dims_end = _PREFIX.size + 8 * ndims
    if len(data) < dims_end:
        raise TruncatedFileError(f"Header announces {ndims} modes but the file ends early")
    dims = struct.unpack_from(f"<{ndims}Q", data, _PREFIX.size)
    if any(n == 0 for n in dims):
        raise TensorFormatError(f"Every dimension must be >= 1, got {dims}")
    count = math.prod(dims)
    if count * 8 > _MAX_BYTES:
        raise TensorFormatError(f"Dimensions {dims} overflow the addressable size")

    expected = dims_end + 8 * count
    if len(data) < expected:
        raise TruncatedFileError(f"Expected {expected} bytes for dims {dims}, file has {len(data)}")
    if len(data) > expected:
        raise TensorFormatError(f"{len(data) - expected} trailing bytes after tensor values")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=dims_end)
    return DenseTensor.from_values(dims, values.astype(np.float64))


def read_tensor(path: str | Path) -> DenseTensor:
    """Legge un tensore GOTD.

    Raises:
        FileSystemError: File non leggibile.
        TensorFormatError: Contenuto non valido.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileSystemError(f"Cannot read tensor file {path}: {e}") from e
    X = decode_tensor(data)
    logger.info(f"Read tensor {path}: dims={X.dims}")
    return X


def write_tensor(path: str | Path, X: DenseTensor) -> None:
    """Scrive un tensore GOTD; il round trip con ``read_tensor`` è bit-esatto.

    Raises:
        FileSystemError: Directory mancante o file non scrivibile.
    """
    path = Path(path)
    if not path.parent.exists():
        raise FileSystemError(f"Output directory does not exist: {path.parent}")
    try:
        path.write_bytes(encode_tensor(X))
    except OSError as e:
        raise FileSystemError(f"Cannot write tensor file {path}: {e}") from e
    logger.info(f"Wrote tensor {path}: dims={X.dims}")
