"""Matrix, image and table file formats.

SPSU-BIN v1 layout (little-endian)::

    magic    4 bytes  b"SPSU"
    version  u16      1
    rows     u32
    cols     u32
    values   rows*cols float64, row-major
"""

import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .errors import DataError, MatrixFormatError, MissingFileError
from .tensor_core import as_matrix

MAGIC = b"SPSU"
VERSION = 1
HEADER = struct.Struct("<4sHII")

# Matrix file extension to format name
MATRIX_FORMATS: Dict[str, str] = {
    ".bin": "spsu-bin",
    ".spsu": "spsu-bin",
    ".csv": "csv",
    ".txt": "csv",
}

DEFAULT_FORMAT = "spsu-bin"


def matrix_format(path: Path) -> str:
    """Format name for ``path`` based on its extension."""
    return MATRIX_FORMATS.get(Path(path).suffix.lower(), DEFAULT_FORMAT)


def write_spsu_bin(path: Path, matrix: np.ndarray) -> None:
    """Write a matrix in SPSU-BIN v1."""
    matrix = as_matrix(matrix)
    rows, cols = matrix.shape
    payload = np.ascontiguousarray(matrix, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(HEADER.pack(MAGIC, VERSION, rows, cols) + payload)


def read_spsu_bin(path: Path) -> np.ndarray:
    """Read a SPSU-BIN v1 matrix.

    Raises:
        MatrixFormatError: On a bad magic, version or payload size.
    """
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise MatrixFormatError(f"{path}: file too short for a SPSU-BIN header")
    magic, version, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFormatError(f"{path}: unsupported SPSU-BIN version {version}")
    expected = rows * cols * 8
    if len(data) - HEADER.size != expected:
        raise MatrixFormatError(
            f"{path}: header declares {rows}x{cols} but payload has {len(data) - HEADER.size} bytes"
        )
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size, count=rows * cols)
    return values.astype(np.float64).reshape(rows, cols)


def write_csv(path: Path, matrix: np.ndarray) -> None:
    """Write a matrix as CSV: a ``rows,cols`` line, then one line per row.

    Values use 17 significant digits, enough to read back the same doubles.
    """
    matrix = as_matrix(matrix)
    rows, cols = matrix.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{rows},{cols}\n")
        if matrix.size:
            np.savetxt(fh, matrix, fmt="%.17g", delimiter=",")


def read_csv(path: Path) -> np.ndarray:
    """Read a matrix written by ``write_csv``.

    Raises:
        MatrixFormatError: If the header or the values are malformed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            rows, cols = (int(v) for v in header.split(","))
        except ValueError:
            raise MatrixFormatError(f"{path}: expected a 'rows,cols' header, got {header!r}")
        try:
            values = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise MatrixFormatError(f"{path}: {e}")
    if rows * cols == 0:
        return np.zeros((rows, cols))
    if values.shape != (rows, cols):
        raise MatrixFormatError(
            f"{path}: header declares {rows}x{cols} but found {values.shape[0]}x{values.shape[1]} values"
        )
    return values


def write_matrix(path: Path, matrix: np.ndarray) -> None:
    """Write a matrix in the format selected by the file extension."""
    if matrix_format(path) == "csv":
        write_csv(path, matrix)
    else:
        write_spsu_bin(path, matrix)


def read_matrix(path: Path) -> np.ndarray:
    """Read a matrix in the format selected by the file extension.

    Raises:
        MissingFileError: If ``path`` does not exist.
        MatrixFormatError: If the content cannot be decoded.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"matrix file not found: {path}")
    if matrix_format(path) == "csv":
        return read_csv(path)
    return read_spsu_bin(path)


def write_pgm(path: Path, image: np.ndarray) -> Tuple[float, float]:
    """Write an 8-bit binary PGM (P5), scaling ``[min, max]`` linearly to ``[0, 255]``.

    Returns:
        The ``(min, max)`` pair used for scaling; a constant image is written as zeros.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise MatrixFormatError(f"PGM needs a 2-D image, got shape {image.shape}")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(image)
    pixels = np.clip(scaled, 0, 255).astype(np.uint8)
    height, width = image.shape
    Path(path).write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    return lo, hi


def read_pgm(path: Path) -> np.ndarray:
    """Read an 8-bit binary PGM into a ``uint8`` array.

    Raises:
        MissingFileError: If ``path`` does not exist.
        MatrixFormatError: If the file is not an 8-bit P5 image.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"image file not found: {path}")
    data = path.read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MatrixFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1

    if tokens[0] != b"P5" or tokens[3] != b"255":
        raise MatrixFormatError(f"{path}: not an 8-bit binary PGM")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data, dtype=np.uint8, offset=pos)
    if pixels.size != width * height:
        raise MatrixFormatError(f"{path}: expected {width * height} pixels, found {pixels.size}")
    return pixels.reshape(height, width).copy()


def write_json(path: Path, payload: dict) -> None:
    """Write ``payload`` as indented JSON with sorted keys."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path) -> dict:
    """Read a JSON document.

    Raises:
        MissingFileError: If ``path`` does not exist.
        DataError: If the content is not valid JSON.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"JSON file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}")
