"""
Output writers.

Every file is written once and atomically: the content goes to a temporary
file in the target directory, which is then renamed over the target.

Formats:
- CSV via pandas, UTF-8, '.' decimal separator, header row
- JSON with sorted keys and two-space indent
- Binary grids: magic b"PSWF2D\\0", little-endian u32 G, f64 L, then G*G
  complex values as little-endian (re, im) float64 pairs in row-major order
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd

from .radon2d import GridFunction2D

logger = logging.getLogger(__name__)

GRID_MAGIC = b"PSWF2D\0"
_HEADER_DTYPE = np.dtype([("size", "<u4"), ("extent", "<f8")])

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write bytes to path via a temporary file and os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(handle, "wb") as temp_file:
            temp_file.write(data)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    logger.debug(f"Wrote {path} ({len(data)} bytes)")
    return path


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """DataFrame to CSV without the index."""
    text = frame.to_csv(index=False, lineterminator="\n")
    return atomic_write_bytes(path, text.encode("utf-8"))


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _finite(value: Any) -> Any:
    """Replace non-finite floats by None so the output stays strict JSON."""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None
    return value


def write_json(payload: Any, path: PathLike) -> Path:
    """JSON with sorted keys, so identical payloads give identical bytes."""
    text = json.dumps(_finite(payload), indent=2, sort_keys=True, default=_json_default,
                      allow_nan=False)
    return atomic_write_bytes(path, (text + "\n").encode("utf-8"))


def write_grid(grid: GridFunction2D, path: PathLike) -> Path:
    """Write a GridFunction2D in the PSWF2D binary format."""
    header = np.array([(grid.resolution, grid.extent)], dtype=_HEADER_DTYPE)
    body = np.ascontiguousarray(grid.values, dtype="<c16")
    return atomic_write_bytes(path, GRID_MAGIC + header.tobytes() + body.tobytes(order="C"))


def read_grid(path: PathLike) -> GridFunction2D:
    """
    Read a PSWF2D binary grid.

    Raises:
        ValueError: On a bad magic or a truncated body.
    """
    data = Path(path).read_bytes()
    if not data.startswith(GRID_MAGIC):
        raise ValueError(f"{path} is not a PSWF2D grid file")
    offset = len(GRID_MAGIC)
    header = np.frombuffer(data, dtype=_HEADER_DTYPE, count=1, offset=offset)[0]
    size, extent = int(header["size"]), float(header["extent"])
    offset += _HEADER_DTYPE.itemsize
    expected = size * size * 16
    if len(data) - offset != expected:
        raise ValueError(f"{path}: expected {expected} bytes of grid values, found {len(data) - offset}")
    values = np.frombuffer(data, dtype="<c16", offset=offset).reshape(size, size)
    return GridFunction2D(extent=extent, values=values.astype(complex))
