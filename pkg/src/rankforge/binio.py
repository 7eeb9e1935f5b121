"""Sectioned little-endian binary files for arrays.

Layout: an 8-byte magic, then one section per array. Each section is an
8-byte space-padded ASCII name, a 4-byte dtype code, a u64 ndim, `ndim` u64
dims, and the raw C-order array bytes. Everything is explicitly
little-endian, so files are byte-identical across platforms.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC_LEN = 8

_DTYPES = {
    b"f32 ": np.dtype("<f4"),
    b"u32 ": np.dtype("<u4"),
    b"u64 ": np.dtype("<u8"),
}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}


def write_array_file(path: Path, magic: bytes, arrays: list[tuple[str, np.ndarray]]) -> None:
    if len(magic) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes")
    chunks = [magic]
    for name, arr in arrays:
        encoded = name.encode("ascii")
        if not 1 <= len(encoded) <= 8:
            raise ValueError(f"section name must be 1-8 ASCII bytes: {name!r}")
        dtype = np.dtype(arr.dtype).newbyteorder("<")
        code = _DTYPE_CODES.get(dtype)
        if code is None:
            raise ValueError(f"unsupported dtype {arr.dtype} for section {name!r}")
        chunks.append(encoded.ljust(8, b" "))
        chunks.append(code)
        chunks.append(struct.pack("<Q", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<Q", dim))
        chunks.append(np.ascontiguousarray(arr, dtype=dtype).tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def read_array_file(path: Path, magic: bytes) -> dict[str, np.ndarray]:
    """Parse a sectioned array file. Raises ValueError on any corruption."""
    data = Path(path).read_bytes()
    if len(data) < MAGIC_LEN or data[:MAGIC_LEN] != magic:
        raise ValueError(f"{path}: bad magic")
    out: dict[str, np.ndarray] = {}
    pos = MAGIC_LEN
    while pos < len(data):
        if pos + 8 + 4 + 8 > len(data):
            raise ValueError(f"{path}: truncated section header")
        name = data[pos : pos + 8].rstrip(b" ").decode("ascii", errors="replace")
        code = data[pos + 8 : pos + 12]
        dtype = _DTYPES.get(code)
        if dtype is None:
            raise ValueError(f"{path}: unknown dtype code {code!r} in section {name!r}")
        (ndim,) = struct.unpack_from("<Q", data, pos + 12)
        pos += 20
        if ndim > 8:
            raise ValueError(f"{path}: implausible ndim {ndim} in section {name!r}")
        if pos + 8 * ndim > len(data):
            raise ValueError(f"{path}: truncated dims in section {name!r}")
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        count = 1
        for dim in shape:
            count *= dim
        nbytes = count * dtype.itemsize
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated data in section {name!r}")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(shape)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        if name in out:
            raise ValueError(f"{path}: duplicate section {name!r}")
        out[name] = arr
        pos += nbytes
    return out


def write_kv_file(path: Path, items: list[tuple[str, str]]) -> None:
    """Write ordered `key: value` lines (the human-readable metadata format)."""
    lines = [f"{key}: {value}\n" for key, value in items]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_kv_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        if ": " not in raw:
            raise ValueError(f"{path}:{line_no}: expected 'key: value'")
        key, value = raw.split(": ", 1)
        if key in out:
            raise ValueError(f"{path}:{line_no}: duplicate key {key!r}")
        out[key] = value
    return out
