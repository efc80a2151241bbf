"""
PTYT tensor and PTYB named-bundle containers (little-endian, bit-exact).

PTYT:  "PTYT" | version u16 = 1 | dtype u8 | ndim u8 | dims ndim x u64 | payload
       dtype 0 = float32, 1 = float64, 2 = complex (interleaved float32 pairs)
PTYB:  "PTYB" | version u16 = 1 | count u32 | count x (name_len u16 | UTF-8 name | PTYT blob)

Integer and boolean arrays are stored as float64; complex128 is stored as
complex64 pairs.
"""

import struct
from pathlib import Path

import numpy as np

from ptychoforge.errors import FormatError

TENSOR_MAGIC = b"PTYT"
BUNDLE_MAGIC = b"PTYB"
VERSION = 1

DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<c8")}

_TENSOR_HEAD = struct.Struct("<4sHBB")
_BUNDLE_HEAD = struct.Struct("<4sHI")
_U16 = struct.Struct("<H")


def _dtype_code(array: np.ndarray) -> int:
    if np.iscomplexobj(array):
        return 2
    if array.dtype == np.float32:
        return 0
    return 1


# ── PTYT ─────────────────────────────────────────────────────────────────────

def encode_tensor(array) -> bytes:
    array = np.asarray(array)
    code = _dtype_code(array)
    if array.ndim > 255:
        raise FormatError(f"cannot store {array.ndim} dimensions", 0)
    payload = np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes(order="C")
    head = _TENSOR_HEAD.pack(TENSOR_MAGIC, VERSION, code, array.ndim)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape)
    return head + dims + payload


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one PTYT blob at `offset`; returns the array and the offset just past it."""
    if len(buf) - offset < _TENSOR_HEAD.size:
        raise FormatError("truncated PTYT header", len(buf))
    magic, version, code, ndim = _TENSOR_HEAD.unpack_from(buf, offset)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad magic: expected {TENSOR_MAGIC.decode()!r}, got {magic!r}", offset)
    if version != VERSION:
        raise FormatError(f"unsupported PTYT version {version}", offset + 4)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}", offset + 6)
    pos = offset + _TENSOR_HEAD.size
    if len(buf) - pos < 8 * ndim:
        raise FormatError("truncated PTYT dimensions", len(buf))
    shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
    pos += 8 * ndim
    dtype = DTYPE_CODES[code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    nbytes = count * dtype.itemsize
    if len(buf) - pos < nbytes:
        raise FormatError(f"truncated payload: need {nbytes} bytes, have {len(buf) - pos}", len(buf))
    array = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(shape).copy()
    return array, pos + nbytes


def save_tensor(path: str | Path, tensor) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(tensor))
    return path


def load_tensor(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    array, end = decode_tensor(buf, 0)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes after PTYT payload", end)
    return array


# ── PTYB ─────────────────────────────────────────────────────────────────────

def encode_bundle(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [_BUNDLE_HEAD.pack(BUNDLE_MAGIC, VERSION, len(tensors))]
    for name, tensor in tensors.items():
        raw = name.encode("utf-8")
        parts.append(_U16.pack(len(raw)) + raw + encode_tensor(tensor))
    return b"".join(parts)


def decode_bundle(buf: bytes) -> dict[str, np.ndarray]:
    if len(buf) < _BUNDLE_HEAD.size:
        raise FormatError("truncated PTYB header", len(buf))
    magic, version, count = _BUNDLE_HEAD.unpack_from(buf, 0)
    if magic != BUNDLE_MAGIC:
        raise FormatError(f"bad magic: expected {BUNDLE_MAGIC.decode()!r}, got {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported PTYB version {version}", 4)
    pos = _BUNDLE_HEAD.size
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        if len(buf) - pos < _U16.size:
            raise FormatError("truncated PTYB record header", len(buf))
        (name_len,) = _U16.unpack_from(buf, pos)
        pos += _U16.size
        if len(buf) - pos < name_len:
            raise FormatError("truncated PTYB record name", len(buf))
        try:
            name = buf[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"record name is not UTF-8: {e}", pos) from e
        pos += name_len
        tensors[name], pos = decode_tensor(buf, pos)
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after PTYB records", pos)
    return tensors


def save_bundle(path: str | Path, tensors: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_bundle(tensors))
    return path


def load_bundle(path: str | Path) -> dict[str, np.ndarray]:
    return decode_bundle(Path(path).read_bytes())
