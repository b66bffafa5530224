"""Binary tensor files, dataset directories and network checkpoints.

Tensor file layout (little-endian)::

    b"TTTK" | u32 version | u32 dtype code (1 = f32, 2 = f64) | u32 rank | rank x u64 dims | payload

A checkpoint is ``b"TTCK" | u32 version | u64 header length | JSON header``
followed by one tensor blob per entry of ``header["tensors"]``.
"""
from __future__ import annotations

import io as _io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TTTK"
CKPT_MAGIC = b"TTCK"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


class TensorFileError(ValueError):
    pass


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr)
    code = CODES.get(arr.dtype)
    if code is None:
        raise TensorFileError(f"unsupported dtype {arr.dtype}; tensor files hold f32 or f64")
    head = MAGIC + struct.pack("<III", VERSION, code, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()


def _decode(buf: _io.BufferedIOBase, name: str) -> np.ndarray:
    def take(n):
        b = buf.read(n)
        if len(b) != n:
            raise TensorFileError(f"{name}: truncated tensor data")
        return b

    if take(4) != MAGIC:
        raise TensorFileError(f"{name}: not a tensor file (bad magic)")
    version, code, rank = struct.unpack("<III", take(12))
    if version != VERSION:
        raise TensorFileError(f"{name}: unsupported tensor file version {version}")
    if code not in DTYPES:
        raise TensorFileError(f"{name}: unknown dtype code {code}")
    dims = struct.unpack(f"<{rank}Q", take(8 * rank))
    dtype = DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    data = take(count * dtype.itemsize)
    return np.frombuffer(data, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))


def decode_tensor(data: bytes, name: str = "<bytes>") -> np.ndarray:
    buf = _io.BytesIO(data)
    arr = _decode(buf, name)
    if buf.read(1):
        raise TensorFileError(f"{name}: trailing bytes after tensor payload")
    return arr


def write_tensor(path, arr) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise TensorFileError(f"{path}: cannot read ({exc.strerror})") from exc
    return decode_tensor(data, str(path))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise TensorFileError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise TensorFileError(f"{path}: invalid JSON ({exc})") from exc


def write_container(path, header: dict, tensors: dict) -> None:
    """Header plus named tensors; the tensor order is recorded in the header."""
    header = dict(header, tensors=list(tensors))
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC + struct.pack("<IQ", VERSION, len(head)) + head)
        for arr in tensors.values():
            f.write(encode_tensor(arr))


def read_container(path) -> tuple[dict, dict]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise TensorFileError(f"{path}: cannot read ({exc.strerror})") from exc
    if data[:4] != CKPT_MAGIC or len(data) < 16:
        raise TensorFileError(f"{path}: not a checkpoint file (bad magic)")
    version, n = struct.unpack("<IQ", data[4:16])
    if version != VERSION:
        raise TensorFileError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(data[16 : 16 + n])
    except json.JSONDecodeError as exc:
        raise TensorFileError(f"{path}: corrupt checkpoint header ({exc})") from exc
    buf = _io.BytesIO(data[16 + n :])
    tensors = {name: _decode(buf, f"{path}[{name}]") for name in header["tensors"]}
    if buf.read(1):
        raise TensorFileError(f"{path}: trailing bytes after checkpoint tensors")
    return header, tensors
