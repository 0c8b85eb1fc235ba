# misr/neuralnet/paramfile.py
"""
Parameter file:

    magic      8 bytes  b"MISRPARM"
    version    uint32
    n_entries  uint32
    per entry  uint16 name length, utf-8 name, uint8 ndim, ndim x uint32 dims
    values     little-endian float32, entries back to back in declared order

All integers are little-endian. Values are always stored as float32.
"""
import struct
from pathlib import Path
from typing import Union

import numpy as np

from misr.errors import ParamFormatError, ParamShapeError
from misr.neuralnet.network import LAYOUT, NetworkParams

MAGIC = b"MISRPARM"
FORMAT_VERSION = 1


def encode_params(params: NetworkParams) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(LAYOUT))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
    for _, arr in params.items():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParamFormatError(f"parameter file truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_params(data: bytes) -> NetworkParams:
    cur = _Cursor(data)
    if cur.take(len(MAGIC)) != MAGIC:
        raise ParamFormatError("not a parameter file (bad magic)")
    version, n_entries = cur.unpack("<II")
    if version != FORMAT_VERSION:
        raise ParamFormatError(f"unsupported parameter format version {version}")

    table = []
    for _ in range(n_entries):
        (name_len,) = cur.unpack("<H")
        try:
            name = cur.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParamFormatError(f"entry name is not utf-8: {e}") from e
        (ndim,) = cur.unpack("<B")
        table.append((name, tuple(cur.unpack(f"<{ndim}I"))))
    if table != [(name, tuple(shape)) for name, shape in LAYOUT]:
        raise ParamShapeError(f"layer table {table} does not match the network layout")

    arrays = {}
    for name, shape in table:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(cur.take(4 * count), dtype="<f4").reshape(shape).astype(np.float32)
    if cur.pos != len(data):
        raise ParamFormatError(f"{len(data) - cur.pos} trailing bytes after the parameter values")
    return NetworkParams(**arrays)


def save_params(path: Union[str, Path], params: NetworkParams) -> None:
    Path(path).write_bytes(encode_params(params))


def load_params(path: Union[str, Path]) -> NetworkParams:
    return decode_params(Path(path).read_bytes())
