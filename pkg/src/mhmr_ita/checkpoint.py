"""Binary checkpoint files for named parameter tensors.

Layout: an 8-byte magic/version tag, a length-prefixed header blob (model
configuration, UTF-8 JSON by convention), then one record per tensor:
``u32 name_len | name bytes | u32 rank | u64 extents... | float64 LE values``
in row-major order. Loading validates names and shapes against the model.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ContractError

_MAGIC = b"NDT1"
_VERSION = 1


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], header: bytes = b"") -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for name, arr in arrays.items():
            data = np.ascontiguousarray(arr, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(data.tobytes(order="C"))


def load_arrays(path: str | Path) -> tuple[bytes, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ContractError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    offset = 16
    header = blob[offset : offset + header_len]
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        shape = struct.unpack_from(f"<{rank}Q", blob, offset)
        offset += 8 * rank
        count = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        if name in arrays:
            raise ContractError(f"{path}: duplicate record {name!r}")
        arrays[name] = values.reshape(shape).astype(np.float64)
    return header, arrays
