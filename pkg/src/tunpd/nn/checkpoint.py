"""Single-file binary checkpoints.

Byte layout (all integers little-endian)::

    0   8 bytes   magic  b"TUNPDCK\\0"
    8   uint32    format version
    12  uint64    header length L
    20  L bytes   UTF-8 JSON header
    20+L ...      float64 little-endian blobs, back to back

The header holds ``meta`` (free-form JSON: model config, optimizer step,
RNG state, training bookkeeping) and ``tensors``, a list of
``{"name", "shape", "offset"}`` records; ``offset`` counts float64 values
from the start of the blob region. Tensor names are prefixed ``param/``,
``buffer/``, ``adam_m/`` or ``adam_v/``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpoint

MAGIC = b"TUNPDCK\x00"
VERSION = 1
_FIXED = struct.Struct("<8sIQ")


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    records, offset = [], 0
    for name, arr in arrays.items():
        records.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += int(arr.size)
    header = json.dumps({"meta": meta, "tensors": records}, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    p = Path(path)
    tmp = p.with_name(p.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_FIXED.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        fh.write(blob)
    tmp.replace(p)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    p = Path(path)
    if not p.exists():
        raise IncompatibleCheckpoint(f"checkpoint {p} does not exist")
    raw = p.read_bytes()
    if len(raw) < _FIXED.size:
        raise IncompatibleCheckpoint(f"{p}: truncated header")
    magic, version, hlen = _FIXED.unpack_from(raw)
    if magic != MAGIC:
        raise IncompatibleCheckpoint(f"{p}: not a checkpoint (bad magic)")
    if version != VERSION:
        raise IncompatibleCheckpoint(f"{p}: format version {version}, expected {VERSION}")
    start = _FIXED.size
    try:
        header = json.loads(raw[start:start + hlen].decode("utf-8"))
    except ValueError as exc:
        raise IncompatibleCheckpoint(f"{p}: unreadable header ({exc})") from None
    body = np.frombuffer(raw, dtype="<f8", offset=start + hlen)
    arrays = {}
    for rec in header["tensors"]:
        size = int(np.prod(rec["shape"], dtype=np.int64))
        off = rec["offset"]
        if off + size > len(body):
            raise IncompatibleCheckpoint(f"{p}: tensor {rec['name']} runs past end of file")
        arrays[rec["name"]] = body[off:off + size].astype(np.float64).reshape(rec["shape"])
    return arrays, header["meta"]
