"""Checkpoint container.

Layout, all integers little-endian::

    magic     8 bytes   b"MSTRCKPT"
    version   u32       currently 1
    hlen      u64       length of the JSON header in bytes
    header    hlen      UTF-8 JSON, keys sorted, no whitespace
    payload             raw array bytes, concatenated in header order

The header holds ``kind``, ``config``, ``extra`` (free-form, e.g. the RNG
seed/step and optimizer scalars) and ``arrays``: a list of
``{"name", "dtype", "shape", "offset", "nbytes"}`` records whose offsets are
relative to the start of the payload.  Arrays are stored C-contiguous in
little-endian byte order, so save/load round trips are bit-exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MSTRCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str
    config: dict
    arrays: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        records, chunks, offset = [], [], 0
        for name, arr in self.arrays.items():
            a = np.ascontiguousarray(arr)
            a = a.astype(a.dtype.newbyteorder("<"), copy=False)
            raw = a.tobytes()
            records.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                            "offset": offset, "nbytes": len(raw)})
            chunks.append(raw)
            offset += len(raw)
        header = json.dumps({"kind": self.kind, "config": self.config, "extra": self.extra,
                             "arrays": records}, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:8] != MAGIC:
            raise CheckpointError("not a checkpoint (bad magic)")
        if len(data) < 20:
            raise CheckpointError("truncated checkpoint header")
        version, hlen = struct.unpack("<IQ", data[8:20])
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        try:
            header = json.loads(data[20:20 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
        payload = data[20 + hlen:]
        arrays = {}
        for rec in header["arrays"]:
            raw = payload[rec["offset"]:rec["offset"] + rec["nbytes"]]
            if len(raw) != rec["nbytes"]:
                raise CheckpointError(f"truncated array {rec['name']}")
            arrays[rec["name"]] = np.frombuffer(raw, dtype=np.dtype(rec["dtype"])).reshape(rec["shape"]).copy()
        return cls(header["kind"], header["config"], arrays, header.get("extra", {}))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())
