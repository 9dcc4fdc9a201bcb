"""Versioned checkpoint container: a JSON header followed by raw tensor bytes.

Layout::

    MAGIC (16 bytes) | header length (uint64 LE) | header JSON | tensor data

The header holds the format version, metadata and, per tensor, its name,
dtype, shape and byte range. Keys are sorted and tensors are laid out in name
order, so save -> load -> save reproduces the file byte for byte.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

MAGIC = b"OBJAWARE-CKPT\x00\x00\x00"
FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "float32",
    torch.float64: "float64",
    torch.int64: "int64",
}
_TORCH = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    tensors: dict = field(default_factory=dict)  # name -> tensor
    meta: dict = field(default_factory=dict)

    def to_bytes(self):
        entries = []
        blobs = []
        offset = 0
        for name in sorted(self.tensors):
            t = self.tensors[name].detach().cpu().contiguous()
            if t.dtype not in _DTYPES:
                raise TypeError(f"{name}: unsupported dtype {t.dtype}")
            raw = t.numpy().astype(t.numpy().dtype.newbyteorder("<"), copy=False).tobytes()
            entries.append({"name": name, "dtype": _DTYPES[t.dtype], "shape": list(t.shape),
                            "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
        header = json.dumps({"format_version": FORMAT_VERSION, "meta": self.meta, "tensors": entries},
                            sort_keys=True, separators=(",", ":")).encode()
        return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(blobs)

    @classmethod
    def from_bytes(cls, data):
        if data[: len(MAGIC)] != MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        (hlen,) = struct.unpack("<Q", data[len(MAGIC): len(MAGIC) + 8])
        start = len(MAGIC) + 8
        header = json.loads(data[start: start + hlen])
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {header.get('format_version')}")
        base = start + hlen
        tensors = {}
        for e in header["tensors"]:
            dtype = np.dtype(e["dtype"]).newbyteorder("<")
            raw = data[base + e["offset"]: base + e["offset"] + e["nbytes"]]
            arr = np.frombuffer(raw, dtype=dtype).astype(np.dtype(e["dtype"])).reshape(e["shape"])
            tensors[e["name"]] = torch.from_numpy(arr.copy())
        return cls(tensors, header["meta"])

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())
        return Path(path)

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())
