"""Binary model checkpoints with bit-exact float round-tripping.

Layout, all integers little-endian unsigned 32-bit unless noted:

    magic \"CCLR\" | version | header length | header JSON (utf-8)
    | tensor count | repeated (name length | name utf-8 | ndim
    | dims as u64 each | payload as little-endian float64, C order)

The header echoes the model config, the adapter family, and the seed that
generated the frozen backbone. Loading rebuilds the model from that config
and seed, then overwrites every tensor with the stored payload, so a
save/load/save cycle yields byte-identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError
from .model import Model, ModelConfig

MAGIC = b"CCLR"
VERSION = 1


def _write_u32(fh, value: int):
    fh.write(struct.pack("<I", value))


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"checkpoint truncated while reading {what}")
    return buf


def _read_u32(fh, what: str) -> int:
    return struct.unpack("<I", _read_exact(fh, 4, what))[0]


def save_checkpoint(model: Model, path) -> None:
    header = {
        "family": model.config.family,
        "backbone_seed": model.seed,
        "model_config": model.config.to_dict(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    named = model.named_tensors()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u32(fh, VERSION)
        _write_u32(fh, len(header_bytes))
        fh.write(header_bytes)
        _write_u32(fh, len(named))
        for name, tensor in named.items():
            name_bytes = name.encode("utf-8")
            _write_u32(fh, len(name_bytes))
            fh.write(name_bytes)
            data = np.ascontiguousarray(tensor.data, dtype="<f8")
            _write_u32(fh, data.ndim)
            for dim in data.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(data.tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise DataError(f"{path}: not a CCLR checkpoint (magic {magic!r})")
        version = _read_u32(fh, "version")
        if version != VERSION:
            raise DataError(
                f"{path}: unsupported checkpoint version {version}, expected {VERSION}"
            )
        header_len = _read_u32(fh, "header length")
        try:
            header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: corrupt checkpoint header") from exc
        try:
            config = ModelConfig(**header["model_config"])
            seed = int(header["backbone_seed"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: incomplete checkpoint header") from exc
        if header.get("family") != config.family:
            raise DataError(f"{path}: family tag does not match config echo")

        stored = {}
        for _ in range(_read_u32(fh, "tensor count")):
            name_len = _read_u32(fh, "name length")
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            ndim = _read_u32(fh, "ndim")
            shape = tuple(
                struct.unpack("<Q", _read_exact(fh, 8, "dimension"))[0]
                for _ in range(ndim)
            )
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            payload = _read_exact(fh, count * 8, f"tensor '{name}' payload")
            stored[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after tensor table")

    model = Model(config, seed)
    named = model.named_tensors()
    if set(named) != set(stored):
        missing = sorted(set(named) - set(stored))
        extra = sorted(set(stored) - set(named))
        raise DataError(
            f"{path}: tensor names do not match config (missing {missing}, extra {extra})"
        )
    for name, tensor in named.items():
        if stored[name].shape != tensor.data.shape:
            raise DataError(
                f"{path}: tensor '{name}' has shape {stored[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data = stored[name].astype(np.float64)
    return model
