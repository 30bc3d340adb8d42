"""Binary model file: magic LCM1, spec, norm stats, tensors, trailing CRC-32.

Layout (all little-endian):
  magic "LCM1" | u16 version | u32 json len | spec json
  | u8 norm-stats present | [5 f64 mean, 5 f64 std, 5 u8 constant flags]
  | u32 record count | records | u32 crc32 of everything before it

Record: u16 name len | name utf-8 | u8 flags (1 trainable, 2 buffer,
4 weight matrix) | f64 lr multiplier | u8 ndim | u32 dims | f32 data.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..core import N_CHANNELS, NormStats
from ..errors import CorruptFile, VersionMismatch
from .models import Model, ModelSpec, Param

MAGIC = b"LCM1"
VERSION = 1

_F_TRAINABLE = 1
_F_BUFFER = 2
_F_WEIGHT_MATRIX = 4


def _pack_record(name: str, arr: np.ndarray, flags: int, lr_multiplier: float) -> bytes:
    nb = name.encode("utf-8")
    out = [struct.pack("<H", len(nb)), nb, struct.pack("<Bd", flags, lr_multiplier)]
    out.append(struct.pack("<B", arr.ndim))
    out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def save_model(model: Model, path: str | os.PathLike) -> None:
    if model.dtype != np.float32:
        raise ValueError("only float32 models are serializable")
    spec_json = json.dumps(asdict(model.spec), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(spec_json)), spec_json]
    if model.norm_stats is None:
        parts.append(b"\x00")
    else:
        s = model.norm_stats
        parts.append(b"\x01")
        parts.append(np.asarray(s.mean, dtype="<f8").tobytes())
        parts.append(np.asarray(s.std, dtype="<f8").tobytes())
        parts.append(np.asarray(s.constant, dtype=np.uint8).tobytes())
    n_records = len(model.params) + len(model.buffers)
    parts.append(struct.pack("<I", n_records))
    for p in model.params.values():
        flags = (_F_TRAINABLE if p.trainable else 0) | (_F_WEIGHT_MATRIX if p.weight_matrix else 0)
        parts.append(_pack_record(p.name, p.data, flags, p.lr_multiplier))
    for name, arr in model.buffers.items():
        parts.append(_pack_record(name, arr, _F_BUFFER, 0.0))
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptFile("model file truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path: str | os.PathLike) -> Model:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 2 + 4:
        raise CorruptFile("model file too short")
    body, stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) != stored:
        raise CorruptFile("checksum mismatch")
    r = _Reader(body)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptFile("bad magic")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise VersionMismatch(f"model file version {version}, expected {VERSION}")
    (jlen,) = r.unpack("<I")
    try:
        spec_dict = json.loads(r.take(jlen).decode("utf-8"))
        for key in ("fcn_filters", "fcn_kernels"):
            spec_dict[key] = tuple(spec_dict[key])
        spec = ModelSpec(**spec_dict)
    except (ValueError, TypeError, KeyError) as e:
        raise CorruptFile(f"unreadable spec descriptor: {e}") from e
    (has_stats,) = r.unpack("<B")
    norm_stats = None
    if has_stats:
        mean = np.frombuffer(r.take(8 * N_CHANNELS), dtype="<f8").copy()
        std = np.frombuffer(r.take(8 * N_CHANNELS), dtype="<f8").copy()
        const = np.frombuffer(r.take(N_CHANNELS), dtype=np.uint8).astype(bool)
        norm_stats = NormStats(mean=mean, std=std, constant=const)
    (n_records,) = r.unpack("<I")
    params: dict[str, Param] = {}
    buffers: dict[str, np.ndarray] = {}
    for _ in range(n_records):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        flags, lr_mult = r.unpack("<Bd")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape).copy()
        if flags & _F_BUFFER:
            buffers[name] = data
        else:
            params[name] = Param(
                name=name,
                data=data,
                trainable=bool(flags & _F_TRAINABLE),
                lr_multiplier=lr_mult,
                weight_matrix=bool(flags & _F_WEIGHT_MATRIX),
            )
    if r.pos != len(body):
        raise CorruptFile("trailing bytes after the last record")
    if not params:
        raise CorruptFile("model file holds no parameters")
    return Model(spec=spec, params=params, buffers=buffers, norm_stats=norm_stats)
