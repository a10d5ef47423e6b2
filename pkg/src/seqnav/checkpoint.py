"""Binary checkpoint format.

Layout (all integers little-endian u32)::

    b"ORST" | version | header_len | header (UTF-8 JSON: model config + meta)
    | block_count | blocks...

Each block is ``name_len | name | ndim | extents... | float32 data``.
Optimizer moments travel as extra blocks named ``opt.m/<param>`` and
``opt.v/<param>``.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .autograd import Tensor
from .model import ORIST, ModelConfig
from .optim import AdamState

MAGIC = b"ORST"
VERSION = 1


def _u32(f, n: int):
    f.write(struct.pack("<I", n))


def _read_u32(f) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise ValueError("checkpoint truncated")
    return struct.unpack("<I", raw)[0]


def _write_block(f, name: str, arr: np.ndarray):
    enc = name.encode()
    _u32(f, len(enc))
    f.write(enc)
    _u32(f, arr.ndim)
    for n in arr.shape:
        _u32(f, n)
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def save_checkpoint(path, model: ORIST, meta: dict | None = None, opt_state: AdamState | None = None):
    blocks = [(k, p.data) for k, p in model.params.items()]
    meta = dict(meta or {})
    if opt_state is not None:
        meta["opt_step"] = opt_state.step
        meta["opt_skipped"] = opt_state.skipped
        blocks += [(f"opt.m/{k}", v) for k, v in opt_state.m.items()]
        blocks += [(f"opt.v/{k}", v) for k, v in opt_state.v.items()]
    header = json.dumps({"model_config": model.config.to_dict(), "meta": meta}, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    _u32(buf, VERSION)
    _u32(buf, len(header))
    buf.write(header)
    _u32(buf, len(blocks))
    for name, arr in blocks:
        _write_block(buf, name, arr)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> tuple[ORIST, dict, AdamState | None]:
    f = io.BytesIO(Path(path).read_bytes())
    if f.read(4) != MAGIC:
        raise ValueError(f"{path}: bad magic, not a checkpoint")
    version = _read_u32(f)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(f.read(_read_u32(f)).decode())
    blocks = {}
    for _ in range(_read_u32(f)):
        name = f.read(_read_u32(f)).decode()
        shape = tuple(_read_u32(f) for _ in range(_read_u32(f)))
        count = int(np.prod(shape)) if shape else 1
        raw = f.read(4 * count)
        if len(raw) != 4 * count:
            raise ValueError(f"{path}: block {name} truncated")
        blocks[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    cfg = ModelConfig.from_dict(header["model_config"])
    meta = header.get("meta", {})
    params = {k: Tensor(v, requires_grad=True, name=k) for k, v in blocks.items() if not k.startswith("opt.")}
    model = ORIST(cfg, params=params)
    opt = None
    if "opt_step" in meta:
        opt = AdamState(step=meta["opt_step"], skipped=meta.get("opt_skipped", 0))
        opt.m = {k[6:]: v.copy() for k, v in blocks.items() if k.startswith("opt.m/")}
        opt.v = {k[6:]: v.copy() for k, v in blocks.items() if k.startswith("opt.v/")}
    return model, meta, opt
