"""Versioned binary checkpoint container.

Layout:
    8 bytes   magic  b"OPSCKPT\\0"
    2 bytes   uint16 format version (little endian)
    4 bytes   uint32 header length
    N bytes   UTF-8 JSON header (model config, dtype, tensor names/shapes, meta)
    ...       flat little-endian tensor data in header order
"""
import os
import json
import struct
import logging

import numpy as np
import torch

from core.errors import ConfigError
from segmodel.model import ModelConfig, PartSegmenter
from utils.helpers import sha256_file

logger = logging.getLogger("ops.segmodel")

MAGIC = b"OPSCKPT\0"
FORMAT_VERSION = 1
DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


def save_checkpoint(model: PartSegmenter, path: str, dtype: str = "float32", meta: dict | None = None) -> str:
    """Write model weights; returns the sha256 of the written file."""
    if dtype not in DTYPES:
        raise ConfigError(f"checkpoint dtype must be one of {sorted(DTYPES)}, got {dtype}")
    state = model.state_dict()
    tensors = []
    for name, t in state.items():
        arr = t.detach().cpu().numpy()
        # integer buffers (GroupNorm has none today) are stored as floats too
        tensors.append((name, list(arr.shape), np.ascontiguousarray(arr, dtype=DTYPES[dtype])))

    header = {
        "model_config": model.cfg.to_dict(),
        "dtype": dtype,
        "optimizer": "AdamW",
        "tensors": [{"name": n, "shape": s} for n, s, _ in tensors],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for _, _, arr in tensors:
            f.write(arr.tobytes(order="C"))
    os.replace(tmp, path)
    digest = sha256_file(path)
    logger.info(f"Saved checkpoint {path} ({len(tensors)} tensors, {dtype}, sha256 {digest[:12]})")
    return digest


def read_header(path: str) -> tuple[dict, int]:
    """Parse the header; returns (header, data offset)."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigError(f"{path}: not a checkpoint file")
        version, n = struct.unpack("<HI", f.read(6))
        if version != FORMAT_VERSION:
            raise ConfigError(f"{path}: checkpoint format {version}, expected {FORMAT_VERSION}")
        header = json.loads(f.read(n).decode("utf-8"))
    return header, len(MAGIC) + 6 + n


def load_checkpoint(path: str, as_dtype: torch.dtype | None = None) -> PartSegmenter:
    header, offset = read_header(path)
    cfg = ModelConfig.from_dict(header["model_config"])
    dt = DTYPES[header["dtype"]]
    model = PartSegmenter(cfg)
    state = model.state_dict()

    with open(path, "rb") as f:
        f.seek(offset)
        loaded = {}
        for entry in header["tensors"]:
            name, shape = entry["name"], tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(f.read(count * dt.itemsize), dtype=dt)
            if arr.size != count:
                raise ConfigError(f"{path}: truncated data for tensor {name}")
            if name not in state:
                raise ConfigError(f"{path}: unknown tensor {name}")
            ref = state[name]
            loaded[name] = torch.as_tensor(arr.reshape(shape).copy()).to(ref.dtype)
    missing = set(state) - set(loaded)
    if missing:
        raise ConfigError(f"{path}: missing tensors {sorted(missing)}")
    model.load_state_dict(loaded)
    if as_dtype is not None:
        model = model.to(as_dtype)
    elif header["dtype"] == "float64":
        model = model.double()
    model.eval()
    logger.info(f"Loaded checkpoint {path} ({len(loaded)} tensors)")
    return model
