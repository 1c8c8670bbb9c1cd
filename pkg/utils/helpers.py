import os
import json
import base64
import hashlib
import tempfile

import numpy as np


def fmt_pct(x, decimals: int = 2) -> str:
    """Metric in [0,1] -> '×100' display string. Returns '—' for None."""
    if x is None:
        return "—"
    return f"{x * 100:.{decimals}f}"


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of ints (seed, index, step, ...)."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1)[0])


def encode_bitmask(mask: np.ndarray) -> str:
    """Bool HxW mask -> base64 of packed bits (row-major)."""
    packed = np.packbits(np.asarray(mask, dtype=bool).ravel())
    return base64.b64encode(packed.tobytes()).decode("ascii")


def decode_bitmask(data: str, height: int, width: int) -> np.ndarray:
    """Inverse of encode_bitmask."""
    raw = np.frombuffer(base64.b64decode(data.encode("ascii")), dtype=np.uint8)
    expected = (height * width + 7) // 8
    if raw.size != expected:
        raise ValueError(f"bitmask holds {raw.size} bytes, expected {expected} for {height}x{width}")
    bits = np.unpackbits(raw)[:height * width]
    return bits.reshape(height, width).astype(bool)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def write_json_atomic(obj, path: str):
    """Write JSON via temp file + rename so readers never see a partial file."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2, default=_json_default, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
