"""Binary PPM (P6) and PGM (P5) reading and writing, 8-bit only."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class NetpbmError(ValueError):
    pass


def _write(path, magic, arr):
    h, w = arr.shape[:2]
    header = f"{magic}\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def write_ppm(path, rgb):
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise NetpbmError(f"PPM needs uint8 (H, W, 3), got {rgb.dtype} {rgb.shape}")
    _write(path, "P6", rgb)


def write_pgm(path, gray):
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise NetpbmError(f"PGM needs uint8 (H, W), got {gray.dtype} {gray.shape}")
    _write(path, "P5", gray)


def _tokens(raw, count):
    """First ``count`` header tokens and the offset of the raster."""
    out = []
    pos = 0
    while len(out) < count:
        if pos >= len(raw):
            raise NetpbmError("truncated header")
        ch = raw[pos : pos + 1]
        if ch == b"#":
            nl = raw.find(b"\n", pos)
            pos = len(raw) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
                pos += 1
            out.append(raw[start:pos].decode("ascii"))
    # exactly one whitespace byte separates maxval from the raster
    return out, pos + 1


def read_netpbm(path):
    raw = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), offset = _tokens(raw, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (NetpbmError, ValueError) as exc:
        raise NetpbmError(f"{path}: malformed header ({exc})") from None
    if magic not in ("P5", "P6"):
        raise NetpbmError(f"{path}: unsupported magic {magic!r}")
    if maxval != 255:
        raise NetpbmError(f"{path}: only maxval 255 supported, got {maxval}")
    if w < 1 or h < 1:
        raise NetpbmError(f"{path}: invalid size {w}x{h}")
    ch = 3 if magic == "P6" else 1
    need = w * h * ch
    data = raw[offset : offset + need]
    if len(data) != need:
        raise NetpbmError(f"{path}: raster holds {len(data)} bytes, expected {need}")
    arr = np.frombuffer(data, dtype=np.uint8).copy()
    return arr.reshape(h, w, 3) if ch == 3 else arr.reshape(h, w)


def read_ppm(path):
    arr = read_netpbm(path)
    if arr.ndim != 3:
        raise NetpbmError(f"{path}: expected a color (P6) image")
    return arr


def read_pgm(path):
    arr = read_netpbm(path)
    if arr.ndim != 2:
        raise NetpbmError(f"{path}: expected a grayscale (P5) image")
    return arr
