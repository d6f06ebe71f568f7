"""In-memory baseline JPEG round trip.

Runs the lossy half of a baseline codec: JFIF color conversion, 4:2:0
chroma subsampling, 8x8 DCT, quantization with the Annex K tables scaled by
quality, then the inverse path. Huffman coding is lossless and is skipped.
"""
from __future__ import annotations

import numpy as np

# Annex K, natural (row-major) order
LUMA_TABLE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64).reshape(8, 8)

CHROMA_TABLE = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
], dtype=np.int64).reshape(8, 8)


def _dct_matrix():
    k = np.arange(8)
    m = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16) * 0.5
    m[0] = np.sqrt(1.0 / 8.0)
    return m


DCT = _dct_matrix()


def quality_scale(quality):
    if not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must lie in [1, 100], got {quality}")
    quality = int(quality)
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def quant_table(base, quality):
    scale = quality_scale(quality)
    return np.clip((base * scale + 50) // 100, 1, 255).astype(np.float64)


def rgb_to_ycbcr(rgb):
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return y, cb, cr


def ycbcr_to_rgb(y, cb, cr):
    r = y + 1.402 * (cr - 128.0)
    g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
    b = y + 1.772 * (cb - 128.0)
    return np.stack([r, g, b], axis=-1)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_plane(plane, table):
    """DCT, quantize, dequantize, inverse DCT on a plane whose sides are multiples of 8."""
    h, w = plane.shape
    blocks = (plane - 128.0).reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coef = DCT @ blocks @ DCT.T
    coef = round_half_away(coef / table) * table
    rec = DCT.T @ coef @ DCT
    return rec.transpose(0, 2, 1, 3).reshape(h, w) + 128.0


def jpeg_roundtrip(image, quality):
    """Lossy JPEG round trip of a uint8 (H, W, 3) image."""
    luma_q = quant_table(LUMA_TABLE, quality)
    chroma_q = quant_table(CHROMA_TABLE, quality)
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    h, w = img.shape[:2]
    ph, pw = -(-h // 16) * 16, -(-w // 16) * 16
    padded = np.pad(img, ((0, ph - h), (0, pw - w), (0, 0)), mode="edge")
    y, cb, cr = rgb_to_ycbcr(padded)

    def subsample(c):
        return c.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3))

    def upsample(c):
        return np.repeat(np.repeat(c, 2, axis=0), 2, axis=1)

    y_rec = quantize_plane(y, luma_q)
    cb_rec = upsample(quantize_plane(subsample(cb), chroma_q))
    cr_rec = upsample(quantize_plane(subsample(cr), chroma_q))
    rgb = ycbcr_to_rgb(y_rec, cb_rec, cr_rec)
    return np.clip(round_half_away(rgb), 0, 255).astype(np.uint8)[:h, :w]


def psnr(a, b):
    err = np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2)
    return float("inf") if err == 0 else float(10.0 * np.log10(255.0**2 / err))
