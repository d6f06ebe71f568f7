"""Training-time augmentation chain.

Order: resize -> crop -> flip -> noise -> blur -> photometric -> JPEG.
Resize and crop always run; the others fire independently with their own
probability. Geometric ops are applied to the mask with nearest-neighbor
sampling; photometric ops never touch it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import correlate1d

from ..core import interp_matrix
from .jpeg import jpeg_roundtrip
from .synth import ForgerySample, nearest_indices


@dataclass(frozen=True)
class AugmentConfig:
    resize_range: tuple = (0.5, 2.0)
    crop: tuple = (512, 512)
    flip_p: float = 0.5
    noise_p: float = 0.5
    blur_p: float = 0.5
    photometric_p: float = 0.5
    jpeg_p: float = 0.5
    jpeg_q_range: tuple = (71, 95)
    brightness: float = 0.25
    contrast: float = 0.25
    saturation: float = 0.25
    hue_degrees: float = 18.0
    noise_sigma: tuple = (1.0, 10.0)
    blur_sigma: tuple = (0.5, 2.0)

    @classmethod
    def desk(cls, **kw):
        return cls(**{"crop": (64, 64), **kw})

    def without_random_ops(self):
        return replace(self, flip_p=0.0, noise_p=0.0, blur_p=0.0, photometric_p=0.0, jpeg_p=0.0)


def _to_u8(x):
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def resize_image(img, out_h, out_w):
    h, w = img.shape[:2]
    if (out_h, out_w) == (h, w):
        return img.copy()
    rows, cols = interp_matrix(h, out_h), interp_matrix(w, out_w)
    planes = img.astype(np.float64).transpose(2, 0, 1)
    out = np.matmul(np.matmul(rows, planes), cols.T)
    return _to_u8(out.transpose(1, 2, 0))


def resize_mask(mask, out_h, out_w):
    h, w = mask.shape
    return mask[nearest_indices(h, out_h)][:, nearest_indices(w, out_w)]


def _reflect_pad(a, pad_h, pad_w):
    """Symmetric padding split evenly on both sides, repeated if the pad exceeds the size."""
    pads = ((pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2)) + ((0, 0),) * (a.ndim - 2)
    return np.pad(a, pads, mode="symmetric")


def apply_geometry(a, op, params):
    """Replay one logged geometric op on an image or mask."""
    is_mask = a.ndim == 2
    if op == "resize":
        oh, ow = params["height"], params["width"]
        return resize_mask(a, oh, ow) if is_mask else resize_image(a, oh, ow)
    if op == "pad":
        return _reflect_pad(a, params["pad_h"], params["pad_w"])
    if op == "crop":
        t, l, h, w = params["top"], params["left"], params["height"], params["width"]
        return a[t : t + h, l : l + w].copy()
    if op == "flip":
        return a[:, ::-1].copy()
    raise ValueError(f"not a geometric op: {op}")


GEOMETRIC = ("resize", "pad", "crop", "flip")


def replay_geometry(mask, log):
    for op, params in log:
        if op in GEOMETRIC:
            mask = apply_geometry(mask, op, params)
    return mask


def gaussian_kernel(sigma):
    radius = math.ceil(2.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma):
    k = gaussian_kernel(sigma)
    out = correlate1d(img.astype(np.float64), k, axis=0, mode="reflect")
    out = correlate1d(out, k, axis=1, mode="reflect")
    return _to_u8(out)


# RGB <-> YIQ; hue rotation is a rotation of the (I, Q) plane
_YIQ = np.array([[0.299, 0.587, 0.114], [0.596, -0.274, -0.322], [0.211, -0.523, 0.312]])
_YIQ_INV = np.linalg.inv(_YIQ)
_GRAY = np.array([0.299, 0.587, 0.114])


def photometric(img, brightness, contrast, saturation, hue_deg):
    x = img.astype(np.float64) * brightness
    gray = x @ _GRAY
    x = (x - gray.mean()) * contrast + gray.mean()
    gray = (x @ _GRAY)[..., None]
    x = gray + (x - gray) * saturation
    t = math.radians(hue_deg)
    rot = np.array([[1, 0, 0], [0, math.cos(t), -math.sin(t)], [0, math.sin(t), math.cos(t)]])
    x = x @ (_YIQ_INV @ rot @ _YIQ).T
    return _to_u8(x)


def augment(sample, cfg, rng):
    """Apply the augmentation chain; returns a new sample with an extended log."""
    img, mask = sample.image, sample.mask
    log = []

    def geo(op, params):
        nonlocal img, mask
        img = apply_geometry(img, op, params)
        mask = apply_geometry(mask, op, params)
        log.append((op, params))

    h, w = img.shape[:2]
    f = float(rng.uniform(*cfg.resize_range))
    geo("resize", {"factor": f, "height": max(1, round(h * f)), "width": max(1, round(w * f))})

    ch, cw = cfg.crop
    h, w = img.shape[:2]
    if h < ch or w < cw:
        geo("pad", {"pad_h": max(0, ch - h), "pad_w": max(0, cw - w)})
        h, w = img.shape[:2]
    geo("crop", {"top": int(rng.integers(0, h - ch + 1)), "left": int(rng.integers(0, w - cw + 1)),
                 "height": ch, "width": cw})

    # one draw per op whether or not it fires keeps the stream layout fixed
    fire = rng.random(5) < np.array([cfg.flip_p, cfg.noise_p, cfg.blur_p, cfg.photometric_p, cfg.jpeg_p])
    if fire[0]:
        geo("flip", {})
    if fire[1]:
        sigma = float(rng.uniform(*cfg.noise_sigma))
        img = _to_u8(img + rng.normal(0.0, sigma, size=img.shape))
        log.append(("noise", {"sigma": sigma}))
    if fire[2]:
        sigma = float(rng.uniform(*cfg.blur_sigma))
        img = gaussian_blur(img, sigma)
        log.append(("blur", {"sigma": sigma, "kernel": 2 * math.ceil(2 * sigma) + 1}))
    if fire[3]:
        params = {
            "brightness": float(rng.uniform(1 - cfg.brightness, 1 + cfg.brightness)),
            "contrast": float(rng.uniform(1 - cfg.contrast, 1 + cfg.contrast)),
            "saturation": float(rng.uniform(1 - cfg.saturation, 1 + cfg.saturation)),
            "hue": float(rng.uniform(-cfg.hue_degrees, cfg.hue_degrees)),
        }
        img = photometric(img, params["brightness"], params["contrast"], params["saturation"], params["hue"])
        log.append(("photometric", params))
    if fire[4]:
        q = int(rng.integers(cfg.jpeg_q_range[0], cfg.jpeg_q_range[1] + 1))
        img = jpeg_roundtrip(img, q)
        log.append(("jpeg", {"quality": q}))

    return ForgerySample(image=img, mask=mask, host_id=sample.host_id, donor_id=sample.donor_id,
                         paste=dict(sample.paste), augmentations=sample.augmentations + log)


def format_log(log):
    """'resize(factor=1.2,height=77,width=77);crop(...)' with fixed float formatting."""
    parts = []
    for op, params in log:
        args = ",".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in params.items())
        parts.append(f"{op}({args})")
    return ";".join(parts) if parts else "none"
