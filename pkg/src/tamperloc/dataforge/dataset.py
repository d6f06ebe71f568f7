"""On-disk dataset layout.

    images/NNNNNN.ppm     RGB sample
    masks/NNNNNN.pgm      ground truth, 0 pristine / 255 tampered
    manifest.txt          index, host id, donor id, paste transform, augmentations
    donor_masks/          optional; marks images/ entries as donors for synthesis
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..netpbm import NetpbmError, read_pgm, read_ppm, write_pgm, write_ppm
from ..rng import stream
from .augment import augment, format_log
from .synth import procedural_sample


class DatasetError(ValueError):
    pass


@dataclass
class Item:
    name: str
    image: np.ndarray
    mask: np.ndarray


def sample_name(index):
    return f"{index:06d}"


def _manifest_line(index, s):
    paste = ",".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in s.paste.items())
    return (f"{sample_name(index)} host={s.host_id} donor={s.donor_id} "
            f"paste={paste or 'none'} aug={format_log(s.augmentations)}")


def make_sample(index, size, seed, aug_cfg=None):
    s = procedural_sample(index, size, seed)
    if aug_cfg is not None:
        s = augment(s, aug_cfg, stream(seed, f"augment/{index}"))
    return s


def synthesize(out_dir, n, size, seed, aug_cfg=None, threads=1):
    """Generate and write ``n`` samples; output bytes do not depend on ``threads``."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)

    def work(i):
        s = make_sample(i, size, seed, aug_cfg)
        write_ppm(out / "images" / f"{sample_name(i)}.ppm", s.image)
        write_pgm(out / "masks" / f"{sample_name(i)}.pgm", (s.mask > 0).astype(np.uint8) * 255)
        return _manifest_line(i, s)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        lines = list(pool.map(work, range(n)))
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return lines


def list_samples(data_dir):
    d = Path(data_dir)
    img_dir, mask_dir = d / "images", d / "masks"
    if not img_dir.is_dir():
        raise DatasetError(f"{img_dir}: missing images/ directory")
    if not mask_dir.is_dir():
        raise DatasetError(f"{mask_dir}: missing masks/ directory")
    names = sorted(p.stem for p in img_dir.glob("*.ppm"))
    if not names:
        raise DatasetError(f"{img_dir}: no .ppm images")
    for name in names:
        if not (mask_dir / f"{name}.pgm").is_file():
            raise DatasetError(f"{mask_dir / (name + '.pgm')}: mask missing for image {name}")
    return names


def load_item(data_dir, name):
    d = Path(data_dir)
    img_path, mask_path = d / "images" / f"{name}.ppm", d / "masks" / f"{name}.pgm"
    try:
        image = read_ppm(img_path)
    except (OSError, NetpbmError) as exc:
        raise DatasetError(f"{img_path}: {exc}") from None
    try:
        mask = read_pgm(mask_path)
    except (OSError, NetpbmError) as exc:
        raise DatasetError(f"{mask_path}: {exc}") from None
    if mask.shape != image.shape[:2]:
        raise DatasetError(f"{mask_path}: mask {mask.shape} does not match image {image.shape[:2]}")
    bad = ~np.isin(mask, (0, 255))
    if bad.any():
        raise DatasetError(f"{mask_path}: mask values must be 0 or 255")
    return Item(name, image, (mask > 0).astype(np.uint8))


def load_dataset(data_dir, threads=1):
    names = list_samples(data_dir)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda n: load_item(data_dir, n), names))


def load_donors(data_dir):
    """(id, image, object mask) triples from an external corpus with donor_masks/."""
    d = Path(data_dir)
    out = []
    for p in sorted((d / "donor_masks").glob("*.pgm")):
        img_path = d / "images" / f"{p.stem}.ppm"
        try:
            image, mask = read_ppm(img_path), read_pgm(p)
        except (OSError, NetpbmError) as exc:
            raise DatasetError(f"{p}: {exc}") from None
        if mask.shape != image.shape[:2]:
            raise DatasetError(f"{p}: donor mask does not match {img_path}")
        out.append((p.stem, image, mask > 0))
    if not out:
        raise DatasetError(f"{d / 'donor_masks'}: no donor masks found")
    return out
