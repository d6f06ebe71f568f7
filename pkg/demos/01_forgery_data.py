"""Walk through the synthetic forgery pipeline: composite, augment, JPEG.

Run with ``python3 demos/01_forgery_data.py``. Writes a few PPM/PGM files
into ``demo_out/data`` so the results can be opened in any image viewer.
"""
from pathlib import Path

import numpy as np

from tamperloc.dataforge.augment import AugmentConfig, augment, format_log
from tamperloc.dataforge.jpeg import jpeg_roundtrip, psnr
from tamperloc.dataforge.synth import laplacian_energy, procedural_sample
from tamperloc.netpbm import write_pgm, write_ppm
from tamperloc.rng import stream

out = Path("demo_out/data")
out.mkdir(parents=True, exist_ok=True)

# %% A procedural splice: a noisy donor region pasted onto a smooth host.
sample = procedural_sample(index=0, size=96, master_seed=7)
ratio = sample.mask.mean()
print(f"tampered pixels: {ratio:.1%}  paste: {sample.paste}")

# The donor is noisier than the host, which is the cue the network learns.
inside = laplacian_energy(sample.image, sample.mask > 0)
outside = laplacian_energy(sample.image, sample.mask == 0)
print(f"high-frequency energy inside {inside:.1f} vs outside {outside:.1f}")

write_ppm(out / "spliced.ppm", sample.image)
write_pgm(out / "spliced.mask.pgm", (sample.mask * 255).astype(np.uint8))

# %% Augmentation keeps image and mask aligned and logs every op it applied.
cfg = AugmentConfig.desk(crop=(64, 64))
aug = augment(sample, cfg, stream(7, "demo/augment"))
print("augmentation log:", format_log(aug.augmentations))
write_ppm(out / "augmented.ppm", aug.image)
write_pgm(out / "augmented.mask.pgm", (aug.mask * 255).astype(np.uint8))

# %% JPEG round trip: quality trades off against fidelity.
for q in (95, 85, 71, 30, 5):
    print(f"Q={q:3d}  PSNR {psnr(sample.image, jpeg_roundtrip(sample.image, q)):6.2f} dB")
