"""Splice-style forgery synthesis.

Donor pixels under an object mask are pasted, with a random scale and
position and hard edges, into a pristine host. The procedural corpus gives
hosts smooth low-frequency content and donors a strong high-frequency
texture, so the splice is detectable from local statistics alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import interp_matrix
from ..rng import RngStream, stream

MAX_PLACEMENT_TRIES = 16
RATIO_RANGE = (0.01, 0.40)


class CompositeError(RuntimeError):
    pass


@dataclass
class ForgerySample:
    image: np.ndarray
    mask: np.ndarray
    host_id: str = ""
    donor_id: str = ""
    paste: dict = field(default_factory=dict)
    augmentations: list = field(default_factory=list)

    @property
    def tampered_ratio(self):
        return float(self.mask.mean())


def nearest_indices(s_in, s_out):
    d = np.arange(s_out)
    return np.minimum(((d + 0.5) * s_in / s_out).astype(np.int64), s_in - 1)


def composite(host, donor, donor_mask, rng, host_id="host", donor_id="donor", scale_range=(0.5, 1.5)):
    """Paste the masked donor region into ``host`` at a random scale and position."""
    host = np.asarray(host, dtype=np.uint8)
    donor = np.asarray(donor, dtype=np.uint8)
    dmask = np.asarray(donor_mask).astype(bool)
    if dmask.shape != donor.shape[:2]:
        raise ValueError(f"donor mask {dmask.shape} does not match donor image {donor.shape[:2]}")
    if not dmask.any():
        raise ValueError("donor mask is empty")
    rows = np.flatnonzero(dmask.any(axis=1))
    cols = np.flatnonzero(dmask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    patch, pmask = donor[r0:r1, c0:c1], dmask[r0:r1, c0:c1]
    bh, bw = pmask.shape
    hh, hw = host.shape[:2]
    for _ in range(MAX_PLACEMENT_TRIES):
        scale = float(rng.uniform(*scale_range))
        sh, sw = max(1, round(bh * scale)), max(1, round(bw * scale))
        if sh > hh or sw > hw:
            continue
        ri, ci = nearest_indices(bh, sh), nearest_indices(bw, sw)
        spatch = patch[ri][:, ci]
        smask = pmask[ri][:, ci]
        if not smask.any():
            continue
        top = int(rng.integers(0, hh - sh + 1))
        left = int(rng.integers(0, hw - sw + 1))
        mask = np.zeros((hh, hw), dtype=bool)
        mask[top : top + sh, left : left + sw] = smask
        image = host.copy()
        region = image[top : top + sh, left : left + sw]
        region[smask] = spatch[smask]
        return ForgerySample(
            image=image, mask=mask.astype(np.uint8), host_id=host_id, donor_id=donor_id,
            paste={"scale": scale, "top": top, "left": left, "height": sh, "width": sw})
    raise CompositeError(f"donor region {bh}x{bw} could not be placed in host {hh}x{hw} "
                         f"after {MAX_PLACEMENT_TRIES} tries")


def _smooth_field(rng, size, coarse, channels=3):
    grid = rng.normal(0.0, 1.0, size=(channels, coarse, coarse))
    m = interp_matrix(coarse, size)
    return np.einsum("ij,cjk,lk->ilc", m, grid, m)


def generate_host(rng, size):
    """Smooth pristine image: colored linear ramp plus low-frequency variation."""
    base = rng.uniform(60, 190, size=3)
    angle = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    ramp = np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)
    slope = rng.uniform(-60, 60, size=3)
    img = base + ramp[..., None] * slope + 18.0 * _smooth_field(rng, size, 4)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_donor(rng, size, noise_sigma=(14.0, 24.0)):
    """Donor image whose content carries strong per-pixel noise."""
    smooth = generate_host(rng, size).astype(np.float64)
    sigma = rng.uniform(*noise_sigma)
    grain = rng.normal(0.0, sigma, size=(size, size, 1)) + rng.normal(0.0, sigma / 3, size=(size, size, 3))
    return np.clip(np.rint(smooth + grain), 0, 255).astype(np.uint8)


def generate_object_mask(rng, size):
    """Union of one to three random ellipses near the donor center."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(0.3, 0.7, size=2) * size
        ry, rx = rng.uniform(0.06, 0.3, size=2) * size
        t = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = (dx * np.cos(t) + dy * np.sin(t)) / rx
        v = (-dx * np.sin(t) + dy * np.cos(t)) / ry
        mask |= u * u + v * v <= 1.0
    return mask


def procedural_sample(index, size, master_seed, ratio_range=RATIO_RANGE):
    """Sample ``index`` of the corpus; depends only on (index, size, master_seed)."""
    rng = stream(master_seed, f"sample/{index}")
    host = generate_host(rng.child("host"), size)
    donor_rng = rng.child("donor")
    donor = generate_donor(donor_rng, size)
    lo, hi = ratio_range
    for attempt in range(64):
        dmask = generate_object_mask(donor_rng, size)
        if not dmask.any():
            continue
        try:
            s = composite(host, donor, dmask, rng.child(f"paste/{attempt}"),
                          host_id=f"proc-host-{index:06d}", donor_id=f"proc-donor-{index:06d}")
        except CompositeError:
            continue
        if lo <= s.tampered_ratio <= hi:
            s.paste["attempt"] = attempt
            return s
    raise CompositeError(f"sample {index}: no placement met tampered ratio in [{lo}, {hi}]")


def procedural_corpus(n, size, seed):
    if n < 1:
        raise ValueError(f"corpus size must be >= 1, got {n}")
    seed = seed.seed if isinstance(seed, RngStream) else seed
    return [procedural_sample(i, size, seed) for i in range(n)]


def laplacian_energy(image, mask=None):
    """Mean squared 3x3 Laplacian response of the gray image (interior pixels)."""
    g = np.asarray(image, dtype=np.float64)
    if g.ndim == 3:
        g = g.mean(axis=2)
    lap = g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    e = lap * lap
    if mask is not None:
        e = e[np.asarray(mask, dtype=bool)[1:-1, 1:-1]]
    return float(e.mean())
