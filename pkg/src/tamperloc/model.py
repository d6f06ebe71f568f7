"""End-to-end localization network and checkpoint I/O."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import Tensor, no_grad
from .decoder import Decoder, DecoderConfig
from .encoder import Encoder, EncoderConfig
from .nn import Module
from .rng import stream

MEAN = np.array([0.485, 0.456, 0.406]) * 255.0
STD = np.array([0.229, 0.224, 0.225]) * 255.0

CKPT_MAGIC = "TAMPERLOC-CHECKPOINT 1"


class CheckpointError(ValueError):
    pass


def preprocess(images):
    """uint8 (N, H, W, 3) or (H, W, 3) -> normalized NCHW Tensor."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    x = (arr.astype(np.float64) - MEAN) / STD
    return Tensor(x.transpose(0, 3, 1, 2))


class TamperLocNet(Module):
    def __init__(self, enc_cfg=None, dec_cfg=None, seed=0):
        super().__init__()
        self.enc_cfg = enc_cfg or EncoderConfig.desk()
        self.dec_cfg = dec_cfg or DecoderConfig.desk()
        self.encoder = self.add_child("encoder", Encoder(self.enc_cfg, stream(seed, "init/encoder")))
        self.decoder = self.add_child(
            "decoder", Decoder(self.dec_cfg, self.enc_cfg.stage_channels, stream(seed, "init/decoder")))

    def __call__(self, x):
        h, w = x.shape[2:]
        feats = self.encoder(x)
        return self.decoder(feats.features(), h, w)

    def predict(self, images):
        """Tamper probabilities (N, H, W) for uint8 images, without recording a graph."""
        with no_grad():
            out = self(preprocess(images))
        return out.probs.data[:, 0]


def save_checkpoint(module, path):
    """Plain-text header of names and shapes, then little-endian float64 payload."""
    named = list(module.named_parameters())
    lines = [CKPT_MAGIC, f"params {len(named)}"]
    for name, t in named:
        lines.append(f"{name} {'x'.join(str(d) for d in t.shape)}")
    lines.append("end")
    payload = b"".join(np.ascontiguousarray(t.data, dtype="<f8").tobytes() for _, t in named)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii") + payload)


def read_checkpoint(path):
    raw = Path(path).read_bytes()
    entries = []
    pos = 0

    def next_line():
        nonlocal pos
        end = raw.find(b"\n", pos)
        if end < 0:
            raise CheckpointError(f"{path}: truncated header")
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        return line

    if next_line() != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    head = next_line().split()
    if len(head) != 2 or head[0] != "params":
        raise CheckpointError(f"{path}: malformed header")
    for _ in range(int(head[1])):
        name, dims = next_line().rsplit(" ", 1)
        entries.append((name, tuple(int(d) for d in dims.split("x"))))
    if next_line() != "end":
        raise CheckpointError(f"{path}: header not terminated")
    total = sum(int(np.prod(s)) for _, s in entries)
    if len(raw) - pos != 8 * total:
        raise CheckpointError(f"{path}: payload holds {(len(raw) - pos) // 8} doubles, header expects {total}")
    flat = np.frombuffer(raw, dtype="<f8", offset=pos)
    out = {}
    off = 0
    for name, shape in entries:
        n = int(np.prod(shape))
        out[name] = flat[off : off + n].reshape(shape).astype(np.float64)
        off += n
    return out


def load_checkpoint(module, path):
    stored = read_checkpoint(path)
    named = list(module.named_parameters())
    expected = [(n, t.shape) for n, t in named]
    found = [(n, a.shape) for n, a in stored.items()]
    if expected != found:
        for (en, es), (fn, fs) in zip(expected, found):
            if (en, es) != (fn, fs):
                raise CheckpointError(f"incompatible checkpoint: expected {en} {es}, found {fn} {fs}")
        raise CheckpointError(
            f"incompatible checkpoint: expected {len(expected)} parameters, found {len(found)}")
    for name, t in named:
        t.data[...] = stored[name]
    return module
