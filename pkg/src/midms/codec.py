"""Toy latent codec and binary PPM/PGM image I/O.

Images are uint8 arrays of shape (h, w, 3). The codec is fxf average pooling
into [-1, 1] latents and bilinear upsampling back; PPM (P6) / PGM (P5) keep
golden files bit-exact with no compression dependency.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import LatentGrid
from .matching import ConfidenceMask


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ToyCodec:
    factor: int = 4
    channels: int = 3

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError("factor must be positive")
        if self.channels != 3:
            raise ValueError("only 3-channel RGB images are supported")


def _check_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got shape {arr.shape}")
    return arr


def toy_encode(img: np.ndarray, codec: ToyCodec) -> LatentGrid:
    """fxf average pooling per channel, scaled into [-1, 1]."""
    arr = _check_image(img).astype(np.float64)
    f = codec.factor
    h, w = arr.shape[:2]
    if h % f or w % f:
        raise ValueError(f"image dims {h}x{w} not divisible by codec factor {f}")
    pooled = arr.reshape(h // f, f, w // f, f, 3).mean(axis=(1, 3))
    z = pooled / 255.0 * 2.0 - 1.0
    return LatentGrid(np.moveaxis(z, -1, 0))


def toy_decode(z: LatentGrid, codec: ToyCodec) -> np.ndarray:
    """Bilinear upsample by the codec factor, back to clamped uint8."""
    if z.channels != codec.channels:
        raise ValueError(f"latent has {z.channels} channels, codec expects {codec.channels}")
    f = codec.factor
    lh, lw = z.height, z.width
    h, w = lh * f, lw * f
    # output pixel centers mapped into latent coordinates, edges clamped
    ys = (np.arange(h) + 0.5) / f - 0.5
    xs = (np.arange(w) + 0.5) / f - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, lh - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, lw - 1)
    y1 = np.minimum(y0 + 1, lh - 1)
    x1 = np.minimum(x0 + 1, lw - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    planes = z.data
    top = planes[:, y0][:, :, x0] * (1 - wx) + planes[:, y0][:, :, x1] * wx
    bot = planes[:, y1][:, :, x0] * (1 - wx) + planes[:, y1][:, :, x1] * wx
    up = top * (1 - wy) + bot * wy
    pix = (up + 1.0) / 2.0 * 255.0
    pix = np.clip(np.floor(pix + 0.5), 0.0, 255.0)
    return np.moveaxis(pix, 0, -1).astype(np.uint8)


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    arr = _check_image(img)
    if arr.dtype != np.uint8:
        raise ValueError("PPM output requires uint8 pixels")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    return _parse_netpbm(raw, magic=b"P6", channels=3)


def write_pgm(path: str | Path, mask: ConfidenceMask) -> None:
    """Confidence mask as a binary PGM: 255 where confident, 0 elsewhere."""
    data = np.where(mask.flags, 255, 0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    return _parse_netpbm(raw, magic=b"P5", channels=1)[..., 0]


def _parse_netpbm(raw: bytes, magic: bytes, channels: int) -> np.ndarray:
    if not raw.startswith(magic):
        raise ParseError(f"expected {magic.decode()} magic", 0)
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise ParseError("truncated header", pos)
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise ParseError(f"malformed header token {token!r}", start)
        fields.append(int(token))
    if pos >= len(raw):
        raise ParseError("missing header terminator", pos)
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", pos)
    expected = w * h * channels
    payload = raw[pos:]
    if len(payload) < expected:
        raise ParseError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}", pos
        )
    arr = np.frombuffer(payload[:expected], dtype=np.uint8)
    return arr.reshape(h, w, channels).copy()
