"""Texture images and bilinear sampling in UV space.

UV (0, 0) is the bottom-left corner of the image, so image row grows as v
decreases. Pixel (i, j) has its center at uv ((j + 0.5) / W, 1 - (i + 0.5) / H).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class TextureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TextureImage:
    pixels: np.ndarray  # (H, W, 3) floats in [0, 1]

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise TextureError(f"expected an HxWx3 array, got shape {px.shape}")
        if not np.all((px >= 0) & (px <= 1)):
            raise TextureError("channel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_bytes(cls, arr) -> "TextureImage":
        return cls(np.asarray(arr, dtype=np.uint8) / 255.0)

    @classmethod
    def from_function(cls, fn, width: int, height: int) -> "TextureImage":
        """Evaluate ``fn(u, v) -> (..., 3)`` at every pixel center."""
        u, v = pixel_center_uv(width, height)
        return cls(np.asarray(fn(u, v), dtype=np.float64))


def pixel_center_uv(width: int, height: int):
    j = (np.arange(width) + 0.5) / width
    i = (np.arange(height) + 0.5) / height
    u, v = np.meshgrid(j, 1.0 - i)
    return u, v


def _read_token(data: bytes, pos: int):
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise TextureError("truncated header")
    return data[start:pos], pos


def read_ppm(path) -> TextureImage:
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic != b"P6":
        raise TextureError(f"{path}: not a binary PPM (magic {magic!r})")
    try:
        w_tok, pos = _read_token(data, pos)
        h_tok, pos = _read_token(data, pos)
        m_tok, pos = _read_token(data, pos)
        w, h, maxval = int(w_tok), int(h_tok), int(m_tok)
    except ValueError:
        raise TextureError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise TextureError(f"{path}: only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise TextureError(f"{path}: bad dimensions {w}x{h}")
    pos += 1  # single whitespace after maxval
    need = w * h * 3
    body = data[pos : pos + need]
    if len(body) < need:
        raise TextureError(f"{path}: truncated file, expected {need} bytes of pixels, got {len(body)}")
    return TextureImage.from_bytes(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3))


def write_ppm(path, tex: TextureImage):
    data = np.rint(tex.pixels * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{tex.width} {tex.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_texture(path) -> TextureImage:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] == b"P6":
        return read_ppm(path)
    if head == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        try:
            with Image.open(path) as im:
                im.load()
                if im.mode not in ("RGB", "RGBA", "L", "P"):
                    raise TextureError(f"{path}: unsupported PNG mode {im.mode}")
                arr = np.asarray(im.convert("RGB"))
        except OSError as exc:
            raise TextureError(f"{path}: {exc}") from None
        return TextureImage.from_bytes(arr)
    raise TextureError(f"{path}: unsupported texture format")


SNAP_EPS = 1e-12


def _snap(x):
    # round-off in u*W - 0.5 must not turn a pixel-center query into a two-pixel blend
    r = np.rint(x)
    return np.where(np.abs(x - r) <= SNAP_EPS * np.maximum(1.0, np.abs(x)), r, x)


def bilinear_weights(tex: TextureImage, uv):
    """Corner indices and weights for bilinear lookups.

    Returns ``(rows, cols, weights)`` each of shape (..., 4); weights are the
    normalized opposite-rectangle areas and sum to one.
    """
    uv = np.asarray(uv, dtype=np.float64)
    H, W = tex.height, tex.width
    x = _snap(np.clip(uv[..., 0] * W - 0.5, 0.0, W - 1.0))
    y = _snap(np.clip((1.0 - uv[..., 1]) * H - 0.5, 0.0, H - 1.0))
    x0 = np.minimum(np.floor(x).astype(np.int64), max(W - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.int64), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = x - x0
    fy = y - y0
    rows = np.stack([y0, y0, y1, y1], axis=-1)
    cols = np.stack([x0, x1, x0, x1], axis=-1)
    w = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=-1)
    return rows, cols, w


def sample_uv(tex: TextureImage, uv) -> np.ndarray:
    """Bilinear color at ``uv``; accepts a single (2,) point or an (..., 2) array."""
    rows, cols, w = bilinear_weights(tex, uv)
    px = tex.pixels[rows, cols]  # (..., 4, 3): (y0,x0), (y0,x1), (y1,x0), (y1,x1)
    fx = (w[..., 1] + w[..., 3])[..., None]
    fy = (w[..., 2] + w[..., 3])[..., None]
    # nested lerps: exact on constant regions and at pixel centers
    top = px[..., 0, :] + fx * (px[..., 1, :] - px[..., 0, :])
    bot = px[..., 2, :] + fx * (px[..., 3, :] - px[..., 2, :])
    return top + fy * (bot - top)
