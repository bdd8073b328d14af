"""Reading PNG and PGM/PPM images; writing PGM debug masks and PNG.

PNM covers both the ASCII (P1/P2/P3) and binary (P4/P5/P6) variants.
Everything is normalized to 8-bit on read.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import PipelineError
from .raster import BinaryImage, ColorImage, GrayImage

_PNM_MAGIC = re.compile(rb"^P[1-6]\s")


def read_color_image(path: str | Path) -> ColorImage:
    """Read a PNG or PNM file as an RGB image (gray inputs are replicated)."""
    path = Path(path)
    data = path.read_bytes()
    if _PNM_MAGIC.match(data):
        arr = _decode_pnm(data, path)
    else:
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"))
        except Exception as exc:
            raise PipelineError("read", f"cannot decode image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    return ColorImage(np.ascontiguousarray(arr, dtype=np.uint8))


def write_pgm(path: str | Path, img: GrayImage | BinaryImage) -> None:
    """Write a binary (P5) PGM; masks are written as 0/255."""
    px = img.pixels
    if px.dtype == np.bool_:
        px = np.where(px, np.uint8(255), np.uint8(0))
    header = f"P5\n{px.shape[1]} {px.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.astype(np.uint8).tobytes())


def write_png(path: str | Path, img: ColorImage | GrayImage) -> None:
    Image.fromarray(img.pixels).save(Path(path), format="PNG")


def _decode_pnm(data: bytes, path: Path) -> np.ndarray:
    """Decode P1..P6 into a (h, w) or (h, w, 3) uint8 array."""
    magic = data[:2].decode("ascii")
    kind = int(magic[1])
    pos = 2

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PipelineError("read", f"truncated PNM header in {path}")
        return data[start:pos]

    width = int(next_token())
    height = int(next_token())
    if width < 1 or height < 1:
        raise PipelineError("read", f"bad PNM dimensions in {path}")
    if kind in (1, 4):
        maxval = 1
    else:
        maxval = int(next_token())
        if not 1 <= maxval <= 65535:
            raise PipelineError("read", f"bad PNM maxval in {path}")

    channels = 3 if kind in (3, 6) else 1
    count = width * height * channels

    if kind in (1, 2, 3):
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise PipelineError("read", f"truncated PNM data in {path}")
        values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        if kind == 1:
            values = 1 - values  # P1: 1 is black
    else:
        pos += 1  # single whitespace after header
        if kind == 4:
            row_bytes = (width + 7) // 8
            raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * height, offset=pos)
            bits = np.unpackbits(raw.reshape(height, row_bytes), axis=1)[:, :width]
            values = (1 - bits).astype(np.int64).ravel()  # P4: 1 is black
        elif maxval < 256:
            values = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos).astype(np.int64)
        else:
            values = np.frombuffer(data, dtype=">u2", count=count, offset=pos).astype(np.int64)

    if values.size < count:
        raise PipelineError("read", f"truncated PNM data in {path}")
    scaled = np.round(values * (255.0 / maxval)).astype(np.uint8)
    if channels == 3:
        return scaled.reshape(height, width, 3)
    return scaled.reshape(height, width)
