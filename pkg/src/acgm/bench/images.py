"""Grayscale images: seeded noise, a synthetic test pattern and NetPBM I/O.

Random numbers come from SplitMix64 so that noise realizations can be
reproduced sample for sample in any language:

* output ``i`` (``i = 1, 2, ...``) hashes the state ``seed + i * 0x9E3779B97F4A7C15``
  (mod 2^64) with the usual xor-shift/multiply finalizer;
* a uniform is ``((z >> 11) + 0.5) * 2^-53``, which lies strictly inside (0, 1);
* Gaussians come in Box-Muller pairs from consecutive uniforms ``u1, u2``:
  ``sqrt(-2 ln u1) * cos(2 pi u2)`` then ``sqrt(-2 ln u1) * sin(2 pi u2)``.
"""

from __future__ import annotations

import os
import re
from typing import Union

import numpy as np

__all__ = [
    "SplitMix64",
    "splitmix64_outputs",
    "add_gaussian_noise",
    "synth_test_image",
    "pgm_read",
    "pgm_write",
    "PgmError",
]

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64_outputs(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start + 1, ..., start + count`` of the generator seeded with ``seed``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based view of SplitMix64; draws advance an internal position."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.position = 0

    def next_uint64(self, n: int) -> np.ndarray:
        out = splitmix64_outputs(self.seed, self.position, n)
        self.position += n
        return out

    def uniform(self, n: int) -> np.ndarray:
        z = self.next_uint64(n)
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]


def add_gaussian_noise(img: np.ndarray, std: float, seed: int) -> np.ndarray:
    """Image plus i.i.d. ``N(0, std^2)`` noise, drawn in row-major pixel order."""
    if std < 0:
        raise ValueError("std must be nonnegative")
    img = np.asarray(img, dtype=float)
    if std == 0:
        return img.copy()
    return img + std * SplitMix64(seed).normal(img.size).reshape(img.shape)


def synth_test_image(n1: int, n2: int, seed: int = 0) -> np.ndarray:
    """Piecewise-smooth pattern in [0, 1]: a ramp background, seeded
    rectangles and one disk. Deterministic in ``seed``."""
    if n1 < 8 or n2 < 8:
        raise ValueError("image must be at least 8x8")
    rng = SplitMix64(seed)
    i = np.arange(n1)[:, None] / max(n1 - 1, 1)
    j = np.arange(n2)[None, :] / max(n2 - 1, 1)
    img = 0.1 + 0.25 * i + 0.15 * j
    for _ in range(4):
        r0, r1, c0, c1, level = rng.uniform(5)
        top, bottom = sorted((int(r0 * n1), int(r1 * n1)))
        left, right = sorted((int(c0 * n2), int(c1 * n2)))
        bottom = max(bottom, top + n1 // 8)
        right = max(right, left + n2 // 8)
        img[top:bottom, left:right] = 0.15 + 0.5 * level + 0.2 * j[:, left:right]
    # a bright disk guarantees the dynamic range
    ci, cj, rad = rng.uniform(3)
    ci, cj = 0.3 + 0.4 * ci, 0.3 + 0.4 * cj
    rad = 0.1 + 0.1 * rad
    disk = (i - ci) ** 2 + (j - cj) ** 2 <= rad ** 2
    img = np.where(disk, 0.95, img)
    return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------------------
# NetPBM grayscale


class PgmError(ValueError):
    """Malformed or truncated PGM file."""


_SKIP = re.compile(rb"\s+|#[^\n]*(\n|$)")
_FIELD = re.compile(rb"[^\s#]+")
_COMMENT = re.compile(rb"#[^\n]*")

PathLike = Union[str, "os.PathLike[str]"]


def _header(data: bytes):
    pos = 0
    fields = []
    for _ in range(4):
        # comments may appear between any two header tokens
        while True:
            m = _SKIP.match(data, pos)
            if not m or m.end() == pos:
                break
            pos = m.end()
        m = _FIELD.match(data, pos)
        if not m:
            raise PgmError("truncated header")
        fields.append(m.group(0))
        pos = m.end()
    magic = fields[0]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic number {magic!r}")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise PgmError("non-integer header field") from exc
    if width < 1 or height < 1:
        raise PgmError("empty image")
    if not 0 < maxval <= 65535:
        raise PgmError("maxval must lie in 1..65535")
    return magic, width, height, maxval, pos


def pgm_read(path: PathLike) -> np.ndarray:
    """Read a P2 or P5 file; pixels are scaled to [0, 1] by ``maxval``."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, width, height, maxval, pos = _header(data)
    n = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise PgmError("missing whitespace after header")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        payload = data[pos:pos + n * dtype.itemsize]
        if len(payload) < n * dtype.itemsize:
            raise PgmError("truncated pixel data")
        values = np.frombuffer(payload, dtype=dtype).astype(float)
    else:
        body = _COMMENT.sub(b" ", data[pos:]).split()
        if len(body) < n:
            raise PgmError("truncated pixel data")
        try:
            values = np.array([int(t) for t in body[:n]], dtype=float)
        except ValueError as exc:
            raise PgmError("non-integer pixel value") from exc
    if np.any(values > maxval):
        raise PgmError("pixel value exceeds maxval")
    return values.reshape(height, width) / maxval


def pgm_write(img: np.ndarray, path: PathLike, maxval: int = 255, binary: bool = True) -> None:
    """Write ``img`` (nominally in [0, 1]) after clipping and rounding to ``maxval`` levels."""
    if not 0 < maxval <= 65535:
        raise ValueError("maxval must lie in 1..65535")
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    height, width = img.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(b"P5\n%d %d\n%d\n" % (width, height, maxval))
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(q.astype(dtype).tobytes())
        else:
            fh.write(b"P2\n%d %d\n%d\n" % (width, height, maxval))
            for row in q:
                fh.write(b" ".join(b"%d" % v for v in row) + b"\n")
