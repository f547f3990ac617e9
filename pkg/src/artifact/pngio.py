"""Minimal PNG codec.

The encoder writes 8-bit RGBA, non-interlaced, filter 0 on every scanline,
and packs the IDAT zlib stream from *stored* deflate blocks. Nothing in the
byte stream depends on a compressor implementation, so identical pixels give
identical files on every platform. The decoder handles the subset needed for
asset textures: 8-bit gray / gray+alpha / RGB / RGBA, non-interlaced, all
five standard filters.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_STORED_BLOCK_MAX = 65535


class PngError(ValueError):
    pass


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def _stored_zlib_stream(data: bytes) -> bytes:
    """A valid zlib stream built from stored (uncompressed) deflate blocks."""
    out = [b"\x78\x01"]  # 32K window, fastest-compression hint
    n = len(data)
    if n == 0:
        out.append(b"\x01\x00\x00\xff\xff")
    else:
        pos = 0
        while pos < n:
            block = data[pos : pos + _STORED_BLOCK_MAX]
            pos += len(block)
            final = 1 if pos >= n else 0
            size = len(block)
            out.append(bytes([final]) + struct.pack("<HH", size, size ^ 0xFFFF))
            out.append(block)
    out.append(struct.pack(">I", zlib.adler32(data) & 0xFFFFFFFF))
    return b"".join(out)


def encode_png(image: np.ndarray) -> bytes:
    """Encode an (h, w, 4) uint8 array as a PNG byte stream."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 4 or arr.dtype != np.uint8:
        raise PngError(f"expected (h, w, 4) uint8 image, got {arr.shape} {arr.dtype}")
    h, w = arr.shape[:2]
    if h < 1 or w < 1:
        raise PngError("zero-area image")
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 6, 0, 0, 0)  # 8-bit RGBA
    rows = np.zeros((h, 1 + w * 4), dtype=np.uint8)
    rows[:, 1:] = arr.reshape(h, w * 4)  # leading 0 = filter None
    idat = _stored_zlib_stream(rows.tobytes())
    return b"".join(
        [
            _SIGNATURE,
            _chunk(b"IHDR", ihdr),
            _chunk(b"IDAT", idat),
            _chunk(b"IEND", b""),
        ]
    )


def _unfilter(raw: np.ndarray, h: int, stride: int, bpp: int) -> np.ndarray:
    rows = raw.reshape(h, 1 + stride)
    out = np.zeros((h, stride), dtype=np.uint8)
    for y in range(h):
        ftype = int(rows[y, 0])
        cur = rows[y, 1:].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y > 0 else np.zeros(stride, np.int32)
        if ftype == 0:
            line = cur
        elif ftype == 2:  # Up
            line = (cur + prev) & 0xFF
        else:
            line = np.zeros(stride, dtype=np.int32)
            for x in range(stride):
                left = line[x - bpp] if x >= bpp else 0
                up = prev[x]
                ul = prev[x - bpp] if x >= bpp else 0
                if ftype == 1:  # Sub
                    pred = left
                elif ftype == 3:  # Average
                    pred = (left + up) // 2
                elif ftype == 4:  # Paeth
                    p = left + up - ul
                    pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                    if pa <= pb and pa <= pc:
                        pred = left
                    elif pb <= pc:
                        pred = up
                    else:
                        pred = ul
                else:
                    raise PngError(f"unknown filter type {ftype}")
                line[x] = (cur[x] + pred) & 0xFF
        out[y] = line.astype(np.uint8)
    return out


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an (h, w, 4) uint8 RGBA array."""
    if data[:8] != _SIGNATURE:
        raise PngError("not a PNG file")
    pos = 8
    width = height = None
    color_type = bit_depth = None
    idat = bytearray()
    while pos < len(data):
        if pos + 8 > len(data):
            raise PngError("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, bit_depth, color_type, _, _, interlace = struct.unpack(
                ">IIBBBBB", payload
            )
            if interlace != 0:
                raise PngError("interlaced PNG not supported")
            if bit_depth != 8:
                raise PngError(f"unsupported bit depth {bit_depth}")
            if color_type not in (0, 2, 4, 6):
                raise PngError(f"unsupported color type {color_type}")
        elif tag == b"IDAT":
            idat.extend(payload)
        elif tag == b"IEND":
            break
    if width is None:
        raise PngError("missing IHDR")
    channels = {0: 1, 2: 3, 4: 2, 6: 4}[color_type]
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise PngError(f"corrupt image data: {exc}") from exc
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise PngError("image data length mismatch")
    pixels = _unfilter(np.frombuffer(raw, dtype=np.uint8), height, stride, channels)
    pixels = pixels.reshape(height, width, channels)
    rgba = np.empty((height, width, 4), dtype=np.uint8)
    if color_type == 0:
        rgba[..., :3] = pixels
        rgba[..., 3] = 255
    elif color_type == 4:
        rgba[..., :3] = pixels[..., :1]
        rgba[..., 3] = pixels[..., 1]
    elif color_type == 2:
        rgba[..., :3] = pixels
        rgba[..., 3] = 255
    else:
        rgba[...] = pixels
    return rgba
