"""Bit-exact binary tensor container, band export, and run manifests.

Container layout (all little-endian):

====== ======= ==================================
offset size    field
====== ======= ==================================
0      4       magic ``HT3\\0``
4      2 (u16) version (currently 1)
6      2 (u16) dtype code: 1 = float32, 2 = float64
8      4 (u32) h
12     4 (u32) w
16     4 (u32) b
20     --      payload, frontal-slice-major: slice k contiguous,
               row-major within a slice
====== ======= ==================================
"""

import struct

import numpy as np

MAGIC = b"HT3\x00"
VERSION = 1
_DTYPE_BY_CODE = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_BY_KIND = {4: 1, 8: 2}
_HEADER = struct.Struct("<HHIII")


class FormatError(ValueError):
    """Malformed tensor container; the message names the offending field."""


def write_tensor(path, x):
    """Write ``x`` (float32 or float64, shape (h, w, b)) to ``path``."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected an order-3 array, got shape {x.shape}")
    if x.dtype.kind != "f" or x.dtype.itemsize not in _CODE_BY_KIND:
        raise ValueError(f"unsupported dtype {x.dtype}; use float32 or float64")
    code = _CODE_BY_KIND[x.dtype.itemsize]
    h, w, b = x.shape
    payload = np.ascontiguousarray(
        np.moveaxis(x, 2, 0), dtype=_DTYPE_BY_CODE[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(VERSION, code, h, w, b))
        fh.write(payload)


def read_tensor(path):
    """Read a tensor container; exact round trip of :func:`write_tensor`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + _HEADER.size:
        raise FormatError(f"truncated header: {len(blob)} bytes")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}")
    version, code, h, w, b = _HEADER.unpack_from(blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if code not in _DTYPE_BY_CODE:
        raise FormatError(f"unknown dtype code {code}")
    dtype = _DTYPE_BY_CODE[code]
    expected = h * w * b * dtype.itemsize
    payload = blob[4 + _HEADER.size:]
    if len(payload) != expected:
        raise FormatError(f"payload length {len(payload)}, expected {expected}")
    flat = np.frombuffer(payload, dtype=dtype)
    return np.moveaxis(flat.reshape(b, h, w), 0, 2).copy()


def export_band(x, k, path):
    """Export band ``k`` as an 8-bit binary PGM, min-max scaled.

    The scaling bounds go to a one-line sidecar at ``path + ".txt"``.
    A constant band maps to mid-gray (128) and the sidecar notes it.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected an order-3 array, got shape {x.shape}")
    if not 0 <= k < x.shape[2]:
        raise IndexError(f"band {k} out of range for b={x.shape[2]}")
    band = x[:, :, k].astype(np.float64)
    lo = float(band.min())
    hi = float(band.max())
    constant = hi - lo <= 0.0
    if constant:
        pixels = np.full(band.shape, 128, dtype=np.uint8)
    else:
        pixels = np.rint((band - lo) / (hi - lo) * 255.0).astype(np.uint8)
    h, w = band.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    note = " constant=1" if constant else ""
    with open(str(path) + ".txt", "w") as fh:
        fh.write(f"min={lo!r} max={hi!r}{note}\n")


def write_manifest(path, entries):
    """Write a plain-text key=value manifest (one pair per line)."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            text = str(value)
            if "\n" in text:
                raise ValueError(f"manifest value for {key!r} contains a newline")
            fh.write(f"{key}={text}\n")


def read_manifest(path):
    """Read a key=value manifest back into a dict of strings."""
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"manifest line without '=': {line!r}")
            entries[key] = value
    return entries
