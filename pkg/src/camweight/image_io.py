"""Binary PPM (P6) image output, bit-exact across platforms."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


def write_ppm(path, image: NDArray[np.float64]) -> None:
    """Write an (H, W, 3) float image in [0, 1] as binary P6 with maxval 255."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path) -> NDArray[np.float64]:
    """Read a binary P6 file back into an (H, W, 3) float image in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    # header: magic, width, height, maxval, single whitespace, then pixels
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM file: magic {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:])
    pos += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).astype(np.float64) / float(maxval)
