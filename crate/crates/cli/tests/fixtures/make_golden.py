"""Regenerates the joint bilateral upsampling golden files.

Brute force over every low-res sample, independent of the Rust kernel.
Run from this directory: python3 make_golden.py
"""
import math
import struct
import zlib

import numpy as np

SIGMA_S, SIGMA_R = 3.0, 15.0
RADIUS = math.ceil(3 * SIGMA_S)


def write_cft(path, arr):
    arr = np.asarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"CFT1")
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack("<%dI" % arr.ndim, *arr.shape))
        f.write(arr.tobytes())


def write_gray_png(path, img):
    h, w = img.shape
    raw = b"".join(b"\x00" + bytes(row) for row in img.astype(np.uint8))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    png = b"\x89PNG\r\n\x1a\n"
    png += chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(raw))
    png += chunk(b"IEND", b"")
    with open(path, "wb") as f:
        f.write(png)


def upsample(low, guide):
    _, hl, wl = low.shape
    hh, wh = guide.shape
    sx, sy = wh / wl, hh / hl

    def guide_pos(q, s, n):
        return int(min(max(math.floor((q + 0.5) * s - 0.5 + 0.5), 0), n - 1))

    out = np.zeros((2, hh, wh))
    for y in range(hh):
        for x in range(wh):
            px = (x + 0.5) / sx - 0.5
            py = (y + 0.5) / sy - 0.5
            c = guide[y, x]
            acc = np.zeros(2)
            k = 0.0
            for qy in range(hl):
                for qx in range(wl):
                    dx, dy = px - qx, py - qy
                    if abs(dx) > RADIUS or abs(dy) > RADIUS:
                        continue
                    g = guide[guide_pos(qy, sy, hh), guide_pos(qx, sx, wh)]
                    wgt = math.exp(-(dx * dx + dy * dy) / (2 * SIGMA_S**2)) * math.exp(
                        -((c - g) ** 2) / (2 * SIGMA_R**2)
                    )
                    acc += wgt * low[:, qy, qx]
                    k += wgt
            out[:, y, x] = acc / k
    return out


rng = np.random.default_rng(5)
low = rng.uniform(-60, 60, size=(2, 6, 8)).astype(np.float32)
guide = rng.integers(0, 256, size=(18, 24))
write_cft("jbu_low.cft", low)
write_gray_png("jbu_guide.png", guide)
write_cft("jbu_expected.cft", upsample(low.astype(np.float64), guide.astype(np.float64)))
