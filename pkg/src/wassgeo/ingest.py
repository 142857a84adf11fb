"""Turning raw inputs (grid images, pixel clouds) into discrete measures."""

import numpy as np

from .kmeans import kmeans
from .measures import DiscreteMeasure


def image_to_measure(pixels):
    """Normalize a grayscale intensity grid into a planar measure.

    Atoms sit at pixel centers (col + 1/2, row + 1/2) with weight equal to the
    pixel's share of the total intensity; zero pixels are dropped. The second
    coordinate follows raster order (y grows downward).
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    if np.any(pixels < 0):
        raise ValueError("intensities must be nonnegative")
    total = pixels.sum()
    if total <= 0:
        raise ValueError("image has no positive intensity")
    rows, cols = np.nonzero(pixels > 0)
    locations = np.stack([cols + 0.5, rows + 0.5])
    return DiscreteMeasure(locations, pixels[rows, cols] / total)


def quantize_colors(pixels, k, seed):
    """Quantize an RGB pixel cloud into at most k weighted colors.

    Seeded k-means (k-means++ initialization, capped iterations) on rows in
    [0, 1]^3; atom weights are the cluster pixel fractions. Fewer distinct
    pixels than k yields the distinct-pixel measure (with a warning from the
    clustering step).
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    if pixels.ndim != 2 or pixels.shape[1] != 3:
        raise ValueError("pixels must be an (m, 3) RGB array")
    if k < 1:
        raise ValueError("k must be >= 1")
    if pixels.shape[0] < k:
        raise ValueError(f"need at least k={k} pixels, got {pixels.shape[0]}")
    centers, weights, _ = kmeans(pixels, k, np.random.default_rng(seed))
    keep = weights > 0
    return DiscreteMeasure(centers[keep].T, weights[keep])


def _read_pnm_tokens(raw, count):
    """Yield ASCII tokens from a PNM body, skipping '#' comments."""
    tokens = []
    for line in raw.split(b"\n"):
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
        if len(tokens) >= count:
            break
    return tokens


def _parse_pnm_header(data):
    parts = []
    i = 0
    while len(parts) < 4 and i < len(data):
        # magic, width, height, maxval; comments run to end of line
        if data[i : i + 1] == b"#":
            i = data.index(b"\n", i) + 1
            continue
        if data[i : i + 1].isspace():
            i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        parts.append(data[i:j])
        i = j
    return parts, i + 1


def read_pgm(path):
    """Read a PGM image (P2 ASCII or P5 binary) as a float array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), body_start = _parse_pnm_header(data)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P2":
        vals = np.array(
            _read_pnm_tokens(data[body_start:], w * h)[: w * h], dtype=np.float64
        )
    elif magic == b"P5":
        dtype = ">u2" if maxval > 255 else np.uint8
        vals = np.frombuffer(data[body_start:], dtype=dtype, count=w * h).astype(
            np.float64
        )
    else:
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    if vals.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return vals.reshape(h, w) / maxval


def read_ppm(path):
    """Read a PPM image (P3 ASCII or P6 binary) as an (h, w, 3) array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), body_start = _parse_pnm_header(data)
    w, h, maxval = int(w), int(h), int(maxval)
    count = w * h * 3
    if magic == b"P3":
        vals = np.array(
            _read_pnm_tokens(data[body_start:], count)[:count], dtype=np.float64
        )
    elif magic == b"P6":
        dtype = ">u2" if maxval > 255 else np.uint8
        vals = np.frombuffer(data[body_start:], dtype=dtype, count=count).astype(
            np.float64
        )
    else:
        raise ValueError(f"{path}: not a PPM file (magic {magic!r})")
    if vals.size != count:
        raise ValueError(f"{path}: truncated pixel data")
    return vals.reshape(h, w, 3) / maxval
