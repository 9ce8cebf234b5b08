"""Plain PGM/PPM raster IO plus the heatmap and logo-table artifacts."""

import numpy as np

from .errors import DataError


def write_pgm(path, arr, maxval=255):
    """Binary PGM; 16-bit samples are big-endian per the format."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"PGM expects a 2-d array, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        if maxval < 256:
            f.write(arr.astype(">u1").tobytes())
        else:
            f.write(arr.astype(">u2").tobytes())


def write_ppm(path, arr):
    """Binary 8-bit RGB PPM from an (H, W, 3) array."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"PPM expects an (H, W, 3) array, got shape {arr.shape}")
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.astype(">u1").tobytes())


def _read_header(f, magic, path):
    if f.readline().strip() != magic:
        raise DataError(f"{path}: not a {magic.decode()} file")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise DataError(f"{path}: truncated header")
        line = line.split(b"#", 1)[0]
        fields.extend(int(tok) for tok in line.split())
    return fields[0], fields[1], fields[2]


def read_pgm(path):
    with open(path, "rb") as f:
        w, h, maxval = _read_header(f, b"P5", path)
        dtype = ">u1" if maxval < 256 else ">u2"
        data = np.frombuffer(f.read(), dtype=dtype)
    if data.size != w * h:
        raise DataError(f"{path}: expected {w * h} samples, got {data.size}")
    return data.reshape(h, w).astype(np.uint16), maxval


def read_ppm(path):
    with open(path, "rb") as f:
        w, h, maxval = _read_header(f, b"P6", path)
        data = np.frombuffer(f.read(), dtype=">u1")
    if data.size != w * h * 3:
        raise DataError(f"{path}: expected {w * h * 3} samples, got {data.size}")
    return data.reshape(h, w, 3).astype(np.uint8), maxval


def heatmap_raster(relevance) -> np.ndarray:
    """Signed relevance as an (H, W, 3) byte image.

    Positive relevance goes to the red channel, negative to blue, both
    scaled by the image's max |r| so the strongest attribution saturates.
    Channel inputs are summed over channels first.
    """
    r = np.asarray(relevance, dtype=np.float64)
    if r.ndim == 3:
        r = r.sum(axis=0)
    if r.ndim != 2:
        raise ValueError(f"expected (H, W) or (C, H, W) relevance, got shape {r.shape}")
    peak = float(np.max(np.abs(r)))
    if peak == 0.0:
        peak = 1.0
    img = np.zeros(r.shape + (3,), dtype=np.uint8)
    img[:, :, 0] = np.round(np.clip(r, 0.0, None) / peak * 255.0).astype(np.uint8)
    img[:, :, 2] = np.round(np.clip(-r, 0.0, None) / peak * 255.0).astype(np.uint8)
    return img


def logo_rows(relevance, bases="ACGT"):
    """Rows (position, base, relevance) for a (4, length) attribution."""
    r = np.asarray(relevance, dtype=np.float64)
    if r.ndim == 3 and r.shape[0] == 1:
        r = r[0]
    if r.ndim != 2 or r.shape[0] != len(bases):
        raise ValueError(f"expected ({len(bases)}, length) relevance, got shape {r.shape}")
    rows = []
    for pos in range(r.shape[1]):
        for b, base in enumerate(bases):
            rows.append((pos, base, float(r[b, pos])))
    return rows


def write_logo_tsv(path, relevance, bases="ACGT"):
    with open(path, "w", encoding="utf-8") as f:
        f.write("position\tbase\trelevance\n")
        for pos, base, value in logo_rows(relevance, bases):
            f.write(f"{pos}\t{base}\t{value!r}\n")
