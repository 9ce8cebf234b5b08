"""Synthetic datasets with known ground truth.

Two generators: genome sequences with one planted motif per class over a
uniform background, and small images containing a single bright shape on a
textured background. Both record ground-truth masks covering exactly the
planted signal and are deterministic given the seed.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .rasters import read_pgm, write_pgm

BASES = "ACGT"
_BASE_INDEX = {b: i for i, b in enumerate(BASES)}


def one_hot_encode(sequence: str) -> np.ndarray:
    """Encode a base string as a binary (4, length) array, rows A/C/G/T."""
    out = np.zeros((4, len(sequence)), dtype=np.float64)
    for pos, base in enumerate(sequence):
        try:
            out[_BASE_INDEX[base], pos] = 1.0
        except KeyError:
            raise DataError(f"unknown base {base!r} at position {pos}") from None
    return out


@dataclass(frozen=True)
class GenomeSample:
    sequence: str
    one_hot: np.ndarray  # (4, length), every column sums to 1
    label: int
    mask: np.ndarray  # (4, length) bool, true on all rows of the motif span
    motif_span: tuple  # [start, end)


@dataclass
class GenomeDataset:
    samples: list
    motif_table: dict
    length: int
    seed: int

    kind = "genome"

    @property
    def inputs(self) -> np.ndarray:
        return np.stack([s.one_hot[None] for s in self.samples])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def masks(self) -> np.ndarray:
        return np.stack([s.mask[None] for s in self.samples])

    def __len__(self):
        return len(self.samples)


def gen_genome_dataset(n, motif_table, noise_rate=0.0, seed=0, length=250) -> GenomeDataset:
    """Uniform-background sequences, one class motif planted per sample.

    ``motif_table`` maps label -> motif string; labels are assigned round
    robin so classes stay balanced within one sample. The motif is planted
    at a uniform random position and the mask records its span. With
    ``noise_rate > 0`` each planted position mutates to another base with
    that probability (the mask is unchanged).
    """
    motif_table = {int(k): str(v).upper() for k, v in motif_table.items()}
    if not motif_table:
        raise DataError("motif table is empty")
    for label, motif in motif_table.items():
        if not motif or len(motif) > length:
            raise DataError(f"motif for label {label} must have length in [1, {length}]")
        for ch in motif:
            if ch not in _BASE_INDEX:
                raise DataError(f"motif for label {label} contains unknown base {ch!r}")
    labels_sorted = sorted(motif_table)
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = labels_sorted[i % len(labels_sorted)]
        motif = motif_table[label]
        seq = rng.integers(0, 4, size=length)
        start = int(rng.integers(0, length - len(motif) + 1))
        planted = [_BASE_INDEX[b] for b in motif]
        if noise_rate > 0.0:
            for j in range(len(planted)):
                if rng.random() < noise_rate:
                    planted[j] = (planted[j] + int(rng.integers(1, 4))) % 4
        seq[start : start + len(motif)] = planted
        sequence = "".join(BASES[b] for b in seq)
        mask = np.zeros((4, length), dtype=bool)
        mask[:, start : start + len(motif)] = True
        samples.append(
            GenomeSample(
                sequence=sequence,
                one_hot=one_hot_encode(sequence),
                label=label,
                mask=mask,
                motif_span=(start, start + len(motif)),
            )
        )
    return GenomeDataset(samples=samples, motif_table=motif_table, length=length, seed=int(seed))


@dataclass(frozen=True)
class ShapeImageSample:
    image: np.ndarray  # (1, H, W) in [0, 1]
    label: int
    mask: np.ndarray  # (1, H, W) bool, true exactly on the shape


@dataclass
class ShapeDataset:
    samples: list
    shape_kinds: tuple
    image_size: int
    seed: int

    kind = "shapes"

    @property
    def inputs(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def masks(self) -> np.ndarray:
        return np.stack([s.mask for s in self.samples])

    def __len__(self):
        return len(self.samples)


def gen_shape_dataset(n, image_size=16, shape_kinds=("rectangle", "disk"), seed=0) -> ShapeDataset:
    """One bright shape per image on a dim noisy background; label = kind.

    Background pixels are uniform in [0, 0.4), shape pixels around a
    per-image intensity in [0.65, 0.95] with small pixel noise, so the
    shape always differs from the background. Shapes cover a substantial
    part of the image (side roughly 3/8 to 5/8 of it), which keeps the
    class evidence spread over many windows. The mask is exactly the shape
    support and is never empty.
    """
    if image_size < 16:
        raise DataError(f"image size must be >= 16, got {image_size}")
    shape_kinds = tuple(shape_kinds)
    rng = np.random.default_rng(seed)
    h = w = image_size
    lo_side = max(3, (3 * h) // 8)
    hi_side = max(lo_side + 1, (5 * h) // 8)
    samples = []
    for i in range(n):
        label = i % len(shape_kinds)
        kind = shape_kinds[label]
        img = rng.uniform(0.0, 0.4, size=(h, w))
        mask = np.zeros((h, w), dtype=bool)
        if kind == "rectangle":
            rh = int(rng.integers(lo_side, hi_side + 1))
            rw = int(rng.integers(lo_side, hi_side + 1))
            y0 = int(rng.integers(1, h - rh))
            x0 = int(rng.integers(1, w - rw))
            mask[y0 : y0 + rh, x0 : x0 + rw] = True
        elif kind == "disk":
            radius = float(rng.uniform(0.22 * h, 0.325 * h))
            cy = float(rng.uniform(radius + 1, h - radius - 1))
            cx = float(rng.uniform(radius + 1, w - radius - 1))
            yy, xx = np.mgrid[0:h, 0:w]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
        else:
            raise DataError(f"unknown shape kind {kind!r}")
        intensity = rng.uniform(0.65, 0.95)
        img[mask] = np.clip(intensity + rng.uniform(-0.05, 0.05, size=int(mask.sum())), 0.0, 1.0)
        samples.append(ShapeImageSample(image=img[None], label=label, mask=mask[None]))
    return ShapeDataset(
        samples=samples, shape_kinds=shape_kinds, image_size=image_size, seed=int(seed)
    )


# ---------------------------------------------------------------------------
# dataset files

_META = "dataset.json"


def save_genome_dataset(ds: GenomeDataset, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "kind": ds.kind,
        "n": len(ds),
        "length": ds.length,
        "seed": ds.seed,
        "motifs": {str(k): v for k, v in sorted(ds.motif_table.items())},
    }
    with open(os.path.join(out_dir, _META), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "sequences.tsv"), "w", encoding="utf-8") as f:
        f.write("id\tsequence\tlabel\n")
        for i, s in enumerate(ds.samples):
            f.write(f"{i}\t{s.sequence}\t{s.label}\n")
    # mask spans are half-open [start, end)
    with open(os.path.join(out_dir, "masks.tsv"), "w", encoding="utf-8") as f:
        f.write("id\tstart\tend\n")
        for i, s in enumerate(ds.samples):
            f.write(f"{i}\t{s.motif_span[0]}\t{s.motif_span[1]}\n")


def save_shape_dataset(ds: ShapeDataset, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    mask_dir = os.path.join(out_dir, "masks")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(mask_dir, exist_ok=True)
    meta = {
        "kind": ds.kind,
        "n": len(ds),
        "imageSize": ds.image_size,
        "seed": ds.seed,
        "shapeKinds": list(ds.shape_kinds),
    }
    with open(os.path.join(out_dir, _META), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w", encoding="utf-8") as f:
        f.write("id\tlabel\n")
        for i, s in enumerate(ds.samples):
            f.write(f"{i}\t{s.label}\n")
    for i, s in enumerate(ds.samples):
        # 16-bit grayscale; quantization to 1/65535 steps is documented
        img16 = np.round(s.image[0] * 65535.0).astype(np.uint16)
        write_pgm(os.path.join(img_dir, f"img_{i:04d}.pgm"), img16, maxval=65535)
        write_pgm(
            os.path.join(mask_dir, f"mask_{i:04d}.pgm"),
            (s.mask[0] * 255).astype(np.uint8),
            maxval=255,
        )


def save_dataset(ds, out_dir) -> None:
    if ds.kind == "genome":
        save_genome_dataset(ds, out_dir)
    elif ds.kind == "shapes":
        save_shape_dataset(ds, out_dir)
    else:
        raise DataError(f"unknown dataset kind {ds.kind!r}")


def _read_tsv(path, columns):
    if not os.path.exists(path):
        raise DataError(f"missing dataset file {path}")
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != columns:
            raise DataError(f"{path}: expected columns {columns}, got {header}")
        for line_no, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(columns):
                raise DataError(f"{path}: line {line_no} has {len(parts)} fields")
            rows.append(parts)
    return rows


def load_dataset(data_dir):
    meta_path = os.path.join(data_dir, _META)
    if not os.path.exists(meta_path):
        raise DataError(f"missing {meta_path}")
    with open(meta_path, "r", encoding="utf-8") as f:
        try:
            meta = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{meta_path}: invalid JSON ({e.msg})") from e
    kind = meta.get("kind")
    if kind == "genome":
        return _load_genome(data_dir, meta)
    if kind == "shapes":
        return _load_shapes(data_dir, meta)
    raise DataError(f"{meta_path}: unknown dataset kind {kind!r}")


def _load_genome(data_dir, meta) -> GenomeDataset:
    length = int(meta["length"])
    seq_rows = _read_tsv(os.path.join(data_dir, "sequences.tsv"), ["id", "sequence", "label"])
    mask_rows = _read_tsv(os.path.join(data_dir, "masks.tsv"), ["id", "start", "end"])
    spans = {int(r[0]): (int(r[1]), int(r[2])) for r in mask_rows}
    samples = []
    for r in seq_rows:
        i, sequence, label = int(r[0]), r[1], int(r[2])
        if len(sequence) != length:
            raise DataError(f"sample {i}: sequence length {len(sequence)} != {length}")
        if i not in spans:
            raise DataError(f"sample {i}: no mask span")
        start, end = spans[i]
        mask = np.zeros((4, length), dtype=bool)
        mask[:, start:end] = True
        samples.append(
            GenomeSample(
                sequence=sequence,
                one_hot=one_hot_encode(sequence),
                label=label,
                mask=mask,
                motif_span=(start, end),
            )
        )
    motifs = {int(k): v for k, v in meta.get("motifs", {}).items()}
    return GenomeDataset(
        samples=samples, motif_table=motifs, length=length, seed=int(meta.get("seed", 0))
    )


def _load_shapes(data_dir, meta) -> ShapeDataset:
    label_rows = _read_tsv(os.path.join(data_dir, "labels.tsv"), ["id", "label"])
    samples = []
    for r in label_rows:
        i, label = int(r[0]), int(r[1])
        img_path = os.path.join(data_dir, "images", f"img_{i:04d}.pgm")
        mask_path = os.path.join(data_dir, "masks", f"mask_{i:04d}.pgm")
        img, maxval = read_pgm(img_path)
        mask, _ = read_pgm(mask_path)
        samples.append(
            ShapeImageSample(
                image=(img.astype(np.float64) / maxval)[None],
                label=label,
                mask=(mask > 0)[None],
            )
        )
    return ShapeDataset(
        samples=samples,
        shape_kinds=tuple(meta.get("shapeKinds", [])),
        image_size=int(meta["imageSize"]),
        seed=int(meta.get("seed", 0)),
    )
