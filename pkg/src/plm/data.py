"""MNIST ingestion, normalization, class encoding and the group split."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, RangeError, ShapeError

IDX3_MAGIC = 2051
SIDE = 28
PIXELS = SIDE * SIDE
N_CLASSES = 75
N_GROUPS = 3
GROUP_SIZE = N_CLASSES // N_GROUPS
TRAIN_IMAGES = "train-images-idx3-ubyte"


def _read_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def resolve_images_file(path: str | os.PathLike) -> Path:
    """Accept either the IDX file itself or a directory containing it."""
    path = Path(path)
    if path.is_dir():
        for name in (TRAIN_IMAGES, TRAIN_IMAGES + ".gz", "train-images.idx3-ubyte"):
            if (path / name).is_file():
                return path / name
        raise FileNotFoundError(f"no {TRAIN_IMAGES}[.gz] in {path}")
    return path


def load_idx_images(path: str | os.PathLike, count: int) -> list[np.ndarray]:
    """Return the first ``count`` images of an IDX3 file as 28x28 uint8 arrays."""
    path = resolve_images_file(path)
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise FormatError(f"{path}: shorter than the 16-byte IDX3 header")
    magic, n_images, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX3_MAGIC:
        raise FormatError(f"{path}: bad magic {magic}, expected {IDX3_MAGIC}")
    if rows != SIDE or cols != SIDE:
        raise FormatError(f"{path}: images are {rows}x{cols}, expected {SIDE}x{SIDE}")
    if count < 1 or count > n_images:
        raise RangeError(f"requested {count} images but the file holds {n_images}")
    end = 16 + count * PIXELS
    if len(raw) < end:
        raise OSError(f"{path}: truncated payload ({len(raw)} bytes, need {end})")
    block = np.frombuffer(raw, dtype=np.uint8, count=count * PIXELS, offset=16)
    return [img.copy() for img in block.reshape(count, SIDE, SIDE)]


def write_idx_images(images: np.ndarray, path: str | os.PathLike) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3 or images.shape[1:] != (SIDE, SIDE):
        raise ShapeError(f"expected (n, {SIDE}, {SIDE}) uint8 images, got {images.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX3_MAGIC, images.shape[0], SIDE, SIDE))
        fh.write(images.tobytes())


def vectorize(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.uint8)
    if raw.size != PIXELS:
        raise ShapeError(f"expected {PIXELS} bytes, got {raw.size}")
    return raw.reshape(PIXELS).astype(np.float64) / 255.0


def zero_mean(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v - v.mean(axis=-1, keepdims=True)


def one_hot(cls: int, width: int = N_CLASSES) -> np.ndarray:
    if not 0 <= cls < width:
        raise RangeError(f"class {cls} outside 0..{width - 1}")
    v = np.zeros(width)
    v[cls] = 1.0
    return v


@dataclass(frozen=True)
class Dataset75:
    """The first 75 images; image ``i`` is class ``i``."""

    images: np.ndarray  # (75, 784) floats in [0, 1]

    def __post_init__(self) -> None:
        if self.images.shape != (N_CLASSES, PIXELS):
            raise ShapeError(f"Dataset75 needs shape ({N_CLASSES}, {PIXELS}), got {self.images.shape}")
        if not np.all(np.isfinite(self.images)):
            raise ValueError("non-finite pixel values")

    def __len__(self) -> int:
        return N_CLASSES

    @classmethod
    def from_idx(cls, path: str | os.PathLike) -> "Dataset75":
        raws = load_idx_images(path, N_CLASSES)
        return cls(np.stack([vectorize(r) for r in raws]))


@dataclass(frozen=True)
class GroupAssignment:
    group_of: tuple[int, ...]  # group id 1..3 for class 0..74
    seed: int

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.group_of) == group)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.group_of)


def split_groups(seed: int) -> GroupAssignment:
    order = np.random.default_rng(seed).permutation(N_CLASSES)
    group_of = np.empty(N_CLASSES, dtype=int)
    for g in range(N_GROUPS):
        group_of[order[g * GROUP_SIZE:(g + 1) * GROUP_SIZE]] = g + 1
    return GroupAssignment(tuple(int(g) for g in group_of), seed)


def to_bytes(v: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def export_image_pgm(v: np.ndarray, path: str | os.PathLike) -> None:
    v = np.asarray(v)
    if v.size != PIXELS:
        raise ShapeError(f"expected {PIXELS} pixels, got {v.size}")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{SIDE} {SIDE}\n255\n".encode("ascii"))
        fh.write(to_bytes(v.reshape(PIXELS)).tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary P5 PGM written by :func:`export_image_pgm` into [0, 1] floats."""
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != b"P5" or maxval != 255:
        raise FormatError(f"{path}: not an 8-bit binary PGM")
    payload = raw[pos + 1:pos + 1 + width * height]
    if len(payload) != width * height:
        raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
