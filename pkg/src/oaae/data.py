"""Dataset readers (IDX, CIFAR-10 binary), noise injection and a synthetic fixture."""
from __future__ import annotations

import gzip
import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rng_mod

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    split: str = "train"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, mask) -> "Dataset":
        return Dataset(self.images[mask], self.labels[mask], self.split, dict(self.provenance))

    def without_class(self, label: int) -> "Dataset":
        return self.subset(self.labels != label)


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    return gzip.decompress(raw) if path.suffix == ".gz" else raw


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def parse_idx(data: bytes, expected_magic: int | None = None, name: str = "<bytes>") -> np.ndarray:
    """Parse an unsigned-byte IDX container into a uint8 array."""
    if len(data) < 4:
        raise ParseError(f"{name}: truncated header at offset 0")
    (magic,) = struct.unpack_from(">I", data, 0)
    if (expected_magic is not None and magic != expected_magic) or (magic >> 8) != 0x08:
        raise ParseError(f"{name}: bad magic 0x{magic:08x} at offset 0")
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise ParseError(f"{name}: truncated dimension sizes at offset 4")
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    count = int(np.prod(dims)) if ndim else 0
    if len(data) - header_end < count:
        raise ParseError(f"{name}: truncated payload at offset {len(data)}; "
                         f"expected {count} bytes after offset {header_end}")
    if len(data) - header_end > count:
        raise ParseError(f"{name}: {len(data) - header_end - count} unexpected bytes at offset {header_end + count}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header_end).reshape(dims)


def encode_idx(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.tobytes()


def write_idx(array: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_idx(array))


def read_idx(images_path, labels_path, split: str = "train") -> Dataset:
    img_bytes, lbl_bytes = _read_bytes(images_path), _read_bytes(labels_path)
    images = parse_idx(img_bytes, IDX_IMAGES_MAGIC, str(images_path))
    labels = parse_idx(lbl_bytes, IDX_LABELS_MAGIC, str(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise ParseError(f"{images_path} holds {images.shape[0]} images but {labels_path} holds "
                         f"{labels.shape[0]} labels (count at offset 4)")
    return Dataset(
        (images[:, None].astype(np.float32) / np.float32(255.0)),
        labels.astype(np.int64),
        split,
        {"files": [str(images_path), str(labels_path)],
         "sha256": [_sha256(img_bytes), _sha256(lbl_bytes)]},
    )


def read_cifar10(paths, split: str = "train") -> Dataset:
    """Read CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar pixels."""
    images, labels, digests = [], [], []
    for path in paths:
        data = Path(path).read_bytes()
        if len(data) % CIFAR_RECORD:
            raise ParseError(f"{path}: length {len(data)} is not a multiple of {CIFAR_RECORD} "
                             f"(partial record at offset {len(data) - len(data) % CIFAR_RECORD})")
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels.append(records[:, 0].astype(np.int64))
        images.append(records[:, 1:].reshape(-1, 3, 32, 32))
        digests.append(_sha256(data))
    if images:
        pix = np.concatenate(images).astype(np.float32) / np.float32(255.0)
        lab = np.concatenate(labels)
    else:
        pix, lab = np.zeros((0, 3, 32, 32), np.float32), np.zeros(0, np.int64)
    return Dataset(pix, lab, split, {"files": [str(p) for p in paths], "sha256": digests})


def gaussian_noise(images, std: float, seed=0, clamp: bool = False) -> np.ndarray:
    """Add i.i.d. N(0, std^2) noise per pixel.  ``seed`` may be an int or a Generator."""
    if std < 0:
        raise ValueError("std must be >= 0")
    images = np.asarray(images)
    if std == 0:
        return images.copy()
    gen = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noisy = images + (std * gen.standard_normal(images.shape)).astype(images.dtype)
    return np.clip(noisy, 0.0, 1.0) if clamp else noisy


def bar_template(angle: float, side: int, width: float | None = None) -> np.ndarray:
    """A soft bar through the image centre at ``angle`` radians."""
    width = side / 10.0 if width is None else width
    coords = np.arange(side) - (side - 1) / 2.0
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    # signed distance to the line through the origin with direction (cos, sin)
    dist = -np.sin(angle) * xx + np.cos(angle) * yy
    return np.exp(-0.5 * (dist / width) ** 2)


def class_templates(num_classes: int, side: int) -> np.ndarray:
    return np.stack([bar_template(np.pi * c / num_classes, side) for c in range(num_classes)])


def synthetic_multimodal(num_classes: int, per_class: int, side: int = 16, seed: int = 0,
                         noise_std: float = 0.3, split: str = "train") -> Dataset:
    """Oriented-bar images, one orientation per class, plus clipped pixel noise."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    templates = class_templates(num_classes, side)
    labels = np.repeat(np.arange(num_classes), per_class)
    images = templates[labels]
    if noise_std > 0:
        gen = rng_mod.stream(seed, f"synthetic/{split}")
        images = np.clip(images + noise_std * gen.standard_normal(images.shape), 0.0, 1.0)
    return Dataset(images[:, None].astype(np.float32), labels.astype(np.int64), split,
                   {"synthetic": {"classes": num_classes, "per_class": per_class, "side": side,
                                  "seed": seed, "noise_std": noise_std}})


def data_root(root=None) -> Path:
    return Path(root or os.environ.get("OAAE_DATA_DIR", "data"))


def load_dataset(name: str, split: str, root=None, **synthetic) -> Dataset:
    """Load ``mnist``, ``fashion-mnist``, ``cifar10`` or ``synthetic`` by name."""
    if name == "synthetic":
        return synthetic_multimodal(split=split, **synthetic)
    base = data_root(root)
    if name in ("mnist", "fashion-mnist"):
        img_name, lbl_name = IDX_FILES[split]
        folder = base / name

        def find(stem):
            for candidate in (folder / stem, folder / (stem + ".gz")):
                if candidate.exists():
                    return candidate
            raise FileNotFoundError(f"{folder / stem}[.gz] not found")

        return read_idx(find(img_name), find(lbl_name), split)
    if name == "cifar10":
        folder = base / "cifar-10-batches-bin"
        paths = [folder / f for f in CIFAR_FILES[split]]
        for p in paths:
            if not p.exists():
                raise FileNotFoundError(f"{p} not found")
        return read_cifar10(paths, split)
    raise ValueError(f"unknown dataset {name!r}")
