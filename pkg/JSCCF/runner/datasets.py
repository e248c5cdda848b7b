"""
Dataset Ingestion Module

This module turns image files into normalized N x H x W x C arrays:
- read_cifar10_bin: CIFAR-10 binary batches (1 label byte + 3072 pixel bytes
  per record, red, green and blue planes); labels are discarded
- read_ppm: binary P6 images with maxval 255
- synthetic_images: seeded smooth gradient + texture patterns
- load_dataset: any of the above split into disjoint train/val/test sets

Pixels are ingested as 8-bit values and stored as value / 255.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from JSCCF.errors import IngestionError
from JSCCF.model.config.config import DOWNSAMPLING

logger = logging.getLogger("JSCCF.runner.datasets")

CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_RECORD = 1 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS


@dataclass
class Dataset:
    """Disjoint splits of images in [0, 1]; ``val`` may be empty."""
    name: str
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        for split in (self.test, self.train, self.val):
            if len(split):
                return tuple(split.shape[1:])
        raise IngestionError(f"dataset {self.name} has no images")


def files_in(path: Union[str, Path], pattern: str) -> List[Path]:
    """
    ``path`` itself, or every file under it matching ``pattern`` in sorted order.

    Raises:
        FileNotFoundError: If ``path`` does not exist
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset path not found: {path}")
    if path.is_file():
        return [path]
    files = sorted(p for p in path.rglob(pattern) if p.is_file())
    logger.info(f"Found {len(files)} files matching '{pattern}' in {path}")
    return files


def check_dims(height: int, width: int, source: str) -> None:
    if height < DOWNSAMPLING or width < DOWNSAMPLING or height % DOWNSAMPLING or width % DOWNSAMPLING:
        raise IngestionError(f"{source}: image dims {height}x{width} are not multiples of {DOWNSAMPLING}")


def read_cifar10_bin(path: Union[str, Path]) -> np.ndarray:
    """
    Raises:
        IngestionError: If a file is not a whole number of 3073-byte records
    """
    batches = []
    for file in files_in(path, "*.bin"):
        raw = np.fromfile(file, dtype=np.uint8)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD:
            logger.error(f"{file}: {len(raw)} bytes is not a whole number of records")
            raise IngestionError(
                f"{file}: truncated CIFAR-10 batch ({len(raw)} bytes, records are {CIFAR_RECORD} bytes)"
            )
        records = raw.reshape(-1, CIFAR_RECORD)
        planes = records[:, 1:].reshape(-1, CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE)
        batches.append(planes.transpose(0, 2, 3, 1))
        logger.debug(f"{file}: {len(records)} images")
    if not batches:
        raise IngestionError(f"no CIFAR-10 batches under {path}")
    return np.concatenate(batches)


def _ppm_tokens(payload: bytes, count: int, source: str) -> Tuple[List[int], int]:
    """Read ``count`` whitespace-separated header integers after the magic, skipping comments."""
    tokens: List[int] = []
    i = 2
    while len(tokens) < count:
        if i >= len(payload):
            raise IngestionError(f"{source}: truncated PPM header")
        ch = payload[i:i + 1]
        if ch == b"#":
            end = payload.find(b"\n", i)
            i = len(payload) if end < 0 else end + 1
        elif ch.isspace():
            i += 1
        else:
            start = i
            while i < len(payload) and payload[i:i + 1].isdigit():
                i += 1
            if i == start:
                raise IngestionError(f"{source}: unexpected byte {ch!r} in PPM header at offset {i}")
            tokens.append(int(payload[start:i]))
    if i >= len(payload) or not payload[i:i + 1].isspace():
        raise IngestionError(f"{source}: PPM header must end with one whitespace byte")
    return tokens, i + 1


def decode_ppm(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """
    One binary P6 image as H x W x 3 uint8.

    Raises:
        IngestionError: On a bad magic, a maxval other than 255 or truncated pixels
    """
    if payload[:2] != b"P6":
        raise IngestionError(f"{source}: bad magic {payload[:2]!r}, expected b'P6'")
    (width, height, maxval), offset = _ppm_tokens(payload, 3, source)
    if maxval != 255:
        raise IngestionError(f"{source}: unsupported maxval {maxval} (only 255)")
    size = width * height * 3
    pixels = np.frombuffer(payload, dtype=np.uint8, count=-1, offset=offset)
    if len(pixels) < size:
        raise IngestionError(f"{source}: truncated pixel data ({len(pixels)} of {size} bytes)")
    return pixels[:size].reshape(height, width, 3)


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """A single .ppm file or a directory of equally sized ones."""
    images = [decode_ppm(file.read_bytes(), str(file)) for file in files_in(path, "*.ppm")]
    if not images:
        raise IngestionError(f"no PPM images under {path}")
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise IngestionError(f"PPM images under {path} differ in size: {sorted(shapes)}")
    return np.stack(images)


def synthetic_images(seed: int, count: int, height: int, width: int, channels: int = 3) -> np.ndarray:
    """
    Deterministic smooth images: a random linear gradient per channel plus a
    low-frequency sinusoidal texture, quantized to 8 bits.
    """
    check_dims(height, width, "synthetic")
    rng = np.random.default_rng([seed, count, height, width, channels])
    rows = np.linspace(0.0, 1.0, height)[None, :, None, None]
    cols = np.linspace(0.0, 1.0, width)[None, None, :, None]
    shape = (count, 1, 1, channels)
    base = rng.uniform(0.2, 0.8, shape)
    slope_r = rng.uniform(-0.4, 0.4, shape)
    slope_c = rng.uniform(-0.4, 0.4, shape)
    freq_r = rng.uniform(0.5, 3.0, shape)
    freq_c = rng.uniform(0.5, 3.0, shape)
    phase = rng.uniform(0.0, 2 * np.pi, shape)
    amplitude = rng.uniform(0.05, 0.2, shape)
    images = (
        base + slope_r * (rows - 0.5) + slope_c * (cols - 0.5)
        + amplitude * np.sin(2 * np.pi * (freq_r * rows + freq_c * cols) + phase)
    )
    return np.round(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)


def load_images(
    path: Optional[Union[str, Path]],
    fmt: str,
    seed: int = 0,
    count: int = 256,
    height: int = CIFAR_SIDE,
    width: int = CIFAR_SIDE,
    channels: int = CIFAR_CHANNELS,
) -> np.ndarray:
    """Ingest uint8 images in ``fmt`` ("cifar10-bin", "ppm" or "synthetic")."""
    if fmt == "synthetic":
        images = synthetic_images(seed, count, height, width, channels)
    elif fmt == "cifar10-bin":
        images = read_cifar10_bin(path)
    elif fmt == "ppm":
        images = read_ppm(path)
    else:
        raise IngestionError(f"unknown dataset format '{fmt}'")
    check_dims(images.shape[1], images.shape[2], str(path or fmt))
    logger.info(f"Ingested {len(images)} {fmt} images of shape {images.shape[1:]}")
    return images


def normalize(images: np.ndarray) -> np.ndarray:
    return images.astype(np.float32) / np.float32(255.0)


def load_dataset(
    path: Optional[Union[str, Path]],
    fmt: str,
    seed: int = 0,
    test_path: Optional[Union[str, Path]] = None,
    val_fraction: float = 0.1,
    test_fraction: float = 0.1,
    **kwargs,
) -> Dataset:
    """
    Ingest a dataset and split it into disjoint train/val/test sets.

    With ``test_path`` the test split is that file's images and only the
    validation split is carved out of ``path``; otherwise both come out of
    ``path`` by a seeded permutation. Split members keep their file order.

    Raises:
        IngestionError: On any ingestion failure
        FileNotFoundError: If a path does not exist
    """
    images = load_images(path, fmt, seed=seed, **kwargs)
    order = np.random.default_rng([seed, len(images)]).permutation(len(images))
    if test_path is not None:
        test = load_images(test_path, fmt, seed=seed + 1, **kwargs)
        if test.shape[1:] != images.shape[1:]:
            raise IngestionError(f"test images {test.shape[1:]} differ from training images {images.shape[1:]}")
        held_test = 0
    else:
        held_test = int(round(test_fraction * len(images)))
        test = images[np.sort(order[:held_test])]
    held_val = int(round(val_fraction * len(images)))
    if held_test + held_val >= len(images):
        raise IngestionError(f"{len(images)} images leave nothing to train on after the held-out splits")
    val = images[np.sort(order[held_test:held_test + held_val])]
    train = images[np.sort(order[held_test + held_val:])]
    name = fmt if path is None else f"{fmt}:{path}"
    logger.info(f"Dataset {name}: {len(train)} train, {len(val)} val, {len(test)} test images")
    return Dataset(name, normalize(train), normalize(val), normalize(test))
