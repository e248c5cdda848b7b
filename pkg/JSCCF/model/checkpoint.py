"""
Checkpoint Module

Little-endian binary model files:

    magic "JSCF" | u32 version
    u32 L | u32 H | u32 W | u32 C | u32 kernel_size
    L x u32 k_j | L x u8 trained
    3 x (u32 count | count x u32 width)      encoder, decoder, combiner
    u32 record count
    records: u32 name length | name (utf-8) | u32 rank | rank x u32 extent
             | float32 values

Parameters are written in 32-bit precision; loading rebuilds the model from
the stored architecture and checks every record against it.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from JSCCF.errors import CheckpointFormatError, CheckpointVersionError, ConfigurationError
from JSCCF.model.arch import ArchSpec
from JSCCF.model.config.config import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from JSCCF.model.model import JsccModel, build_model

logger = logging.getLogger("JSCCF.model.checkpoint")

U32 = np.dtype("<u4")
F32 = np.dtype("<f4")


def _u32(*values: int) -> bytes:
    return np.asarray(values, dtype=U32).tobytes()


def _widths(widths) -> bytes:
    return _u32(len(widths), *widths)


def encode_checkpoint(model: JsccModel) -> bytes:
    spec = model.spec
    parts: List[bytes] = [
        CHECKPOINT_MAGIC,
        _u32(CHECKPOINT_VERSION),
        _u32(spec.layers, spec.height, spec.width, spec.channels, spec.kernel_size),
        _u32(*spec.channel_uses),
        np.asarray(model.trained, dtype=np.uint8).tobytes(),
        _widths(spec.encoder_widths),
        _widths(spec.decoder_widths),
        _widths(spec.combiner_widths),
    ]
    params = model.parameters()
    parts.append(_u32(len(params)))
    for name, tensor in params.items():
        raw = name.encode("utf-8")
        parts.append(_u32(len(raw)))
        parts.append(raw)
        parts.append(_u32(tensor.ndim, *tensor.shape))
        parts.append(np.ascontiguousarray(tensor.data, dtype=F32).tobytes())
    return b"".join(parts)


class _Reader:
    """Sequential reader that reports byte offsets in every error."""

    def __init__(self, payload: bytes, source: str):
        self.payload = payload
        self.source = source
        self.offset = 0

    def fail(self, message: str, offset: Optional[int] = None) -> CheckpointFormatError:
        at = self.offset if offset is None else offset
        return CheckpointFormatError(f"{self.source}: {message} at byte offset {at}")

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.payload):
            raise self.fail(
                f"truncated while reading {what} (need {size} bytes, "
                f"{len(self.payload) - self.offset} left)"
            )
        chunk = self.payload[self.offset: self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str, count: int = 1) -> np.ndarray:
        return np.frombuffer(self.take(4 * count, what), dtype=U32)

    def widths(self, what: str) -> tuple:
        count = int(self.u32(f"{what} count")[0])
        return tuple(int(w) for w in self.u32(what, count))


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> JsccModel:
    reader = _Reader(payload, source)
    magic = reader.take(len(CHECKPOINT_MAGIC), "magic")
    if magic != CHECKPOINT_MAGIC:
        raise reader.fail(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}", 0)
    version = int(reader.u32("version")[0])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{source}: checkpoint version {version} is incompatible with version "
            f"{CHECKPOINT_VERSION} at byte offset {len(CHECKPOINT_MAGIC)}"
        )

    spec_offset = reader.offset
    layers, height, width, channels, kernel_size = (int(v) for v in reader.u32("architecture", 5))
    channel_uses = tuple(int(k) for k in reader.u32("channel uses", layers))
    trained = [bool(b) for b in reader.take(layers, "trained flags")]
    encoder_widths = reader.widths("encoder widths")
    decoder_widths = reader.widths("decoder widths")
    combiner_widths = reader.widths("combiner widths")
    try:
        spec = ArchSpec(
            channel_uses=channel_uses, height=height, width=width, channels=channels,
            kernel_size=kernel_size, encoder_widths=encoder_widths,
            decoder_widths=decoder_widths, combiner_widths=combiner_widths,
        )
    except ConfigurationError as e:
        raise reader.fail(f"invalid architecture block ({e})", spec_offset) from e

    model = build_model(spec, seed=0)
    model.trained = trained
    params = model.parameters()
    count = int(reader.u32("record count")[0])
    if count != len(params):
        raise reader.fail(f"{count} parameter records, architecture has {len(params)}")

    seen = set()
    for _ in range(count):
        record_offset = reader.offset
        name_len = int(reader.u32("name length")[0])
        try:
            name = reader.take(name_len, "parameter name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise reader.fail("parameter name is not utf-8", record_offset) from e
        if name not in params or name in seen:
            raise reader.fail(f"unexpected parameter record '{name}'", record_offset)
        seen.add(name)
        rank = int(reader.u32(f"rank of '{name}'")[0])
        shape = tuple(int(e) for e in reader.u32(f"extents of '{name}'", rank))
        target = params[name]
        if shape != target.shape:
            raise reader.fail(f"'{name}' has shape {shape}, architecture expects {target.shape}", record_offset)
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * size, f"values of '{name}'"), dtype=F32)
        target.data = values.reshape(shape).astype(model.dtype)

    if reader.offset != len(payload):
        raise reader.fail(f"{len(payload) - reader.offset} trailing bytes")
    return model


def save_checkpoint(model: JsccModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model))
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> JsccModel:
    """
    Raises:
        FileNotFoundError: If ``path`` does not exist
        CheckpointFormatError: On malformed content (with the byte offset)
        CheckpointVersionError: On a version mismatch
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    model = decode_checkpoint(path.read_bytes(), str(path))
    logger.info(f"Loaded checkpoint {path} ({model.layers} layers, trained={model.trained})")
    return model


def checkpoint_io(model: JsccModel, path: Union[str, Path], direction: str):
    """``direction`` "save" writes ``model`` and returns the path; "load" returns a model."""
    if direction == "save":
        return save_checkpoint(model, path)
    if direction == "load":
        return load_checkpoint(path)
    raise ValueError(f"direction must be 'save' or 'load', got '{direction}'")
