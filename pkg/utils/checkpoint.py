# utils/checkpoint.py
# Binary checkpoint format: magic "MOSR", version, key=value config blob, named float64 tensors.

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.errors import CheckpointFormatError, ContractViolation
from .corpus import Vocabulary
from .model import LanguageModel, ModelConfig, param_shapes

logger = logging.getLogger(__name__)

MAGIC = b"MOSR"
VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict[str, np.ndarray]
    vocab: Vocabulary | None = None
    train_config: dict | None = None
    rng_state: dict | None = None
    version: int = VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: LanguageModel, vocab: Vocabulary | None = None, train_config: dict | None = None,
                   rng: np.random.Generator | None = None) -> "Checkpoint":
        return cls(
            model_config=model.config,
            params={k: v.copy() for k, v in model.params.items()},
            vocab=vocab,
            train_config=train_config,
            rng_state=rng.bit_generator.state if rng is not None else None,
        )

    def to_model(self) -> LanguageModel:
        return LanguageModel(self.model_config, {k: v.copy() for k, v in self.params.items()})


def _config_blob(ckpt: Checkpoint) -> bytes:
    entries = {"model": ckpt.model_config.to_dict()}
    if ckpt.train_config is not None:
        entries["train"] = ckpt.train_config
    if ckpt.vocab is not None:
        entries["vocab_mode"] = ckpt.vocab.mode
        entries["vocab"] = list(ckpt.vocab.id_to_token)
    if ckpt.rng_state is not None:
        entries["rng_state"] = ckpt.rng_state
    for key, value in ckpt.extra.items():
        entries[key] = value
    # JSON values with ASCII escapes keep every entry on one line
    lines = [f"{key}={json.dumps(value, sort_keys=True)}" for key, value in entries.items()]
    return "\n".join(lines).encode("utf-8")


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    blob = _config_blob(ckpt)
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    for name in sorted(ckpt.params):
        tensor = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<I", tensor.ndim))
        buf.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
        buf.write(tensor.tobytes())
    Path(path).write_bytes(buf.getvalue())
    logger.info(f"Saved checkpoint with {len(ckpt.params)} tensors to {path}")


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(f"Checkpoint {self.path} is truncated while reading {what}.")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def done(self) -> bool:
        return self.pos >= len(self.data)


def _check_tensors(params: dict[str, np.ndarray], model_config: ModelConfig, path: Path) -> None:
    """Every tensor the config calls for, with its exact shape, and nothing else."""
    expected = param_shapes(model_config)
    missing = sorted(set(expected) - set(params))
    if missing:
        raise CheckpointFormatError(f"Checkpoint {path} is truncated or incomplete: missing tensors {missing}.")
    unexpected = sorted(set(params) - set(expected))
    if unexpected:
        raise CheckpointFormatError(f"Checkpoint {path} has unexpected tensors {unexpected}.")
    for name, shape in expected.items():
        if params[name].shape != tuple(shape):
            raise CheckpointFormatError(f"Tensor {name} in {path} has shape {params[name].shape}, expected {tuple(shape)}.")


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointFormatError(f"{path} is not a checkpoint (bad magic bytes).")
    (version,) = reader.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointFormatError(f"Unsupported checkpoint version {version} in {path}; expected {VERSION}.")
    (blob_len,) = reader.unpack("<Q", "config length")
    try:
        blob = reader.take(blob_len, "config").decode("utf-8")
        entries = {}
        for line in blob.split("\n"):
            key, value = line.split("=", 1)
            entries[key] = json.loads(value)
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointFormatError(f"Malformed config blob in {path}: {e}") from None

    params = {}
    while not reader.done:
        (name_len,) = reader.unpack("<H", "tensor name length")
        name = reader.take(name_len, "tensor name").decode("utf-8", errors="replace")
        (rank,) = reader.unpack("<I", f"rank of {name}")
        shape = reader.unpack(f"<{rank}Q", f"shape of {name}") if rank else ()
        count = int(np.prod(shape)) if rank else 1
        raw = reader.take(8 * count, f"data of {name}")
        params[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    try:
        model_config = ModelConfig.from_dict(entries.pop("model"))
    except (KeyError, TypeError, ContractViolation) as e:
        raise CheckpointFormatError(f"Checkpoint {path} has an invalid model config: {e}") from None
    _check_tensors(params, model_config, path)
    vocab = None
    if "vocab" in entries:
        try:
            vocab = Vocabulary(tuple(entries.pop("vocab")), entries.pop("vocab_mode"))
        except (KeyError, TypeError, ContractViolation) as e:
            raise CheckpointFormatError(f"Checkpoint {path} has an invalid vocabulary: {e}") from None
    return Checkpoint(
        model_config=model_config,
        params=params,
        vocab=vocab,
        train_config=entries.pop("train", None),
        rng_state=entries.pop("rng_state", None),
        version=version,
        extra=entries,
    )
