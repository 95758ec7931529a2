"""Module for writing trained networks to disk and reading them back.

A checkpoint starts with a plain text header of `key=value` lines, opened by the magic line and
closed by an empty line:

    MULTIPOD-CHECKPOINT
    format_version=1
    config={"variant":"tri",...}
    seed=0
    epoch=100
    tensors=367

The header is followed by every entry of the state dict (parameters and batch norm statistics) in
state dict order: a little-endian uint32 name length, the UTF-8 name, a uint32 dimension count,
one uint32 per dimension, then the values as little-endian float32.
"""

import struct
from pathlib import Path

import msgspec
import numpy as np
import torch

from multipod.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from multipod.errors import (
    CheckpointConfigMismatchError,
    CheckpointCorruptError,
    CheckpointVersionError,
)
from multipod.model.multipod_net import MultiPodConfig, MultiPodNet, build_model

UINT32 = struct.Struct("<I")


def _encode_header(model: MultiPodNet, tensor_count: int) -> bytes:
    lines = [
        CHECKPOINT_MAGIC,
        f"format_version={CHECKPOINT_FORMAT_VERSION}",
        f"config={msgspec.json.encode(model.cfg).decode()}",
        f"seed={model.cfg.seed}",
        f"epoch={model.epoch}",
        f"tensors={tensor_count}",
        "",
        "",
    ]
    return "\n".join(lines).encode()


def save_checkpoint(model: MultiPodNet, path: Path) -> Path:
    """
    Writes a model with its config and epoch. Two models with identical parameters produce
    identical files.
    :return: The path written.
    """
    state = model.state_dict()
    chunks = [_encode_header(model, len(state))]
    for name, tensor in state.items():
        encoded_name = name.encode()
        values = tensor.detach().cpu().numpy().astype("<f4")
        chunks.append(UINT32.pack(len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(UINT32.pack(values.ndim))
        chunks.extend(UINT32.pack(dim) for dim in values.shape)
        chunks.append(values.tobytes())

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    return path


class _Reader:
    """Sequential reads from the tensor section that fail on a truncated file."""

    __slots__ = ("data", "offset", "path")

    def __init__(self, data: bytes, offset: int, path: Path) -> None:
        self.data = data
        self.offset = offset
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointCorruptError(f"{self.path}: checkpoint is truncated")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def uint32(self) -> int:
        return UINT32.unpack(self.take(UINT32.size))[0]


def _parse_header(data: bytes, path: Path) -> tuple[dict[str, str], int]:
    end = data.find(b"\n\n")
    if end < 0:
        raise CheckpointCorruptError(f"{path}: checkpoint header is incomplete")
    try:
        lines = data[:end].decode().split("\n")
    except UnicodeDecodeError:
        raise CheckpointCorruptError(f"{path}: checkpoint header is not text") from None
    if lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint file")

    header = {}
    for line in lines[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointCorruptError(f"{path}: malformed header line '{line}'")
        header[key] = value
    return header, end + 2


def load_checkpoint(path: Path, expected: MultiPodConfig | None = None) -> MultiPodNet:
    """
    Rebuilds a model from a checkpoint. Every parameter and statistic is restored bit-exactly.
    :param path: The checkpoint file.
    :param expected: When given, the checkpoint must hold a network with this parameter layout.
    """
    path = Path(path)
    data = path.read_bytes()
    header, offset = _parse_header(data, path)

    version = header.get("format_version")
    if version != str(CHECKPOINT_FORMAT_VERSION):
        raise CheckpointVersionError(
            f"{path}: checkpoint format version {version}, expected {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        cfg = msgspec.json.decode(header["config"], type=MultiPodConfig)
        epoch = int(header["epoch"])
        tensor_count = int(header["tensors"])
    except (KeyError, ValueError, msgspec.ValidationError, msgspec.DecodeError) as e:
        raise CheckpointCorruptError(f"{path}: bad checkpoint header ({e})") from None

    if expected is not None and not expected.same_layout(cfg):
        raise CheckpointConfigMismatchError(
            f"{path}: checkpoint holds a {cfg.variant} network (fusion={cfg.fusion}, "
            f"filters={cfg.use_directional_filters}, age={cfg.use_age}, widths={cfg.widths}), "
            f"expected {expected.variant} (fusion={expected.fusion}, "
            f"filters={expected.use_directional_filters}, age={expected.use_age}, "
            f"widths={expected.widths})"
        )

    model = build_model(cfg)
    state = model.state_dict()
    if tensor_count != len(state):
        raise CheckpointConfigMismatchError(
            f"{path}: {tensor_count} tensors stored, the {cfg.variant} network has {len(state)}"
        )

    reader = _Reader(data, offset, path)
    loaded = {}
    for _ in range(tensor_count):
        name = reader.take(reader.uint32()).decode(errors="replace")
        shape = tuple(reader.uint32() for _ in range(reader.uint32()))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape)
        if name not in state or tuple(state[name].shape) != shape:
            raise CheckpointConfigMismatchError(
                f"{path}: tensor '{name}' {shape} does not belong to the declared config"
            )
        loaded[name] = torch.from_numpy(values.copy()).to(state[name].dtype)
    if reader.offset != len(data):
        raise CheckpointCorruptError(f"{path}: unexpected data after the last tensor")

    model.load_state_dict(loaded)
    model.epoch = epoch
    return model
