#!/usr/bin/env python3
"""
This file defines the Checkpoint class which stores the named parameter
tensors of a network in a single binary file.

Layout (all integers unsigned 32-bit little-endian):
    b"MSRF1"
    count
    count x (name length, name bytes, rank, rank x extent, raw little-endian doubles)

Writes go to a temporary file next to the target and are renamed into place,
so a reader never sees a half-written checkpoint.
"""

import os
import struct
import tempfile

import numpy as np

from .errors import CheckpointError
from .params import ParamStore

MAGIC = b"MSRF1"


class Checkpoint:
    def __init__(self, filename, mode):
        if mode not in ("r", "w"):
            raise ValueError(
                f"Checkpoint file must be opened in 'r' or 'w' mode, not '{mode}'"
            )
        self.mode = mode
        self.fn = filename
        self.entries = self._read_entries() if mode == "r" else {}

    def _read_entries(self):
        if not os.path.exists(self.fn):
            raise CheckpointError(f"checkpoint {self.fn} does not exist")
        with open(self.fn, "rb") as f:
            raw = f.read()
        if raw[: len(MAGIC)] != MAGIC:
            raise CheckpointError(f"{self.fn}: unknown magic {raw[:len(MAGIC)]!r}")

        offset = len(MAGIC)

        def take_u32(count=1):
            nonlocal offset
            end = offset + 4 * count
            if end > len(raw):
                raise CheckpointError(f"{self.fn}: truncated header at byte {offset}")
            values = struct.unpack_from(f"<{count}I", raw, offset)
            offset = end
            return values

        entries = {}
        (count,) = take_u32()
        for _ in range(count):
            (name_len,) = take_u32()
            if offset + name_len > len(raw):
                raise CheckpointError(f"{self.fn}: truncated tensor name at byte {offset}")
            try:
                name = raw[offset : offset + name_len].decode("utf-8")
            except UnicodeDecodeError:
                raise CheckpointError(f"{self.fn}: tensor name at byte {offset} is not UTF-8") from None
            offset += name_len
            (rank,) = take_u32()
            shape = take_u32(rank) if rank else ()
            size = int(np.prod(shape)) if shape else 1
            if offset + 8 * size > len(raw):
                raise CheckpointError(f"{self.fn}: truncated payload for {name}")
            data = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            entries[name] = data.reshape(shape).astype(np.float64)
        if offset != len(raw):
            raise CheckpointError(f"{self.fn}: {len(raw) - offset} trailing bytes")
        return entries

    def get_names(self):
        return list(self.entries)

    def size(self):
        return len(self.entries)

    def get_tensor(self, name):
        if name not in self.entries:
            raise KeyError(f"Requested tensor: {name} does not exist")
        return self.entries[name]

    def add_tensor(self, name, data):
        if self.mode != "w":
            raise RuntimeError(
                "Checkpoint file must be opened in write mode to allow for writing."
            )
        if name in self.entries:
            raise CheckpointError(f"Tensor {name} already exists in this checkpoint.")
        self.entries[name] = np.asarray(data, dtype=np.float64)

    def save(self):
        if self.mode != "w":
            raise RuntimeError(
                "Checkpoint file must be opened in write mode to allow for writing."
            )
        chunks = [MAGIC, struct.pack("<I", len(self.entries))]
        for name, data in self.entries.items():
            encoded = name.encode("utf-8")
            chunks.append(struct.pack("<I", len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack(f"<{data.ndim + 1}I", data.ndim, *data.shape))
            chunks.append(np.ascontiguousarray(data, dtype="<f8").tobytes())

        directory = os.path.dirname(os.path.abspath(self.fn))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".ckpt-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as f:
                f.writelines(chunks)
            os.replace(tmp, self.fn)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise


def save_checkpoint(params, path):
    ckpt = Checkpoint(path, "w")
    for name, tensor in params.items():
        ckpt.add_tensor(name, tensor.data)
    ckpt.save()


def load_checkpoint(path, shapes, dtype=None):
    """Read a checkpoint and reject it unless it holds exactly `shapes`."""
    ckpt = Checkpoint(path, "r")
    ParamStore.from_arrays(ckpt.entries).check_shapes(shapes)
    return ParamStore.from_arrays({name: ckpt.entries[name] for name, _ in shapes}, dtype=dtype)
