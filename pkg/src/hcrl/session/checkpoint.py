"""Binary checkpoints: parameters, optional optimizer state, descriptors.

Layout (all integers little-endian):

    bytes 0..3    magic "HCRL"
    u32           format version (currently 1)
    u32           descriptor length in bytes
    ...           descriptor JSON (UTF-8): env descriptor + network spec
    u64           params version
    u64           parameter count N
    f64 * N       parameter values
    u8            1 if optimizer state follows, else 0
    [u64          Adam timestep
     f64 * 4      lr, beta1, beta2, epsilon
     f64 * N      first moment
     f64 * N]     second moment
    u32           CRC-32 of every preceding byte

The trailing checksum makes truncation and bit corruption detectable
before any payload is trusted.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from typing import Optional

import numpy as np

from hcrl.envs.core import EnvDescriptor
from hcrl.nn import AdamState, MlpSpec, PolicyParams

MAGIC = b"HCRL"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class BadMagic(CheckpointError):
    """The file does not start with the checkpoint magic."""


class VersionUnsupported(CheckpointError):
    """The file's format version is newer than this reader."""


class ChecksumMismatch(CheckpointError):
    """Trailing CRC does not cover the bytes present (corrupt or truncated)."""


def _descriptor_blob(descriptor: EnvDescriptor, spec: MlpSpec) -> bytes:
    payload = {
        "env": descriptor.to_dict(),
        "net": {
            "input_dim": spec.input_dim,
            "hidden": list(spec.hidden),
            "action_count": spec.action_count,
        },
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def save_checkpoint(
    path: str,
    params: PolicyParams,
    optimizer: Optional[AdamState],
    descriptor: EnvDescriptor,
    spec: MlpSpec,
) -> str:
    """Write atomically (tmp file + rename); returns the path."""
    blob = _descriptor_blob(descriptor, spec)
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(blob)),
        blob,
        struct.pack("<Q", params.version),
        struct.pack("<Q", params.values.shape[0]),
        params.values.astype("<f8").tobytes(),
    ]
    if optimizer is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<Q", optimizer.timestep))
        parts.append(
            struct.pack(
                "<dddd", optimizer.lr, optimizer.beta1, optimizer.beta2, optimizer.epsilon
            )
        )
        parts.append(optimizer.first_moment.astype("<f8").tobytes())
        parts.append(optimizer.second_moment.astype("<f8").tobytes())
    body = b"".join(parts)
    data = body + struct.pack("<I", zlib.crc32(body))

    tmp_path = path + ".tmp"
    with open(tmp_path, "wb") as fh:
        fh.write(data)
    os.replace(tmp_path, path)
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.data):
            raise ChecksumMismatch("checkpoint body shorter than its own header claims")
        out = self.data[self.offset : self.offset + count]
        self.offset += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64s(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def load_checkpoint(path: str) -> tuple[PolicyParams, Optional[AdamState], EnvDescriptor, MlpSpec]:
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagic("not a checkpoint file (magic mismatch)")
    if len(data) < len(MAGIC) + 8 + 4:
        raise ChecksumMismatch("file too short to hold a checksum")
    body, crc_bytes = data[:-4], data[-4:]
    if struct.unpack("<I", crc_bytes)[0] != zlib.crc32(body):
        raise ChecksumMismatch("trailing CRC does not match file contents")

    reader = _Reader(body)
    reader.take(len(MAGIC))
    version = reader.u32()
    if version > FORMAT_VERSION:
        raise VersionUnsupported(f"format version {version} > supported {FORMAT_VERSION}")

    blob = json.loads(reader.take(reader.u32()).decode("utf-8"))
    descriptor = EnvDescriptor.from_dict(blob["env"])
    spec = MlpSpec(
        input_dim=int(blob["net"]["input_dim"]),
        hidden=tuple(int(h) for h in blob["net"]["hidden"]),
        action_count=int(blob["net"]["action_count"]),
    )

    params_version = reader.u64()
    count = reader.u64()
    if count != spec.param_count:
        raise ChecksumMismatch(
            f"parameter count {count} disagrees with network spec ({spec.param_count})"
        )
    values = reader.f64s(count)
    params = PolicyParams(values=values, version=params_version)

    optimizer: Optional[AdamState] = None
    if struct.unpack("<B", reader.take(1))[0]:
        timestep = reader.u64()
        lr, beta1, beta2, epsilon = struct.unpack("<dddd", reader.take(32))
        optimizer = AdamState(
            first_moment=reader.f64s(count),
            second_moment=reader.f64s(count),
            timestep=timestep,
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )
    if reader.offset != len(body):
        raise ChecksumMismatch(f"{len(body) - reader.offset} unexpected trailing bytes")
    return params, optimizer, descriptor, spec
