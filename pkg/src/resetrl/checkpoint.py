"""Checkpoint (de)serialization.

A checkpoint is a directory holding a plain-text ``manifest.txt`` plus one
``arrays.bin`` blob of little-endian float64/int64 arrays. The manifest
records scalar fields (config echo, counters, RNG states) and, per array,
its dtype, shape, byte offset/length and SHA-256 digest. Loading verifies
sizes and digests and refuses anything inconsistent, so a round-trip is
bit-exact and re-saving an untouched load reproduces identical bytes.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

Array = np.ndarray

MANIFEST_NAME = "manifest.txt"
ARRAYS_NAME = "arrays.bin"
_FORMAT = "resetrl-checkpoint-v1"


class CheckpointError(RuntimeError):
    pass


def save_payload(path: str | Path, scalars: dict[str, str], arrays: dict[str, Array]) -> None:
    """Write scalars and arrays; dict insertion order fixes the byte layout."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = [f"format {_FORMAT}", f"scalars {len(scalars)}"]
    for key, value in scalars.items():
        if "\n" in value:
            raise CheckpointError(f"scalar {key!r} must be single-line")
        lines.append(f"{key} = {value}")
    lines.append(f"arrays {len(arrays)}")
    blob = bytearray()
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float64:
            dtype = "f8"
        elif arr.dtype == np.int64:
            dtype = "i8"
        else:
            raise CheckpointError(f"array {name!r} has unsupported dtype {arr.dtype}")
        data = arr.astype("<" + dtype, copy=False).tobytes()
        digest = hashlib.sha256(data).hexdigest()
        shape = "x".join(str(d) for d in arr.shape) or "scalar"
        lines.append(f"{name} {dtype} {shape} {len(blob)} {len(data)} {digest}")
        blob.extend(data)
    (path / ARRAYS_NAME).write_bytes(bytes(blob))
    (path / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


def load_payload(path: str | Path) -> tuple[dict[str, str], dict[str, Array]]:
    path = Path(path)
    manifest = path / MANIFEST_NAME
    blob_path = path / ARRAYS_NAME
    if not manifest.is_file() or not blob_path.is_file():
        raise CheckpointError(f"not a checkpoint directory: {path}")
    lines = manifest.read_text().splitlines()
    try:
        if lines[0] != f"format {_FORMAT}":
            raise CheckpointError(f"unknown checkpoint format: {lines[0]!r}")
        n_scalars = int(lines[1].split()[1])
        scalars: dict[str, str] = {}
        for line in lines[2 : 2 + n_scalars]:
            key, value = line.split(" = ", 1)
            scalars[key] = value
        idx = 2 + n_scalars
        n_arrays = int(lines[idx].split()[1])
        entries = lines[idx + 1 : idx + 1 + n_arrays]
        if len(entries) != n_arrays:
            raise CheckpointError("manifest truncated")
    except (IndexError, ValueError) as exc:
        raise CheckpointError(f"corrupt manifest: {exc}") from exc

    blob = blob_path.read_bytes()
    arrays: dict[str, Array] = {}
    end = 0
    for entry in entries:
        try:
            name, dtype, shape_s, offset_s, nbytes_s, digest = entry.split()
            offset, nbytes = int(offset_s), int(nbytes_s)
            shape = () if shape_s == "scalar" else tuple(int(d) for d in shape_s.split("x"))
        except ValueError as exc:
            raise CheckpointError(f"corrupt manifest entry: {entry!r}") from exc
        data = blob[offset : offset + nbytes]
        if len(data) != nbytes:
            raise CheckpointError(f"array {name!r}: blob truncated")
        if hashlib.sha256(data).hexdigest() != digest:
            raise CheckpointError(f"array {name!r}: digest mismatch")
        arr = np.frombuffer(data, dtype="<" + dtype).reshape(shape).copy()
        arrays[name] = arr
        end = max(end, offset + nbytes)
    if end != len(blob):
        raise CheckpointError("blob size does not match manifest")
    return scalars, arrays
