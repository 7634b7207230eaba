"""Self-describing single-file checkpoint.

Layout (all integers little-endian):

    magic "MCDE" | version u32 | manifest_len u64 | manifest JSON (UTF-8)
    | n_arrays u32 | arrays...

Each array record is: name_len u32, name UTF-8, dtype code u8
(0 = float32, 1 = float64, 2 = int64), ndim u8, dims u64 each, raw C-order
little-endian payload. The manifest carries the schema, model configuration,
grid size, and seed lineage; model parameters are stored as float32 and CDF
nodes/counts as 64-bit values, so loading reproduces forward output
bit-exactly.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .cdf import EmpiricalCdf
from .dataset import ColumnSpec, schema_from_json, schema_to_json
from .discretize import BinGrid
from .errors import DataError
from .model import ModelConfig, ModelParams, init_params

MAGIC = b"MCDE"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    schema: list[ColumnSpec]
    config: ModelConfig
    grid: BinGrid
    cdfs: dict[int, EmpiricalCdf]
    params: ModelParams
    seed: int


def _write_array(buf: io.BytesIO, name: str, arr: np.ndarray, dtype: np.dtype) -> None:
    data = np.ascontiguousarray(arr, dtype=dtype)
    raw = name.encode()
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<BB", _CODES[dtype], data.ndim))
    for dim in data.shape:
        buf.write(struct.pack("<Q", dim))
    buf.write(data.tobytes())


def _read_array(buf: io.BytesIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", buf.read(4))
    name = buf.read(name_len).decode()
    code, ndim = struct.unpack("<BB", buf.read(2))
    dims = tuple(struct.unpack("<Q", buf.read(8))[0] for _ in range(ndim))
    dtype = _DTYPES[code]
    count = int(np.prod(dims)) if dims else 1
    arr = np.frombuffer(buf.read(count * dtype.itemsize), dtype=dtype).reshape(dims)
    return name, arr.copy()


def save(ck: Checkpoint, path: str) -> None:
    manifest = {
        "format_version": VERSION,
        "schema": schema_to_json(ck.schema),
        "config": ck.config.to_json(),
        "grid_l": ck.grid.L,
        "level_counts": ck.params.level_counts,
        "cdf_columns": sorted(ck.cdfs),
        "seed": ck.seed,
        "rng_substreams": ["init", "shuffle", "mask", "dropout"],
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    arrays: list[tuple[str, np.ndarray, np.dtype]] = [
        ("grid.cuts", ck.grid.cuts, _DTYPES[1])
    ]
    for j in sorted(ck.cdfs):
        arrays.append((f"cdf.{j}.nodes", ck.cdfs[j].nodes, _DTYPES[1]))
        arrays.append((f"cdf.{j}.counts", ck.cdfs[j].counts, _DTYPES[2]))
    for name, tensor in ck.params.named():
        arrays.append((f"param.{name}", tensor.data, _DTYPES[0]))
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr, dtype in arrays:
        _write_array(buf, name, arr, dtype)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(4) != MAGIC:
        raise DataError(f"{path!r} is not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise DataError(f"checkpoint version {version} not supported (expected {VERSION})")
    (mlen,) = struct.unpack("<Q", buf.read(8))
    manifest = json.loads(buf.read(mlen).decode())
    (n_arrays,) = struct.unpack("<I", buf.read(4))
    arrays = dict(_read_array(buf) for _ in range(n_arrays))

    schema = schema_from_json(manifest["schema"])
    config = ModelConfig.from_json(manifest["config"])
    grid = BinGrid(arrays["grid.cuts"].astype(np.float64))
    if grid.L != manifest["grid_l"]:
        raise DataError("grid in manifest disagrees with stored cuts")
    cdfs = {
        j: EmpiricalCdf(
            arrays[f"cdf.{j}.nodes"].astype(np.float64),
            arrays[f"cdf.{j}.counts"].astype(np.int64),
        )
        for j in manifest["cdf_columns"]
    }
    level_counts = list(manifest["level_counts"])
    params = init_params(level_counts, config, np.random.default_rng(0))
    for name, tensor in params.named():
        stored = arrays.get(f"param.{name}")
        if stored is None:
            raise DataError(f"checkpoint is missing parameter {name!r}")
        if stored.shape != tensor.data.shape:
            raise DataError(f"parameter {name!r} has shape {stored.shape}, expected {tensor.data.shape}")
        tensor.data = stored.astype(np.float32)
    return Checkpoint(schema, config, grid, cdfs, params, int(manifest["seed"]))
