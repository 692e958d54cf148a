"""Binary containers for datasets (WSDS) and model checkpoints (WSCK).

Both are little-endian. Checkpoints hold a JSON metadata block followed by
named float64 tensors; datasets hold the generating SynthConfig as JSON and
then one fixed-layout block per record.
"""

from __future__ import annotations

import io
import json
import os
import struct
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from . import nn
from .models import Cae, CaeSpec, Ffnn, FfnnSpec, cae_networks, ffnn_network
from .synthwave import LOADS_KN, PATHS, StateVector, SynthConfig, TimeSeriesRecord, path_from_index, path_index

CHECKPOINT_MAGIC = b"WSCK"
DATASET_MAGIC = b"WSDS"
CHECKPOINT_VERSION = 1
DATASET_VERSION = 1


class FormatError(ValueError):
    pass


def atomic_write(path, payload: bytes | str) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.buf = memoryview(data)
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.what} is truncated at byte {self.pos}")
        out = bytes(self.buf[self.pos : self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what} has {len(self.buf) - self.pos} trailing bytes")


def _json_block(obj) -> bytes:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(text)) + text


def _read_json(r: _Reader):
    (n,) = r.unpack("I")
    return json.loads(r.take(n).decode("utf-8"))


# ---------------------------------------------------------------- checkpoints


def encode_checkpoint(metadata: dict, tensors: dict[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<H", CHECKPOINT_VERSION))
    out.write(_json_block(metadata))
    out.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        a = np.asarray(arr, dtype=np.float64)
        out.write(struct.pack("<H", len(raw)) + raw)
        out.write(struct.pack("<B", a.ndim))
        out.write(struct.pack(f"<{a.ndim}I", *a.shape))
        out.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return out.getvalue()


def decode_checkpoint(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    r = _Reader(data, "checkpoint")
    if r.take(4) != CHECKPOINT_MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    (version,) = r.unpack("H")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
    meta = _read_json(r)
    (count,) = r.unpack("I")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("H")
        name = r.take(n).decode("utf-8")
        (rank,) = r.unpack("B")
        shape = r.unpack(f"{rank}I") if rank else ()
        tensors[name] = r.f64(int(np.prod(shape, dtype=np.int64))).reshape(shape)
    r.done()
    return meta, tensors


def _flatten_params(prefix: str, params: nn.Params) -> dict[str, np.ndarray]:
    return {f"{prefix}.{i}.{k}": v for i in sorted(params) for k, v in sorted(params[i].items())}


def _unflatten_params(prefix: str, tensors: dict[str, np.ndarray], network: nn.Network) -> nn.Params:
    params: nn.Params = {}
    for i, layer in enumerate(network.layers):
        in_shape = network.input_shape if i == 0 else network.shapes()[i - 1]
        want = nn.param_shapes(layer, in_shape)
        if not want:
            continue
        params[i] = {}
        for k, shape in want.items():
            name = f"{prefix}.{i}.{k}"
            if name not in tensors:
                raise FormatError(f"checkpoint is missing tensor {name}")
            if tensors[name].shape != tuple(shape):
                raise FormatError(f"{name}: stored shape {tensors[name].shape}, network expects {tuple(shape)}")
            params[i][k] = tensors[name]
    return params


def cae_checkpoint(cae: Cae, extra: dict | None = None) -> bytes:
    meta = {"kind": "cae", "model_type": cae.spec.model_type, "spec": cae.spec.to_dict(), "git": git_describe()}
    meta.update(extra or {})
    tensors = _flatten_params("encoder", cae.enc_params)
    tensors.update(_flatten_params("decoder", cae.dec_params))
    return encode_checkpoint(meta, tensors)


def ffnn_checkpoint(model: Ffnn, role: str, model_type: int, extra: dict | None = None) -> bytes:
    meta = {"kind": role, "model_type": model_type, "spec": model.spec.to_dict(), "git": git_describe()}
    meta.update(extra or {})
    tensors = _flatten_params("dense", model.params)
    for name in ("x_mean", "x_scale", "y_mean", "y_scale"):
        tensors[f"scaling.{name}"] = getattr(model, name)
    return encode_checkpoint(meta, tensors)


def load_cae(data: bytes, model_type: int | None = None) -> tuple[Cae, dict]:
    meta, tensors = decode_checkpoint(data)
    if meta.get("kind") != "cae":
        raise FormatError(f"expected a CAE checkpoint, found {meta.get('kind')!r}")
    spec = CaeSpec(**meta["spec"])
    if model_type is not None and spec.model_type != model_type:
        raise FormatError(f"checkpoint holds a Type {spec.model_type} model, Type {model_type} requested")
    enc, dec = cae_networks(spec)
    return Cae(spec, enc, dec, _unflatten_params("encoder", tensors, enc), _unflatten_params("decoder", tensors, dec)), meta


def load_ffnn(data: bytes, role: str, model_type: int | None = None) -> tuple[Ffnn, dict]:
    meta, tensors = decode_checkpoint(data)
    if meta.get("kind") != role:
        raise FormatError(f"expected a {role} checkpoint, found {meta.get('kind')!r}")
    if model_type is not None and meta.get("model_type") != model_type:
        raise FormatError(f"checkpoint belongs to Type {meta.get('model_type')}, Type {model_type} requested")
    spec = FfnnSpec(**meta["spec"])
    net = ffnn_network(spec)
    scaling = {k: tensors[f"scaling.{k}"] for k in ("x_mean", "x_scale", "y_mean", "y_scale")}
    return Ffnn(spec, net, _unflatten_params("dense", tensors, net), **scaling), meta


# ---------------------------------------------------------------- datasets

_RECORD_HEAD = struct.Struct("<BBBHI")


def encode_dataset(records: list[TimeSeriesRecord], config: SynthConfig) -> bytes:
    out = io.BytesIO()
    out.write(DATASET_MAGIC)
    out.write(struct.pack("<H", DATASET_VERSION))
    out.write(_json_block(config.to_dict()))
    out.write(struct.pack("<I", len(records)))
    for rec in records:
        samples = np.ascontiguousarray(rec.samples, dtype="<f8")
        out.write(
            _RECORD_HEAD.pack(rec.state.k1, LOADS_KN.index(rec.state.k2), path_index(rec.path), rec.trial, samples.size)
        )
        out.write(samples.tobytes())
    return out.getvalue()


def decode_dataset(data: bytes) -> tuple[list[TimeSeriesRecord], SynthConfig]:
    r = _Reader(data, "dataset")
    if r.take(4) != DATASET_MAGIC:
        raise FormatError("not a dataset file (bad magic)")
    (version,) = r.unpack("H")
    if version != DATASET_VERSION:
        raise FormatError(f"dataset version {version} is not supported (expected {DATASET_VERSION})")
    config = SynthConfig.from_dict(_read_json(r))
    (count,) = r.unpack("I")
    records = []
    for _ in range(count):
        level, load_idx, path, trial, n = _RECORD_HEAD.unpack(r.take(_RECORD_HEAD.size))
        if load_idx >= len(LOADS_KN) or not 1 <= path <= len(PATHS):
            raise FormatError(f"record {len(records)} has an invalid load index or path")
        state = StateVector(level, LOADS_KN[load_idx])
        records.append(TimeSeriesRecord(r.f64(n), state, path_from_index(path), trial))
    r.done()
    return records, config


def read_bytes(path) -> bytes:
    return Path(path).read_bytes()
