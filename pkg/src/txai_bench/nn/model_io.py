"""Versioned binary model container.

Layout (all integers little-endian u32 unless noted):

    magic "TXAI" (4 bytes)
    format version
    input channels, height, width, class count
    layer count, then one length-prefixed record per layer:
        u32 payload length | u8 type code | type-specific u32 fields
    parameter tensor count, then per tensor:
        u32 ndim | u32 dims... | raw little-endian float64 data

Parameter tensors appear in layer order, "w" before "b". Round-trips are
bit-exact. Distinct exception types cover bad magic, unknown version, and
truncated files.
"""

from __future__ import annotations

import struct
from io import BufferedReader, BufferedWriter

import numpy as np

from .layers import Conv2D, Dense, Flatten, LayerSpec, MaxPool, ReLU, Softmax
from .network import Network

MAGIC = b"TXAI"
FORMAT_VERSION = 1

_TYPE_CODES: list[tuple[int, type]] = [
    (1, Conv2D),
    (2, MaxPool),
    (3, ReLU),
    (4, Flatten),
    (5, Dense),
    (6, Softmax),
]
_CODE_BY_TYPE = {t: c for c, t in _TYPE_CODES}
_TYPE_BY_CODE = {c: t for c, t in _TYPE_CODES}


class ModelFileError(ValueError):
    """Base class for model container problems."""


class NotAModelFile(ModelFileError):
    pass


class UnsupportedModelVersion(ModelFileError):
    pass


class TruncatedModelFile(ModelFileError):
    pass


def _layer_fields(spec: LayerSpec) -> tuple[int, ...]:
    if isinstance(spec, Conv2D):
        return (spec.out_channels, spec.kernel_h, spec.kernel_w, spec.stride, spec.zero_padding)
    if isinstance(spec, MaxPool):
        return (spec.window, spec.stride)
    if isinstance(spec, Dense):
        return (spec.out_features,)
    return ()


def _spec_from(code: int, fields: tuple[int, ...]) -> LayerSpec:
    cls = _TYPE_BY_CODE.get(code)
    if cls is None:
        raise ModelFileError(f"unknown layer type code {code}")
    try:
        return cls(*fields)
    except TypeError as exc:
        raise ModelFileError(f"malformed record for layer type {cls.__name__}") from exc


def save_model(net: Network, path) -> None:
    with open(path, "wb") as f:
        _write(net, f)


def _write(net: Network, f: BufferedWriter) -> None:
    f.write(MAGIC)
    f.write(struct.pack("<I", FORMAT_VERSION))
    f.write(struct.pack("<4I", *net.input_shape, net.num_classes))
    f.write(struct.pack("<I", len(net.layers)))
    for spec in net.layers:
        fields = _layer_fields(spec)
        payload = struct.pack(f"<B{len(fields)}I", _CODE_BY_TYPE[type(spec)], *fields)
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)
    tensors = [p[k] for p in net.params if p for k in ("w", "b")]
    f.write(struct.pack("<I", len(tensors)))
    for t in tensors:
        f.write(struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape))
        f.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_model(path) -> Network:
    with open(path, "rb") as f:
        return _read(f)


def _take(f: BufferedReader, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedModelFile(f"unexpected end of file at byte {f.tell() - len(data) + n}")
    return data


def _read(f: BufferedReader) -> Network:
    if _take(f, 4) != MAGIC:
        raise NotAModelFile("not a model file (bad magic)")
    (version,) = struct.unpack("<I", _take(f, 4))
    if version != FORMAT_VERSION:
        raise UnsupportedModelVersion(f"unsupported model format version {version}")
    c, h, w, classes = struct.unpack("<4I", _take(f, 16))
    (n_layers,) = struct.unpack("<I", _take(f, 4))
    specs: list[LayerSpec] = []
    for _ in range(n_layers):
        (rec_len,) = struct.unpack("<I", _take(f, 4))
        payload = _take(f, rec_len)
        code = payload[0]
        n_fields = (rec_len - 1) // 4
        fields = struct.unpack(f"<{n_fields}I", payload[1:])
        specs.append(_spec_from(code, fields))
    (n_tensors,) = struct.unpack("<I", _take(f, 4))
    tensors: list[np.ndarray] = []
    for _ in range(n_tensors):
        (ndim,) = struct.unpack("<I", _take(f, 4))
        dims = struct.unpack(f"<{ndim}I", _take(f, 4 * ndim))
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(_take(f, 8 * count), dtype="<f8").astype(np.float64)
        tensors.append(data.reshape(dims))
    if f.read(1):
        raise ModelFileError("trailing data after parameter tensors")

    # reassemble parameter dicts in the same order they were written
    params: list[dict[str, np.ndarray] | None] = []
    it = iter(tensors)
    for spec in specs:
        if isinstance(spec, (Conv2D, Dense)):
            try:
                params.append({"w": next(it), "b": next(it)})
            except StopIteration:
                raise ModelFileError("parameter tensor count does not match architecture") from None
        else:
            params.append(None)
    if any(True for _ in it):
        raise ModelFileError("parameter tensor count does not match architecture")
    try:
        return Network(tuple(specs), (c, h, w), classes, params)
    except ValueError as exc:
        raise ModelFileError(f"stored parameters do not fit architecture: {exc}") from exc
