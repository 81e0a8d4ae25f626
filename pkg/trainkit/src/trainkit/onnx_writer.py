"""ONNX serialization for the exported classifier (protobuf wire format).

Only the messages the exported graph needs are encoded: ModelProto with a
single GraphProto, float32 initializers carried as raw little-endian
bytes, and the handful of node attributes the operator set uses. Opset 13.
"""

from __future__ import annotations

import struct

import numpy as np

FLOAT32 = 1

_ATTR_FLOAT = 1
_ATTR_INT = 2
_ATTR_INTS = 7


def _varint(v: int) -> bytes:
    if v < 0:
        v += 1 << 64
    out = bytearray()
    while True:
        byte = v & 0x7F
        v >>= 7
        if v:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _key(field: int, wire: int) -> bytes:
    return _varint(field << 3 | wire)


def _vfield(field: int, value: int) -> bytes:
    return _key(field, 0) + _varint(value)


def _bfield(field: int, payload: bytes) -> bytes:
    return _key(field, 2) + _varint(len(payload)) + payload


def _sfield(field: int, text: str) -> bytes:
    return _bfield(field, text.encode("utf-8"))


def _packed_ints(field: int, values) -> bytes:
    payload = b"".join(_varint(v) for v in values)
    return _bfield(field, payload)


def tensor_proto(name: str, array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype=np.float32)
    msg = _packed_ints(1, arr.shape) if arr.ndim else b""
    msg += _vfield(2, FLOAT32)
    msg += _bfield(9, arr.astype("<f4").tobytes())
    msg += _sfield(8, name)
    return msg


def _attribute(name: str, value) -> bytes:
    msg = _sfield(1, name)
    if isinstance(value, float):
        msg += _key(2, 5) + struct.pack("<f", value)
        msg += _vfield(20, _ATTR_FLOAT)
    elif isinstance(value, int):
        msg += _vfield(3, value)
        msg += _vfield(20, _ATTR_INT)
    elif isinstance(value, (list, tuple)):
        msg += _packed_ints(8, value)
        msg += _vfield(20, _ATTR_INTS)
    else:
        raise TypeError(f"unsupported attribute value {value!r}")
    return msg


def node_proto(op_type: str, inputs, outputs, name: str = "", **attrs) -> bytes:
    msg = b"".join(_sfield(1, i) for i in inputs)
    msg += b"".join(_sfield(2, o) for o in outputs)
    msg += _sfield(3, name or op_type.lower())
    msg += _sfield(4, op_type)
    msg += b"".join(_bfield(5, _attribute(k, v)) for k, v in attrs.items())
    return msg


def value_info_proto(name: str, shape) -> bytes:
    dims = b"".join(_bfield(1, _vfield(1, d)) for d in shape)
    tensor_type = _vfield(1, FLOAT32) + _bfield(2, dims)
    return _sfield(1, name) + _bfield(2, _bfield(1, tensor_type))


def model_proto(
    nodes: list[bytes],
    initializers: list[bytes],
    inputs: list[bytes],
    outputs: list[bytes],
    graph_name: str = "drowsiness_classifier",
    opset: int = 13,
    producer: str = "trainkit",
) -> bytes:
    graph = b"".join(_bfield(1, n) for n in nodes)
    graph += _sfield(2, graph_name)
    graph += b"".join(_bfield(5, t) for t in initializers)
    graph += b"".join(_bfield(11, vi) for vi in inputs)
    graph += b"".join(_bfield(12, vi) for vi in outputs)
    opset_import = _sfield(1, "") + _vfield(2, opset)
    return (
        _vfield(1, 8)  # ir_version
        + _sfield(2, producer)
        + _bfield(7, graph)
        + _bfield(8, opset_import)
    )
